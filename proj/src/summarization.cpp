#include "raptor/summarization.hpp"

#include <algorithm>
#include <cctype>

#include "raptor/chunker.hpp"
#include "raptor/errors.hpp"
#include "raptor/tokenizer.hpp"

namespace raptor {

namespace {

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::string render_summary_user_message(std::string_view context) {
    std::string out(kSummaryUserTemplate);
    const auto pos = out.find("{context}");
    out.replace(pos, 9, context);
    return out;
}

std::int64_t summary_prompt_overhead_tokens() {
    return count_tokens(kSummarySystemPrompt) + count_tokens(render_summary_user_message(""));
}

std::string SummarizationProvider::summarize(const std::string& context) {
    if (is_blank(context)) {
        throw InvalidInputError("summarize: empty context");
    }
    SummaryOutput out = summarize_impl(context);
    if (is_blank(out.text)) {
        throw ProviderError("summarize: provider returned an empty summary");
    }
    if (out.usage) {
        meter_.add(out.usage->first, out.usage->second);
    } else {
        const std::int64_t prompt =
            count_tokens(kSummarySystemPrompt) + count_tokens(render_summary_user_message(context));
        meter_.add(prompt, count_tokens(out.text));
    }
    return out.text;
}

MockTruncateSummarizer::MockTruncateSummarizer(std::int64_t max_tokens) : max_tokens_(max_tokens) {
    if (max_tokens_ < 1) throw ConfigError("max_summary_tokens must be >= 1");
}

SummarizationProvider::SummaryOutput MockTruncateSummarizer::summarize_impl(const std::string& context) {
    return {truncate_to_tokens(context, max_tokens_), std::nullopt};
}

MockExtractiveSummarizer::MockExtractiveSummarizer(std::int64_t max_tokens) : max_tokens_(max_tokens) {
    if (max_tokens_ < 1) throw ConfigError("max_summary_tokens must be >= 1");
}

SummarizationProvider::SummaryOutput MockExtractiveSummarizer::summarize_impl(const std::string& context) {
    std::string summary;
    std::int64_t used = 0;

    std::size_t pos = 0;
    while (pos <= context.size()) {
        const auto next = context.find(kContextSeparator, pos);
        const std::string_view part =
            std::string_view(context).substr(pos, next == std::string::npos ? std::string::npos : next - pos);

        const auto sentences = split_sentences(part);
        if (!sentences.empty()) {
            const std::string& first = sentences.front().text;
            const std::int64_t t = count_tokens(first);
            if (summary.empty()) {
                // Always produce something: a lone over-budget opener is cut.
                summary = t > max_tokens_ ? truncate_to_tokens(first, max_tokens_) : first;
                used = count_tokens(summary);
            } else if (used + t <= max_tokens_) {
                summary += ' ';
                summary += first;
                used += t;
            } else {
                break;
            }
        }

        if (next == std::string::npos) break;
        pos = next + kContextSeparator.size();
    }
    return {std::move(summary), std::nullopt};
}

}  // namespace raptor
