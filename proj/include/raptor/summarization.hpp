#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace raptor {

// Chat messages sent by the HTTP summarizer. The mock meters charge for the
// same rendered messages so token accounting is backend-independent.
inline constexpr std::string_view kSummarySystemPrompt = "You are a Summarizing Text Portal";
inline constexpr std::string_view kSummaryUserTemplate =
    "Write a summary of the following, including as many key details as possible: {context}:";

// Separator between member texts when a cluster is flattened into one
// summarization context. The extractive mock splits on it.
inline constexpr std::string_view kContextSeparator = "\n\n";

// kSummaryUserTemplate with {context} substituted.
std::string render_summary_user_message(std::string_view context);

// Prompt tokens charged per call beyond the context itself (system message
// plus the user template scaffolding), under the default tokenizer.
std::int64_t summary_prompt_overhead_tokens();

struct UsageSnapshot {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t calls = 0;
    std::int64_t total_tokens() const { return prompt_tokens + completion_tokens; }
};

// Monotone token counters, safe for concurrent providers.
class UsageMeter {
public:
    void add(std::int64_t prompt, std::int64_t completion) {
        prompt_.fetch_add(prompt, std::memory_order_relaxed);
        completion_.fetch_add(completion, std::memory_order_relaxed);
        calls_.fetch_add(1, std::memory_order_relaxed);
    }
    UsageSnapshot snapshot() const {
        return {prompt_.load(std::memory_order_relaxed),
                completion_.load(std::memory_order_relaxed),
                calls_.load(std::memory_order_relaxed)};
    }

private:
    std::atomic<std::int64_t> prompt_{0};
    std::atomic<std::int64_t> completion_{0};
    std::atomic<std::int64_t> calls_{0};
};

// Pluggable summarization backend with built-in usage metering.
class SummarizationProvider {
public:
    virtual ~SummarizationProvider() = default;

    // Non-empty summary for a non-empty context. Meters prompt tokens
    // (rendered messages) and completion tokens per call.
    std::string summarize(const std::string& context);

    const UsageMeter& usage() const { return meter_; }
    virtual std::string kind() const = 0;
    virtual std::int64_t max_summary_tokens() const = 0;

protected:
    struct SummaryOutput {
        std::string text;
        // Exact token usage reported by the backend, when it reports one.
        std::optional<std::pair<std::int64_t, std::int64_t>> usage;
    };
    virtual SummaryOutput summarize_impl(const std::string& context) = 0;

private:
    UsageMeter meter_;
};

// Returns the first max_summary_tokens tokens of the context, verbatim.
class MockTruncateSummarizer : public SummarizationProvider {
public:
    explicit MockTruncateSummarizer(std::int64_t max_tokens = 150);
    std::string kind() const override { return "mock-truncate"; }
    std::int64_t max_summary_tokens() const override { return max_tokens_; }

protected:
    SummaryOutput summarize_impl(const std::string& context) override;

private:
    std::int64_t max_tokens_;
};

// Returns the first sentence of each constituent chunk of the context
// (split on kContextSeparator), up to the token budget.
class MockExtractiveSummarizer : public SummarizationProvider {
public:
    explicit MockExtractiveSummarizer(std::int64_t max_tokens = 150);
    std::string kind() const override { return "mock-extractive"; }
    std::int64_t max_summary_tokens() const override { return max_tokens_; }

protected:
    SummaryOutput summarize_impl(const std::string& context) override;

private:
    std::int64_t max_tokens_;
};

}  // namespace raptor
