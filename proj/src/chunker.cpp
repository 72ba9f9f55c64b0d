#include "raptor/chunker.hpp"

#include <array>
#include <cctype>

#include "raptor/errors.hpp"

namespace raptor {

namespace {

constexpr std::array<std::string_view, 10> kAbbreviations = {
    "dr.", "mr.", "mrs.", "ms.", "e.g.", "i.e.", "etc.", "fig.", "eq.", "vs.",
};

bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_terminal(char c) {
    return c == '.' || c == '!' || c == '?';
}

bool is_closing(char c) {
    return c == '"' || c == '\'' || c == ')' || c == ']';
}

bool is_sentence_opener(char c) {
    return (std::isupper(static_cast<unsigned char>(c)) != 0) || c == '"' || c == '\'';
}

// The word ending at `dot_pos` (periods included, leading punctuation
// stripped) matched case-insensitively against the abbreviation stop-list.
bool ends_with_abbreviation(std::string_view text, std::size_t dot_pos) {
    std::size_t w = dot_pos;
    while (w > 0 && !is_space_byte(static_cast<unsigned char>(text[w - 1]))) --w;
    while (w < dot_pos && std::isalnum(static_cast<unsigned char>(text[w])) == 0) ++w;
    if (w >= dot_pos) return false;
    std::string word;
    word.reserve(dot_pos + 1 - w);
    for (std::size_t i = w; i <= dot_pos; ++i) {
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
    }
    for (auto abbr : kAbbreviations) {
        if (word == abbr) return true;
    }
    return false;
}

}  // namespace

std::vector<Sentence> split_sentences(std::string_view text) {
    std::vector<Sentence> out;
    const std::size_t n = text.size();

    std::size_t i = 0;
    while (i < n && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;

    while (i < n) {
        const char c = text[i];
        if (is_terminal(c)) {
            std::size_t end = i + 1;
            while (end < n && is_closing(text[end])) ++end;

            bool boundary = false;
            if (end >= n) {
                boundary = true;
            } else if (is_space_byte(static_cast<unsigned char>(text[end]))) {
                std::size_t k = end;
                while (k < n && is_space_byte(static_cast<unsigned char>(text[k]))) ++k;
                boundary = (k >= n) || is_sentence_opener(text[k]);
            }
            if (boundary && c == '.' && ends_with_abbreviation(text, i)) boundary = false;

            if (boundary) {
                if (end > start) out.push_back({std::string(text.substr(start, end - start)), start});
                i = end;
                while (i < n && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
                start = i;
                continue;
            }
        }
        ++i;
    }

    if (start < n) {
        std::size_t end = n;
        while (end > start && is_space_byte(static_cast<unsigned char>(text[end - 1]))) --end;
        if (end > start) out.push_back({std::string(text.substr(start, end - start)), start});
    }
    return out;
}

std::vector<Chunk> chunk_text(std::string_view text, std::int64_t budget, std::string_view doc_id) {
    if (budget < 1) {
        throw ConfigError("chunk budget must be >= 1, got " + std::to_string(budget));
    }

    const auto sentences = split_sentences(text);
    std::vector<Chunk> chunks;

    std::string cur_text;
    std::int64_t cur_tokens = 0;
    std::size_t cur_offset = 0;

    auto flush = [&] {
        if (cur_text.empty()) return;
        Chunk c;
        c.text = std::move(cur_text);
        c.token_count = count_tokens(c.text);
        c.source_offset = cur_offset;
        c.doc_id = std::string(doc_id);
        chunks.push_back(std::move(c));
        cur_text.clear();
        cur_tokens = 0;
    };

    for (const auto& s : sentences) {
        const std::int64_t t = count_tokens(s.text);
        if (t > budget) {
            // Oversize sentence: emit as its own chunk rather than cutting it.
            flush();
            chunks.push_back({s.text, t, s.offset, std::string(doc_id)});
            continue;
        }
        if (cur_tokens + t > budget) flush();
        if (cur_text.empty()) {
            cur_offset = s.offset;
            cur_text = s.text;
        } else {
            cur_text += ' ';
            cur_text += s.text;
        }
        cur_tokens += t;
    }
    flush();
    return chunks;
}

}  // namespace raptor
