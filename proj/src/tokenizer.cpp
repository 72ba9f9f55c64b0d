#include "raptor/tokenizer.hpp"

#include <cctype>

namespace raptor {

namespace {

bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Non-ASCII bytes count as word characters so UTF-8 sequences stay intact.
bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c == '_' || c >= 0x80;
}

}  // namespace

std::vector<Token> tokenize_with_offsets(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_space_byte(c)) {
            ++i;
            continue;
        }
        if (is_word_byte(c)) {
            std::size_t start = i;
            while (i < n && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
            tokens.push_back({std::string(text.substr(start, i - start)), start});
        } else {
            tokens.push_back({std::string(1, text[i]), i});
            ++i;
        }
    }
    return tokens;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
    return out;
}

std::int64_t count_tokens(std::string_view text) {
    std::int64_t count = 0;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_space_byte(c)) {
            ++i;
        } else if (is_word_byte(c)) {
            while (i < n && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
            ++count;
        } else {
            ++i;
            ++count;
        }
    }
    return count;
}

std::string truncate_to_tokens(std::string_view text, std::int64_t max_tokens) {
    if (max_tokens <= 0) return {};
    std::int64_t count = 0;
    std::size_t end = 0;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n && count < max_tokens) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_space_byte(c)) {
            ++i;
            continue;
        }
        if (is_word_byte(c)) {
            while (i < n && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        } else {
            ++i;
        }
        end = i;
        ++count;
    }
    return std::string(text.substr(0, end));
}

}  // namespace raptor
