#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace raptor {

// A token plus its character offset in the source text.
struct Token {
    std::string text;
    std::size_t offset = 0;
};

// Pluggable tokenizer: pure function from text to token strings.
using TokenizerFn = std::function<std::vector<std::string>(std::string_view)>;

// Default tokenizer rule: maximal runs of word characters (alphanumerics,
// underscore, and any non-ASCII byte) are one token each; every other
// non-whitespace character is its own single-character token.
std::vector<Token> tokenize_with_offsets(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);
std::int64_t count_tokens(std::string_view text);

// Longest prefix of `text` containing at most `max_tokens` tokens, cut at
// the end of the last included token.
std::string truncate_to_tokens(std::string_view text, std::int64_t max_tokens);

}  // namespace raptor
