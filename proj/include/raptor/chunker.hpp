#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "raptor/tokenizer.hpp"

namespace raptor {

// A sentence plus its character offset in the source text.
struct Sentence {
    std::string text;
    std::size_t offset = 0;
};

// A contiguous, sentence-aligned segment of one document. Leaf payload.
struct Chunk {
    std::string text;
    std::int64_t token_count = 0;
    std::size_t source_offset = 0;
    std::string doc_id;
};

// Rule-based sentence splitter. A sentence ends at . ! ? (plus trailing
// closing quotes/brackets) followed by whitespace and an uppercase letter,
// digit, or opening quote. Splits after known abbreviations (Dr., e.g., ...)
// are suppressed. Trailing text without terminal punctuation is still a
// sentence.
std::vector<Sentence> split_sentences(std::string_view text);

// Greedy sentence packing: append sentences while the running token count
// stays within `budget`; a sentence that would overflow starts the next
// chunk; a single sentence over budget becomes its own oversize chunk.
std::vector<Chunk> chunk_text(std::string_view text, std::int64_t budget = 100,
                              std::string_view doc_id = "");

}  // namespace raptor
