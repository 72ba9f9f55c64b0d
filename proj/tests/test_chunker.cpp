#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>
#include <string>
#include <vector>

#include "raptor/chunker.hpp"
#include "raptor/errors.hpp"
#include "raptor/rng.hpp"
#include "raptor/tokenizer.hpp"

using namespace raptor;

namespace {

// n_tokens-token sentence: (n_tokens - 1) words plus the terminal period.
std::string make_sentence(int n_tokens, int idx) {
    std::string s = "W" + std::to_string(idx);
    for (int i = 1; i < n_tokens - 1; ++i) s += " w" + std::to_string(i);
    s += ".";
    return s;
}

std::vector<std::string> sentence_texts(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& s : split_sentences(text)) out.push_back(s.text);
    return out;
}

}  // namespace

TEST_CASE("tokenize basics") {
    CHECK(tokenize("").empty());
    CHECK(tokenize("   \t\n ").empty());

    auto toks = tokenize("Hello, world.");
    REQUIRE(toks.size() == 4);
    CHECK(toks[0] == "Hello");
    CHECK(toks[1] == ",");
    CHECK(toks[2] == "world");
    CHECK(toks[3] == ".");

    CHECK(tokenize("a a a").size() == 3);
    CHECK(count_tokens("a a a") == 3);
}

TEST_CASE("tokenize offsets point into the source") {
    const std::string text = "Hello, world.";
    auto toks = tokenize_with_offsets(text);
    REQUIRE(toks.size() == 4);
    CHECK(toks[0].offset == 0);
    CHECK(toks[1].offset == 5);
    CHECK(toks[2].offset == 7);
    CHECK(toks[3].offset == 12);
    for (const auto& t : toks) {
        CHECK(text.compare(t.offset, t.text.size(), t.text) == 0);
    }
}

TEST_CASE("tokenize is deterministic") {
    const std::string text = "Mixed 123 punctuation! (and) more";
    CHECK(tokenize(text) == tokenize(text));
}

TEST_CASE("truncate_to_tokens") {
    CHECK(truncate_to_tokens("a b c d e", 3) == "a b c");
    CHECK(truncate_to_tokens("a b c d e", 0) == "");
    CHECK(truncate_to_tokens("a b c", 10) == "a b c");
    CHECK(truncate_to_tokens("Hello, world.", 2) == "Hello,");
}

TEST_CASE("split_sentences basics") {
    CHECK(split_sentences("").empty());

    auto two = sentence_texts("A b. C d!");
    REQUIRE(two.size() == 2);
    CHECK(two[0] == "A b.");
    CHECK(two[1] == "C d!");

    auto abbrev = sentence_texts("Dr. Smith left. He ran.");
    REQUIRE(abbrev.size() == 2);
    CHECK(abbrev[0] == "Dr. Smith left.");
    CHECK(abbrev[1] == "He ran.");
}

TEST_CASE("split_sentences handles question marks and quotes") {
    auto s = sentence_texts("Is it so? \"Yes.\" He nodded.");
    REQUIRE(s.size() == 3);
    CHECK(s[0] == "Is it so?");
    CHECK(s[1] == "\"Yes.\"");
    CHECK(s[2] == "He nodded.");
}

TEST_CASE("split_sentences keeps unterminated trailing text") {
    auto s = sentence_texts("Done. And then nothing more");
    REQUIRE(s.size() == 2);
    CHECK(s[0] == "Done.");
    CHECK(s[1] == "And then nothing more");

    // Lowercase continuation is not a boundary.
    auto merged = sentence_texts("Done. and then nothing more");
    REQUIRE(merged.size() == 1);
    CHECK(merged[0] == "Done. and then nothing more");
}

TEST_CASE("split_sentences abbreviation stop-list") {
    for (const char* abbr : {"Dr.", "Mr.", "Mrs.", "Ms.", "e.g.", "i.e.", "etc.", "Fig.", "Eq.", "vs."}) {
        std::string text = std::string("See ") + abbr + " Then more.";
        auto s = sentence_texts(text);
        CAPTURE(text);
        CHECK(s.size() == 1);
    }
}

TEST_CASE("split_sentences offsets are source positions") {
    const std::string text = "First one. Second one! Third?";
    auto sents = split_sentences(text);
    REQUIRE(sents.size() == 3);
    for (const auto& s : sents) {
        CHECK(text.compare(s.offset, s.text.size(), s.text) == 0);
    }
}

TEST_CASE("chunk_text empty input") {
    CHECK(chunk_text("", 100).empty());
    CHECK(chunk_text("   ", 100).empty());
}

TEST_CASE("chunk_text rejects non-positive budget") {
    CHECK_THROWS_AS(chunk_text("a.", 0), ConfigError);
    CHECK_THROWS_AS(chunk_text("a.", -5), ConfigError);
}

TEST_CASE("chunk_text greedy packing 60/60/30 under budget 100") {
    const std::string s1 = make_sentence(60, 1);
    const std::string s2 = make_sentence(60, 2);
    const std::string s3 = make_sentence(30, 3);
    REQUIRE(count_tokens(s1) == 60);
    REQUIRE(count_tokens(s2) == 60);
    REQUIRE(count_tokens(s3) == 30);

    auto chunks = chunk_text(s1 + " " + s2 + " " + s3, 100);
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].text == s1);
    CHECK(chunks[0].token_count == 60);
    CHECK(chunks[1].text == s2 + " " + s3);
    CHECK(chunks[1].token_count == 90);
}

TEST_CASE("default budget is 100") {
    // 26 sentences of 5 tokens each: 20 per chunk at the default budget.
    std::string text;
    for (int i = 0; i < 26; ++i) text += make_sentence(5, i) + " ";
    auto chunks = chunk_text(text);
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].token_count == 100);
    CHECK(chunks[1].token_count == 30);
}

TEST_CASE("oversize sentence becomes its own chunk") {
    const std::string big = make_sentence(40, 0);
    const std::string small = make_sentence(4, 1);
    auto chunks = chunk_text(small + " " + big + " " + small, 10);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].text == small);
    CHECK(chunks[1].text == big);
    CHECK(chunks[1].token_count == 40);
    CHECK(chunks[2].text == small);
}

TEST_CASE("chunk doc_id and source offsets") {
    const std::string text = "One two three. Four five six. Seven eight.";
    auto chunks = chunk_text(text, 5, "doc-7");
    REQUIRE(!chunks.empty());
    for (const auto& c : chunks) {
        CHECK(c.doc_id == "doc-7");
        auto toks = tokenize_with_offsets(c.text);
        REQUIRE(!toks.empty());
        CHECK(text.compare(c.source_offset, toks[0].text.size(), toks[0].text) == 0);
    }
}

namespace {

std::string random_doc(SplitMix64& rng) {
    static const std::vector<std::string> vocab = {
        "alpha", "beta", "gamma", "delta", "sigma", "engine", "river", "stone",
        "matrix", "cloud", "vector", "Dr.", "e.g.", "graph", "node", "query"};
    static const std::vector<std::string> enders = {".", "!", "?"};
    std::string text;
    const int n_sentences = 1 + static_cast<int>(rng.next_below(12));
    for (int s = 0; s < n_sentences; ++s) {
        const int n_words = 1 + static_cast<int>(rng.next_below(30));
        for (int w = 0; w < n_words; ++w) {
            std::string word = vocab[rng.next_below(vocab.size())];
            if (w == 0) word[0] = static_cast<char>(std::toupper(word[0]));
            text += word;
            text += (w + 1 < n_words) ? " " : "";
        }
        text += enders[rng.next_below(enders.size())];
        if (s + 1 < n_sentences) text += " ";
    }
    return text;
}

}  // namespace

TEST_CASE("chunk invariants hold on random sentence-structured texts") {
    SplitMix64 rng(20240611);
    for (int trial = 0; trial < 200; ++trial) {
        const std::string doc = random_doc(rng);
        const int budget = 5 + static_cast<int>(rng.next_below(116));
        auto chunks = chunk_text(doc, budget);
        CAPTURE(doc);
        CAPTURE(budget);

        // Token counts true to the tokenizer; non-oversize chunks fit.
        std::vector<std::string> rejoined;
        for (const auto& c : chunks) {
            CHECK(!c.text.empty());
            CHECK(c.token_count == static_cast<int>(count_tokens(c.text)));
            auto chunk_sents = sentence_texts(c.text);
            if (c.token_count > budget) CHECK(chunk_sents.size() == 1);
            for (auto& s : chunk_sents) rejoined.push_back(std::move(s));
        }

        // No sentence split or lost: chunk sentences replay the document's.
        CHECK(rejoined == sentence_texts(doc));

        // Determinism.
        auto again = chunk_text(doc, budget);
        REQUIRE(again.size() == chunks.size());
        for (std::size_t i = 0; i < chunks.size(); ++i) CHECK(again[i].text == chunks[i].text);
    }
}

TEST_CASE("chunk count never grows with budget") {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const std::string doc = random_doc(rng);
        std::size_t prev = chunk_text(doc, 5).size();
        for (int budget : {10, 20, 40, 80, 160}) {
            const std::size_t cur = chunk_text(doc, budget).size();
            CHECK(cur <= prev);
            prev = cur;
        }
    }
}
