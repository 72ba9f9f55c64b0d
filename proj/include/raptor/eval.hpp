#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "raptor/retrieval.hpp"
#include "raptor/tree.hpp"

namespace raptor {

// A scored retrieval probe. `relevant` lists the ids of the planted chunks
// the probe is about; since every generated document fits in one chunk,
// chunk ids and document ids coincide.
struct EvalQuery {
    std::string text;
    std::vector<std::string> relevant;
    std::string kind;  // "detail" or "thematic"
};

struct SyntheticCorpus {
    std::vector<Document> documents;
    std::vector<EvalQuery> queries;
    // topic keyword -> chunk ids carrying it, in document order
    std::map<std::string, std::vector<std::string>> planted_topics;
    std::uint64_t seed = 0;
};

// Seeded corpus with planted topical structure. Each chunk is a few
// templated sentences anchored on one topic keyword plus a unique marker
// token. shuffle=true interleaves topics round-robin so related chunks are
// never adjacent; false keeps each topic contiguous. Detail queries target
// one chunk; thematic queries target a whole topic and are emitted only
// when the topic's chunks include at least three pairwise non-adjacent
// positions. Throws ConfigError on n_topics < 1 or chunks_per_topic < 1.
SyntheticCorpus generate_corpus(std::uint64_t seed, int n_topics, int chunks_per_topic,
                                bool shuffle);

// The corpus topic keywords, sorted: ready to use as an embedder lexicon.
std::vector<std::string> corpus_lexicon(const SyntheticCorpus& corpus);

// Document ids covered by a selection: a leaf covers its own document, a
// summary node covers every descendant leaf's document.
std::set<std::string> covered_documents(const Tree& tree, const std::vector<std::int64_t>& selected);

// |covered ∩ relevant| / |relevant|. Throws InvalidInputError when
// `relevant` is empty.
double coverage_recall(const Tree& tree, const std::vector<std::int64_t>& selected,
                       const std::vector<std::string>& relevant);

// A named retrieval setup to score. `query.max_tokens` is overridden by the
// evaluate() budget for the budgeted modes.
struct StrategySpec {
    std::string name;
    const Tree* tree = nullptr;
    QueryConfig query;
};

struct StrategyScore {
    std::string name;
    double recall = 0.0;           // mean over all queries
    double detail_recall = 0.0;    // mean over detail queries; 0 when none
    double thematic_recall = 0.0;  // mean over thematic queries; 0 when none
    std::int64_t detail_queries = 0;
    std::int64_t thematic_queries = 0;
    // share of retrieved nodes per layer across all queries, in percent
    std::map<int, double> layer_histogram;
};

struct ScalingRow {
    std::int64_t corpus_tokens = 0;
    std::int64_t summarizer_tokens = 0;  // prompt + completion during build
    double wall_seconds = 0.0;
    std::int64_t chunk_count = 0;
    std::int64_t node_count = 0;
};

// Ordinary least squares y = slope * x + intercept. Undefined (defined =
// false) with fewer than two distinct x values.
struct LinearFit {
    bool defined = false;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LinearFit fit_least_squares(const std::vector<double>& x, const std::vector<double>& y);

struct EvalReport {
    std::uint64_t seed = 0;
    std::int64_t budget = 0;
    std::vector<StrategyScore> strategies;
    std::vector<ScalingRow> scaling;  // sorted by corpus_tokens
    LinearFit token_fit;              // summarizer_tokens vs corpus_tokens
    LinearFit time_fit;               // wall_seconds vs corpus_tokens
};

// Scores every strategy against every corpus query at the given token
// budget. The embedder must be the one the trees were built with, so query
// vectors live in the same space. Throws InvalidInputError on an empty
// strategy list or a null tree, ConfigError on budget < 0.
EvalReport evaluate(const SyntheticCorpus& corpus, const std::vector<StrategySpec>& strategies,
                    EmbeddingProvider& embedder, std::int64_t budget);

struct ScalingConfig {
    std::uint64_t seed = 7;
    int chunks_per_topic = 10;
    BuildConfig build;  // build.seed is replaced by a per-length derived seed
};

// Builds a mock-provider tree per target corpus length (in tokens) and
// records summarizer token usage and wall time, plus least-squares fits of
// both against corpus length. Throws ConfigError on an empty length list or
// a non-positive length.
EvalReport scaling_benchmark(const std::vector<std::int64_t>& lengths,
                             const ScalingConfig& config);

// Mean over non-leaf nodes of the dominant topic's share among descendant
// leaves, using the corpus topic labels. NaN for a leaf-only tree.
double parent_topic_purity(const Tree& tree, const SyntheticCorpus& corpus);

std::string report_to_json(const EvalReport& report);

// Plot-ready rows: length, tokens, seconds, r_squared (token fit, repeated;
// empty when the fit is undefined).
std::string scaling_to_csv(const EvalReport& report);

}  // namespace raptor
