#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "raptor/embedding.hpp"
#include "raptor/tree.hpp"

namespace raptor {

enum class RetrievalMode { traversal, collapsed, layer_restricted, flat };

std::string to_string(RetrievalMode mode);

struct RetrievalResult {
    std::vector<std::int64_t> selected;  // selection order, most similar first per stage
    std::vector<double> scores;          // cosine similarities aligned with selected
    std::int64_t total_tokens = 0;
    std::map<int, std::int64_t> layer_tally;
    RetrievalMode mode = RetrievalMode::collapsed;
    // Traversal only: index into `selected` where each stage begins.
    std::vector<std::size_t> stage_offsets;
    // Pairs (node, ancestor) where both ends were selected, i.e. a node was
    // retrieved both directly and inside an ancestor's summary. Sorted.
    std::vector<std::pair<std::int64_t, std::int64_t>> ancestor_overlap;
};

struct QueryConfig {
    RetrievalMode mode = RetrievalMode::collapsed;
    int top_k = 5;                   // traversal
    std::int64_t max_tokens = 2000;  // token-budgeted modes
    std::vector<int> allowed_layers;
    int start_layer = -1;  // traversal; -1 = top layer
    int depth = -1;        // traversal; -1 = every layer from the start down
};

// Top-k beam down the tree: stage 1 scores the start layer (top by default),
// each later stage scores the union of the previous stage's children, minus
// anything already selected. Ties break toward the smaller id. Stops early
// when a stage has no candidates.
RetrievalResult tree_traversal(const Tree& tree, const Vector& query, int k, int depth = -1,
                               int start_layer = -1);

// Ranks every node of every layer by similarity and takes the longest prefix
// fitting max_tokens, stopping at the first node that would overflow.
RetrievalResult collapsed_tree(const Tree& tree, const Vector& query, std::int64_t max_tokens);

// collapsed_tree over only the nodes whose layer is in allowed_layers.
RetrievalResult layer_restricted_retrieve(const Tree& tree, const Vector& query,
                                          const std::vector<int>& allowed_layers,
                                          std::int64_t max_tokens);

// collapsed_tree over layer 0 only: the leaf-level dense-retrieval baseline.
RetrievalResult flat_retrieve(const Tree& tree, const Vector& query, std::int64_t max_tokens);

// Dispatch on config.mode.
RetrievalResult retrieve(const Tree& tree, const Vector& query, const QueryConfig& config);

// Aggregate layer_tally across results as percentages summing to 100.
std::map<int, double> layer_histogram(const std::vector<RetrievalResult>& results);

// Concatenate the selected node texts, separated by kContextSeparator, in
// selection order. document_order instead keeps non-leaf summaries first (in
// selection order) and re-sorts leaves by (doc_id, source_offset).
std::string assemble_context(const Tree& tree, const RetrievalResult& result,
                             bool document_order = false);

}  // namespace raptor
