#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "raptor/clustering.hpp"
#include "raptor/embedding.hpp"
#include "raptor/summarization.hpp"

namespace raptor {

// One input document. doc_id is carried through to the leaves it produces.
struct Document {
    std::string doc_id;
    std::string text;
};

// A tree node: a leaf chunk (layer 0) or a cluster summary (layer > 0).
// Embeddings are stored unit-normalized, so dot product equals cosine.
struct Node {
    std::int64_t id = 0;
    int layer = 0;
    std::string text;
    Vector embedding;
    std::vector<std::int64_t> children;  // empty iff layer == 0
    std::int64_t token_count = 0;
    // Leaf provenance. Upper-layer nodes keep doc_id empty and offset -1.
    std::string doc_id;
    std::int64_t source_offset = -1;
};

struct BuildConfig {
    std::int64_t chunk_budget = 100;
    int max_layers = 5;      // total layer count cap, leaves included
    int min_top_nodes = 5;   // stop once a layer has this few nodes
    std::uint64_t seed = 0;
    int max_in_flight = 8;   // concurrent summarization calls per layer
    ClusteringConfig clustering;
};

// Kinds and limits of the providers a tree was built with, kept alongside
// the config so a loaded index can be checked against the providers offered
// at query time.
struct ProviderInfo {
    std::string embedder_kind;
    int embedding_dim = 0;
    std::string summarizer_kind;
    std::int64_t max_summary_tokens = 0;
};

struct Tree {
    std::map<std::int64_t, Node> nodes;
    std::vector<std::vector<std::int64_t>> layers;  // index = layer, ids ascending
    std::string config_fingerprint;                 // 16 hex chars
    std::vector<std::string> provenance;            // sorted unique doc ids
    BuildConfig config;
    ProviderInfo providers;
    std::string grouping = "gmm";  // "gmm" or "recency"
    int recency_window = 0;        // > 0 iff grouping == "recency"

    // Lookup that treats a missing id as index corruption.
    const Node& node(std::int64_t id) const;
    int top_layer() const { return static_cast<int>(layers.size()) - 1; }
};

struct BuildReport {
    std::vector<std::string> warnings;
    UsageSnapshot summarizer_usage;  // this build only, even on shared providers
    double wall_seconds = 0.0;
    std::int64_t chunk_count = 0;
    std::string termination;  // "min_top_nodes", "single_cluster", "max_layers", "aborted"
};

// Aggregates over parent (non-leaf) nodes. All averages are NaN when the
// tree has no parents.
struct TreeStats {
    double avg_summary_tokens = 0.0;
    double avg_child_tokens = 0.0;  // averaged over parent->child edges
    double avg_children_per_parent = 0.0;
    double avg_compression_ratio = 0.0;  // mean of summary/child-total per parent
    std::int64_t parent_count = 0;
    std::vector<std::int64_t> layer_node_counts;
};

// Stable hash of everything that determines a build's output, for detecting
// config/index mismatches. Returned as 16 lowercase hex characters.
std::string config_fingerprint(const BuildConfig& config, const ProviderInfo& providers,
                               std::string_view grouping, int recency_window);

// Bottom-up build: chunk the corpus into layer 0, then repeatedly cluster
// the current layer, summarize each cluster, and embed the summaries as the
// next layer. Stops when the layer is down to min_top_nodes nodes, when
// clustering returns a single cluster, or at max_layers. `report`, when
// given, is filled in even if a provider failure aborts the build.
Tree build_tree(const std::vector<Document>& corpus, EmbeddingProvider& embedder,
                SummarizationProvider& summarizer, const BuildConfig& config,
                BuildReport* report = nullptr);

// Same pipeline, but each layer is grouped into consecutive windows of
// `window` nodes instead of clusters. The last window may be smaller.
Tree build_recency_tree(const std::vector<Document>& corpus, EmbeddingProvider& embedder,
                        SummarizationProvider& summarizer, int window, const BuildConfig& config,
                        BuildReport* report = nullptr);

TreeStats tree_stats(const Tree& tree);

// Checks every structural invariant: layers partition the node map, children
// exist and sit on strictly lower layers, leaves and only leaves are
// childless, every node is reachable from the top layer, embeddings share
// one dimension, provenance matches the leaves, and the stored fingerprint
// matches the stored config. Throws CorruptIndexError on any violation.
void validate_tree(const Tree& tree);

}  // namespace raptor
