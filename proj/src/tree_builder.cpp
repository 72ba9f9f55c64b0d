#include "raptor/tree.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <future>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "raptor/chunker.hpp"
#include "raptor/errors.hpp"
#include "raptor/rng.hpp"
#include "raptor/tokenizer.hpp"

namespace raptor {
namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<Cluster> recency_windows(const std::vector<std::int64_t>& ids,
                                     const std::vector<std::int64_t>& token_counts, int window) {
    std::vector<Cluster> groups;
    for (std::size_t base = 0; base < ids.size(); base += static_cast<std::size_t>(window)) {
        const std::size_t end = std::min(ids.size(), base + static_cast<std::size_t>(window));
        Cluster g;
        for (std::size_t i = base; i < end; ++i) {
            g.member_ids.push_back(ids[i]);
            g.responsibilities.push_back(1.0);
            g.total_tokens += token_counts[i];
        }
        groups.push_back(std::move(g));
    }
    return groups;
}

std::vector<std::string> summarize_batch(SummarizationProvider& summarizer,
                                         const std::vector<std::string>& contexts,
                                         int max_in_flight) {
    std::vector<std::string> out(contexts.size());
    const std::size_t stride = static_cast<std::size_t>(std::max(max_in_flight, 1));
    if (stride <= 1 || contexts.size() <= 1) {
        for (std::size_t i = 0; i < contexts.size(); ++i) out[i] = summarizer.summarize(contexts[i]);
        return out;
    }
    for (std::size_t base = 0; base < contexts.size(); base += stride) {
        const std::size_t end = std::min(contexts.size(), base + stride);
        std::vector<std::future<std::string>> batch;
        batch.reserve(end - base);
        for (std::size_t i = base; i < end; ++i) {
            batch.push_back(std::async(std::launch::async, [&summarizer, &contexts, i] {
                return summarizer.summarize(contexts[i]);
            }));
        }
        std::exception_ptr first;
        for (std::size_t i = base; i < end; ++i) {
            try {
                out[i] = batch[i - base].get();
            } catch (...) {
                if (!first) first = std::current_exception();
            }
        }
        if (first) std::rethrow_exception(first);
    }
    return out;
}

Tree build_common(const std::vector<Document>& corpus, EmbeddingProvider& embedder,
                  SummarizationProvider& summarizer, const BuildConfig& config,
                  BuildReport* report, const std::string& grouping, int window) {
    if (config.chunk_budget < 1) throw ConfigError("chunk_budget must be positive");
    if (config.max_layers < 1) throw ConfigError("max_layers must be positive");
    if (config.min_top_nodes < 1) throw ConfigError("min_top_nodes must be positive");
    if (config.max_in_flight < 1) throw ConfigError("max_in_flight must be positive");
    if (grouping == "recency" && window < 1) throw ConfigError("recency window must be positive");
    if (corpus.empty()) throw InvalidInputError("corpus is empty");
    {
        std::set<std::string> ids;
        for (const Document& doc : corpus) {
            if (!doc.doc_id.empty() && !ids.insert(doc.doc_id).second) {
                throw InvalidInputError("duplicate doc id \"" + doc.doc_id + "\"");
            }
        }
    }

    const auto t0 = std::chrono::steady_clock::now();
    const UsageSnapshot usage0 = summarizer.usage().snapshot();
    BuildReport scratch;
    BuildReport& rep = report ? *report : scratch;
    rep = BuildReport{};

    Tree tree;
    tree.config = config;
    tree.grouping = grouping;
    tree.recency_window = grouping == "recency" ? window : 0;
    tree.providers = {embedder.kind(), embedder.dimension(), summarizer.kind(),
                      summarizer.max_summary_tokens()};
    tree.config_fingerprint =
        config_fingerprint(config, tree.providers, grouping, tree.recency_window);

    auto finalize = [&] {
        rep.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const UsageSnapshot now = summarizer.usage().snapshot();
        rep.summarizer_usage = {now.prompt_tokens - usage0.prompt_tokens,
                                now.completion_tokens - usage0.completion_tokens,
                                now.calls - usage0.calls};
    };

    try {
        std::vector<Chunk> chunks;
        for (const Document& doc : corpus) {
            std::vector<Chunk> part = chunk_text(doc.text, config.chunk_budget, doc.doc_id);
            chunks.insert(chunks.end(), std::make_move_iterator(part.begin()),
                          std::make_move_iterator(part.end()));
        }
        if (chunks.empty()) throw InvalidInputError("corpus produced no chunks");
        rep.chunk_count = static_cast<std::int64_t>(chunks.size());

        std::vector<std::string> leaf_texts;
        leaf_texts.reserve(chunks.size());
        for (const Chunk& c : chunks) leaf_texts.push_back(c.text);
        std::vector<Vector> leaf_embs = embedder.embed(leaf_texts);

        std::int64_t next_id = 0;
        std::vector<std::int64_t> current;
        current.reserve(chunks.size());
        std::set<std::string> doc_ids;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            Node n;
            n.id = next_id++;
            n.layer = 0;
            n.text = std::move(chunks[i].text);
            n.embedding = std::move(leaf_embs[i]);
            normalize_in_place(n.embedding);
            n.token_count = chunks[i].token_count;
            n.doc_id = chunks[i].doc_id;
            n.source_offset = static_cast<std::int64_t>(chunks[i].source_offset);
            current.push_back(n.id);
            doc_ids.insert(n.doc_id);
            tree.nodes.emplace(n.id, std::move(n));
        }
        tree.layers.push_back(current);
        tree.provenance.assign(doc_ids.begin(), doc_ids.end());

        // Backends that learn their dimension from the first response report
        // 0 before any call; pin the real dimension (and the fingerprint
        // derived from it) now that the leaf vectors exist.
        const int dim = static_cast<int>(tree.nodes.at(0).embedding.size());
        if (tree.providers.embedding_dim != dim) {
            tree.providers.embedding_dim = dim;
            tree.config_fingerprint =
                config_fingerprint(config, tree.providers, grouping, tree.recency_window);
        }

        for (;;) {
            if (static_cast<int>(current.size()) <= config.min_top_nodes) {
                rep.termination = "min_top_nodes";
                break;
            }
            if (static_cast<int>(tree.layers.size()) >= config.max_layers) {
                rep.termination = "max_layers";
                break;
            }
            const int next_layer = static_cast<int>(tree.layers.size());

            std::vector<std::int64_t> tokens;
            tokens.reserve(current.size());
            for (std::int64_t id : current) tokens.push_back(tree.nodes.at(id).token_count);

            std::vector<Cluster> clusters;
            if (grouping == "recency") {
                clusters = recency_windows(current, tokens, window);
            } else {
                std::vector<Vector> embs;
                embs.reserve(current.size());
                for (std::int64_t id : current) embs.push_back(tree.nodes.at(id).embedding);
                ClusterOutcome outcome = hierarchical_cluster(
                    current, embs, tokens,
                    derive_seed(config.seed, "layer:" + std::to_string(next_layer)),
                    config.clustering);
                for (std::string& w : outcome.warnings) {
                    rep.warnings.push_back("layer " + std::to_string(next_layer) + ": " +
                                           std::move(w));
                }
                clusters = std::move(outcome.clusters);
            }
            if (clusters.size() == 1) {
                rep.termination = "single_cluster";
                break;
            }

            std::vector<std::string> contexts;
            contexts.reserve(clusters.size());
            for (const Cluster& c : clusters) {
                std::string ctx;
                for (std::size_t m = 0; m < c.member_ids.size(); ++m) {
                    if (m > 0) ctx += kContextSeparator;
                    ctx += tree.nodes.at(c.member_ids[m]).text;
                }
                if (c.total_tokens > config.clustering.summarizer_token_threshold) {
                    rep.warnings.push_back(
                        "layer " + std::to_string(next_layer) + ": summarizing an oversize " +
                        std::to_string(c.total_tokens) + "-token context");
                }
                contexts.push_back(std::move(ctx));
            }

            std::vector<std::string> summaries =
                summarize_batch(summarizer, contexts, config.max_in_flight);
            std::vector<Vector> summary_embs = embedder.embed(summaries);

            std::vector<std::int64_t> next_ids;
            next_ids.reserve(clusters.size());
            for (std::size_t i = 0; i < clusters.size(); ++i) {
                Node n;
                n.id = next_id++;
                n.layer = next_layer;
                n.text = std::move(summaries[i]);
                n.embedding = std::move(summary_embs[i]);
                normalize_in_place(n.embedding);
                n.children = std::move(clusters[i].member_ids);
                n.token_count = count_tokens(n.text);
                next_ids.push_back(n.id);
                tree.nodes.emplace(n.id, std::move(n));
            }
            tree.layers.push_back(next_ids);
            current = std::move(next_ids);
        }
    } catch (...) {
        rep.termination = "aborted";
        finalize();
        throw;
    }

    finalize();
    validate_tree(tree);
    return tree;
}

}  // namespace

const Node& Tree::node(std::int64_t id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) {
        throw CorruptIndexError("node " + std::to_string(id) + " is missing from the index");
    }
    return it->second;
}

std::string config_fingerprint(const BuildConfig& config, const ProviderInfo& providers,
                               std::string_view grouping, int recency_window) {
    std::ostringstream canon;
    canon << "v1"
          << "|chunk_budget=" << config.chunk_budget << "|max_layers=" << config.max_layers
          << "|min_top_nodes=" << config.min_top_nodes << "|seed=" << config.seed
          << "|membership_threshold=" << fmt_double(config.clustering.membership_threshold)
          << "|k_max=" << config.clustering.k_max
          << "|n_neighbors_local=" << config.clustering.n_neighbors_local
          << "|target_dim=" << config.clustering.target_dim
          << "|max_recluster_depth=" << config.clustering.max_recluster_depth
          << "|summarizer_token_threshold=" << config.clustering.summarizer_token_threshold
          << "|em_max_iters=" << config.clustering.em_max_iters
          << "|em_tol=" << fmt_double(config.clustering.em_tol)
          << "|covariance_reg=" << fmt_double(config.clustering.covariance_reg)
          << "|n_init=" << config.clustering.n_init
          << "|umap_epochs=" << config.clustering.umap_epochs
          << "|embedder=" << providers.embedder_kind << "|embedding_dim=" << providers.embedding_dim
          << "|summarizer=" << providers.summarizer_kind
          << "|max_summary_tokens=" << providers.max_summary_tokens << "|grouping=" << grouping
          << "|recency_window=" << recency_window;
    return hex64(fnv1a64(canon.str()));
}

Tree build_tree(const std::vector<Document>& corpus, EmbeddingProvider& embedder,
                SummarizationProvider& summarizer, const BuildConfig& config,
                BuildReport* report) {
    return build_common(corpus, embedder, summarizer, config, report, "gmm", 0);
}

Tree build_recency_tree(const std::vector<Document>& corpus, EmbeddingProvider& embedder,
                        SummarizationProvider& summarizer, int window, const BuildConfig& config,
                        BuildReport* report) {
    return build_common(corpus, embedder, summarizer, config, report, "recency", window);
}

TreeStats tree_stats(const Tree& tree) {
    TreeStats stats;
    for (const auto& layer : tree.layers) {
        stats.layer_node_counts.push_back(static_cast<std::int64_t>(layer.size()));
    }

    std::int64_t edges = 0;
    double summary_sum = 0.0, child_sum = 0.0, ratio_sum = 0.0;
    for (const auto& [id, n] : tree.nodes) {
        if (n.layer == 0) continue;
        ++stats.parent_count;
        summary_sum += static_cast<double>(n.token_count);
        std::int64_t child_total = 0;
        for (std::int64_t c : n.children) child_total += tree.node(c).token_count;
        edges += static_cast<std::int64_t>(n.children.size());
        child_sum += static_cast<double>(child_total);
        if (child_total > 0) {
            ratio_sum += static_cast<double>(n.token_count) / static_cast<double>(child_total);
        }
    }

    if (stats.parent_count == 0) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        stats.avg_summary_tokens = nan;
        stats.avg_child_tokens = nan;
        stats.avg_children_per_parent = nan;
        stats.avg_compression_ratio = nan;
        return stats;
    }
    stats.avg_summary_tokens = summary_sum / static_cast<double>(stats.parent_count);
    stats.avg_children_per_parent =
        static_cast<double>(edges) / static_cast<double>(stats.parent_count);
    stats.avg_child_tokens = child_sum / static_cast<double>(edges);
    stats.avg_compression_ratio = ratio_sum / static_cast<double>(stats.parent_count);
    return stats;
}

void validate_tree(const Tree& tree) {
    auto fail = [](const std::string& msg) { throw CorruptIndexError(msg); };

    if (tree.layers.empty()) fail("tree has no layers");
    if (tree.nodes.empty()) fail("tree has no nodes");
    if (tree.grouping != "gmm" && tree.grouping != "recency") {
        fail("unknown grouping \"" + tree.grouping + "\"");
    }
    if ((tree.grouping == "recency") != (tree.recency_window > 0)) {
        fail("recency_window is inconsistent with the grouping");
    }

    for (const auto& [id, n] : tree.nodes) {
        if (n.id != id) fail("node map key does not match node id");
    }

    std::set<std::int64_t> placed;
    for (std::size_t layer = 0; layer < tree.layers.size(); ++layer) {
        const auto& ids = tree.layers[layer];
        if (ids.empty()) fail("layer " + std::to_string(layer) + " is empty");
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i > 0 && ids[i] <= ids[i - 1]) {
                fail("layer " + std::to_string(layer) + " is not sorted by id");
            }
            auto it = tree.nodes.find(ids[i]);
            if (it == tree.nodes.end()) {
                fail("layer lists node " + std::to_string(ids[i]) + " which does not exist");
            }
            if (it->second.layer != static_cast<int>(layer)) {
                fail("node " + std::to_string(ids[i]) + " is listed on the wrong layer");
            }
            if (!placed.insert(ids[i]).second) {
                fail("node " + std::to_string(ids[i]) + " appears in more than one layer");
            }
        }
    }
    if (placed.size() != tree.nodes.size()) fail("layer lists do not cover the node map");

    const std::size_t dim = tree.nodes.begin()->second.embedding.size();
    if (dim == 0) fail("empty embeddings");
    for (const auto& [id, n] : tree.nodes) {
        if (n.embedding.size() != dim) fail("embedding dimensions differ across nodes");
        if (n.text.empty()) fail("node " + std::to_string(id) + " has empty text");
        if (n.token_count != count_tokens(n.text)) {
            fail("node " + std::to_string(id) + " token_count does not match its text");
        }
        if (n.layer == 0) {
            if (!n.children.empty()) fail("leaf " + std::to_string(id) + " has children");
            if (n.source_offset < 0) fail("leaf " + std::to_string(id) + " lacks a source offset");
        } else {
            if (n.children.empty()) fail("node " + std::to_string(id) + " has no children");
            if (!n.doc_id.empty() || n.source_offset != -1) {
                fail("non-leaf " + std::to_string(id) + " carries leaf provenance");
            }
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i > 0 && n.children[i] <= n.children[i - 1]) {
                    fail("children of node " + std::to_string(id) + " are not sorted");
                }
                auto it = tree.nodes.find(n.children[i]);
                if (it == tree.nodes.end()) {
                    fail("node " + std::to_string(id) + " references missing child " +
                         std::to_string(n.children[i]));
                }
                if (it->second.layer >= n.layer) {
                    fail("node " + std::to_string(id) + " has a child on a layer above it");
                }
            }
        }
    }

    std::set<std::int64_t> reachable;
    std::vector<std::int64_t> stack(tree.layers.back().begin(), tree.layers.back().end());
    while (!stack.empty()) {
        const std::int64_t id = stack.back();
        stack.pop_back();
        if (!reachable.insert(id).second) continue;
        for (std::int64_t c : tree.nodes.at(id).children) stack.push_back(c);
    }
    if (reachable.size() != tree.nodes.size()) {
        fail("some nodes are unreachable from the top layer");
    }

    std::set<std::string> doc_ids;
    for (std::int64_t id : tree.layers[0]) doc_ids.insert(tree.nodes.at(id).doc_id);
    const std::vector<std::string> expected(doc_ids.begin(), doc_ids.end());
    if (tree.provenance != expected) fail("provenance does not match the leaf doc ids");

    if (config_fingerprint(tree.config, tree.providers, tree.grouping, tree.recency_window) !=
        tree.config_fingerprint) {
        fail("config fingerprint does not match the stored config");
    }
}

}  // namespace raptor
