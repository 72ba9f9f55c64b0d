#include "raptor/retrieval.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "raptor/errors.hpp"
#include "raptor/summarization.hpp"

namespace raptor {
namespace {

struct Scored {
    std::int64_t id;
    double score;
};

bool better(const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

std::vector<Scored> score_ids(const Tree& tree, const Vector& query,
                              const std::vector<std::int64_t>& ids) {
    std::vector<Scored> out;
    out.reserve(ids.size());
    for (std::int64_t id : ids) {
        out.push_back({id, cosine_similarity(query, tree.node(id).embedding)});
    }
    return out;
}

void require_nonempty(const Tree& tree) {
    if (tree.layers.empty() || tree.nodes.empty()) {
        throw InvalidInputError("retrieval over an empty tree");
    }
}

void finish(const Tree& tree, RetrievalResult& result) {
    for (std::size_t i = 0; i < result.selected.size(); ++i) {
        const Node& n = tree.node(result.selected[i]);
        result.total_tokens += n.token_count;
        result.layer_tally[n.layer] += 1;
    }

    const std::set<std::int64_t> chosen(result.selected.begin(), result.selected.end());
    for (std::int64_t ancestor : result.selected) {
        std::vector<std::int64_t> stack(tree.node(ancestor).children);
        std::set<std::int64_t> seen;
        while (!stack.empty()) {
            const std::int64_t id = stack.back();
            stack.pop_back();
            if (!seen.insert(id).second) continue;
            if (chosen.count(id)) result.ancestor_overlap.push_back({id, ancestor});
            const auto& kids = tree.node(id).children;
            stack.insert(stack.end(), kids.begin(), kids.end());
        }
    }
    std::sort(result.ancestor_overlap.begin(), result.ancestor_overlap.end());
}

// Ranked prefix under a token budget: the shared core of the collapsed,
// layer-restricted, and flat modes.
RetrievalResult ranked_prefix(const Tree& tree, const Vector& query,
                              const std::vector<std::int64_t>& pool, std::int64_t max_tokens,
                              RetrievalMode mode) {
    if (max_tokens < 0) throw ConfigError("max_tokens must be non-negative");

    std::vector<Scored> ranked = score_ids(tree, query, pool);
    std::sort(ranked.begin(), ranked.end(), better);

    RetrievalResult result;
    result.mode = mode;
    std::int64_t used = 0;
    for (const Scored& s : ranked) {
        const std::int64_t tokens = tree.node(s.id).token_count;
        if (used + tokens > max_tokens) break;  // strict prefix stop, no skip-and-continue
        used += tokens;
        result.selected.push_back(s.id);
        result.scores.push_back(s.score);
    }
    finish(tree, result);
    return result;
}

}  // namespace

std::string to_string(RetrievalMode mode) {
    switch (mode) {
        case RetrievalMode::traversal: return "traversal";
        case RetrievalMode::collapsed: return "collapsed";
        case RetrievalMode::layer_restricted: return "layer_restricted";
        case RetrievalMode::flat: return "flat";
    }
    throw ConfigError("unknown retrieval mode");
}

RetrievalResult tree_traversal(const Tree& tree, const Vector& query, int k, int depth,
                               int start_layer) {
    require_nonempty(tree);
    if (k < 1) throw ConfigError("top_k must be positive");
    const int top = tree.top_layer();
    if (start_layer == -1) start_layer = top;
    if (start_layer < 0 || start_layer > top) {
        throw ConfigError("start_layer " + std::to_string(start_layer) + " is outside the tree");
    }
    if (depth == -1) depth = start_layer + 1;
    if (depth < 1) throw ConfigError("depth must be positive");
    if (depth > static_cast<int>(tree.layers.size())) {
        throw ConfigError("depth " + std::to_string(depth) + " exceeds the tree's " +
                          std::to_string(tree.layers.size()) + " layers");
    }

    RetrievalResult result;
    result.mode = RetrievalMode::traversal;
    std::set<std::int64_t> taken;
    std::vector<std::int64_t> candidates = tree.layers[static_cast<std::size_t>(start_layer)];
    for (int stage = 0; stage < depth && !candidates.empty(); ++stage) {
        std::vector<Scored> ranked;
        for (Scored& s : score_ids(tree, query, candidates)) {
            if (!taken.count(s.id)) ranked.push_back(s);
        }
        if (ranked.empty()) break;
        std::sort(ranked.begin(), ranked.end(), better);
        if (static_cast<int>(ranked.size()) > k) ranked.resize(static_cast<std::size_t>(k));

        result.stage_offsets.push_back(result.selected.size());
        std::set<std::int64_t> next;
        for (const Scored& s : ranked) {
            result.selected.push_back(s.id);
            result.scores.push_back(s.score);
            taken.insert(s.id);
            const auto& kids = tree.node(s.id).children;
            next.insert(kids.begin(), kids.end());
        }
        candidates.assign(next.begin(), next.end());
    }
    finish(tree, result);
    return result;
}

RetrievalResult collapsed_tree(const Tree& tree, const Vector& query, std::int64_t max_tokens) {
    require_nonempty(tree);
    std::vector<std::int64_t> pool;
    pool.reserve(tree.nodes.size());
    for (const auto& [id, n] : tree.nodes) pool.push_back(id);
    return ranked_prefix(tree, query, pool, max_tokens, RetrievalMode::collapsed);
}

RetrievalResult layer_restricted_retrieve(const Tree& tree, const Vector& query,
                                          const std::vector<int>& allowed_layers,
                                          std::int64_t max_tokens) {
    require_nonempty(tree);
    if (allowed_layers.empty()) throw ConfigError("allowed_layers is empty");
    std::set<int> allowed;
    for (int layer : allowed_layers) {
        if (layer < 0 || layer > tree.top_layer()) {
            throw ConfigError("layer " + std::to_string(layer) + " does not exist in the tree");
        }
        allowed.insert(layer);
    }
    std::vector<std::int64_t> pool;
    for (int layer : allowed) {
        const auto& ids = tree.layers[static_cast<std::size_t>(layer)];
        pool.insert(pool.end(), ids.begin(), ids.end());
    }
    return ranked_prefix(tree, query, pool, max_tokens, RetrievalMode::layer_restricted);
}

RetrievalResult flat_retrieve(const Tree& tree, const Vector& query, std::int64_t max_tokens) {
    require_nonempty(tree);
    return ranked_prefix(tree, query, tree.layers[0], max_tokens, RetrievalMode::flat);
}

RetrievalResult retrieve(const Tree& tree, const Vector& query, const QueryConfig& config) {
    switch (config.mode) {
        case RetrievalMode::traversal:
            return tree_traversal(tree, query, config.top_k, config.depth, config.start_layer);
        case RetrievalMode::collapsed:
            return collapsed_tree(tree, query, config.max_tokens);
        case RetrievalMode::layer_restricted:
            return layer_restricted_retrieve(tree, query, config.allowed_layers,
                                             config.max_tokens);
        case RetrievalMode::flat:
            return flat_retrieve(tree, query, config.max_tokens);
    }
    throw ConfigError("unknown retrieval mode");
}

std::map<int, double> layer_histogram(const std::vector<RetrievalResult>& results) {
    if (results.empty()) throw InvalidInputError("layer_histogram needs at least one result");
    std::map<int, std::int64_t> counts;
    std::int64_t total = 0;
    for (const RetrievalResult& r : results) {
        for (const auto& [layer, count] : r.layer_tally) {
            counts[layer] += count;
            total += count;
        }
    }
    std::map<int, double> percentages;
    if (total == 0) return percentages;
    for (const auto& [layer, count] : counts) {
        percentages[layer] = 100.0 * static_cast<double>(count) / static_cast<double>(total);
    }
    return percentages;
}

std::string assemble_context(const Tree& tree, const RetrievalResult& result,
                             bool document_order) {
    std::vector<std::int64_t> order = result.selected;
    if (document_order) {
        std::vector<std::int64_t> summaries, leaves;
        for (std::int64_t id : order) {
            (tree.node(id).layer == 0 ? leaves : summaries).push_back(id);
        }
        std::sort(leaves.begin(), leaves.end(), [&](std::int64_t a, std::int64_t b) {
            const Node& na = tree.node(a);
            const Node& nb = tree.node(b);
            if (na.doc_id != nb.doc_id) return na.doc_id < nb.doc_id;
            if (na.source_offset != nb.source_offset) return na.source_offset < nb.source_offset;
            return a < b;
        });
        order = std::move(summaries);
        order.insert(order.end(), leaves.begin(), leaves.end());
    }
    std::string context;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0) context += kContextSeparator;
        context += tree.node(order[i]).text;
    }
    return context;
}

}  // namespace raptor
