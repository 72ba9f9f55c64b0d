#include "raptor/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "raptor/errors.hpp"
#include "raptor/rng.hpp"

namespace raptor {
namespace {

struct Workspace {
    const std::vector<std::int64_t>& ids;
    const std::vector<Vector>& embeddings;
    const std::vector<std::int64_t>& tokens;
    std::unordered_map<std::int64_t, std::size_t> index;
    const ClusteringConfig& cfg;
    std::vector<std::string>& warnings;
    std::uint64_t seed = 0;
    int recluster_counter = 0;
};

Eigen::MatrixXd to_matrix(const std::vector<Vector>& vectors) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(vectors.size()),
                      static_cast<Eigen::Index>(vectors[0].size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index d = 0; d < m.cols(); ++d) m(i, d) = vectors[i][d];
    }
    return m;
}

std::vector<Cluster> cluster_once(Workspace& ws, const std::vector<std::int64_t>& subset,
                                  std::uint64_t seed) {
    const auto n = static_cast<int>(subset.size());
    std::vector<Vector> embs;
    std::vector<std::int64_t> toks;
    embs.reserve(n);
    toks.reserve(n);
    for (std::int64_t id : subset) {
        const std::size_t i = ws.index.at(id);
        embs.push_back(ws.embeddings[i]);
        toks.push_back(ws.tokens[i]);
    }

    if (n == 1) {
        Cluster c;
        c.member_ids = subset;
        c.responsibilities = {1.0};
        c.total_tokens = toks[0];
        return {c};
    }

    // Too few points for a meaningful reduction: mixture on the raw vectors,
    // any K up to N allowed. BIC does the merging at these sizes.
    if (n < ws.cfg.min_points_for_reduction()) {
        ReducedPoints raw;
        raw.points = to_matrix(embs);
        raw.source_ids = subset;
        raw.seed = seed;
        auto [k, model] = select_k(raw, n, derive_seed(seed, "gmm:raw"), ws.cfg);
        (void)k;
        return soft_assign(model, raw, ws.cfg.membership_threshold, toks);
    }

    const int target_dim = std::min(ws.cfg.target_dim, n - 2);
    ReducedPoints reduced = reduce_dim(embs, global_n_neighbors(n), target_dim,
                                       derive_seed(seed, "umap:global"), ws.cfg.umap_epochs);
    reduced.source_ids = subset;
    auto [gk, gmodel] = select_k(reduced, ws.cfg.k_max, derive_seed(seed, "gmm:global"), ws.cfg);
    (void)gk;
    std::vector<Cluster> global_clusters =
        soft_assign(gmodel, reduced, ws.cfg.membership_threshold, toks);

    std::vector<Cluster> out;
    for (std::size_t g = 0; g < global_clusters.size(); ++g) {
        Cluster& gc = global_clusters[g];
        if (static_cast<int>(gc.member_ids.size()) <= ws.cfg.min_local_size()) {
            out.push_back(std::move(gc));
            continue;
        }
        std::vector<Vector> member_embs;
        std::vector<std::int64_t> member_toks;
        member_embs.reserve(gc.member_ids.size());
        member_toks.reserve(gc.member_ids.size());
        for (std::int64_t id : gc.member_ids) {
            const std::size_t i = ws.index.at(id);
            member_embs.push_back(ws.embeddings[i]);
            member_toks.push_back(ws.tokens[i]);
        }
        const int local_dim = std::min(ws.cfg.target_dim, static_cast<int>(gc.member_ids.size()) - 2);
        ReducedPoints local = reduce_dim(member_embs, ws.cfg.n_neighbors_local, local_dim,
                                         derive_seed(seed, "umap:local:" + std::to_string(g)),
                                         ws.cfg.umap_epochs);
        local.source_ids = gc.member_ids;
        auto [lk, lmodel] = select_k(local, ws.cfg.k_max,
                                     derive_seed(seed, "gmm:local:" + std::to_string(g)), ws.cfg);
        (void)lk;
        std::vector<Cluster> locals =
            soft_assign(lmodel, local, ws.cfg.membership_threshold, member_toks);
        for (Cluster& lc : locals) out.push_back(std::move(lc));
    }
    return out;
}

// Splits an unsplittable oversize cluster in two by similarity to its
// centroid, repeatedly, until every piece fits the summarizer budget.
void halve_into(Workspace& ws, Cluster cluster, std::vector<Cluster>& out) {
    const auto n = cluster.member_ids.size();
    if (cluster.total_tokens <= ws.cfg.summarizer_token_threshold || n <= 1) {
        out.push_back(std::move(cluster));
        return;
    }
    ws.warnings.push_back("splitting a " + std::to_string(cluster.total_tokens) +
                          "-token cluster of " + std::to_string(n) +
                          " nodes by centroid similarity (token budget still exceeded)");

    const std::size_t dim = ws.embeddings[0].size();
    Vector centroid(dim, 0.0);
    for (std::int64_t id : cluster.member_ids) {
        const Vector& e = ws.embeddings[ws.index.at(id)];
        for (std::size_t d = 0; d < dim; ++d) centroid[d] += e[d];
    }
    double norm = 0.0;
    for (double v : centroid) norm += v * v;
    norm = std::sqrt(norm);

    struct Entry {
        std::int64_t id;
        double resp;
        double sim;
    };
    std::vector<Entry> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t id = cluster.member_ids[i];
        const double sim =
            norm > 1e-12 ? cosine_similarity(ws.embeddings[ws.index.at(id)], centroid) : 0.0;
        entries.push_back({id, cluster.responsibilities[i], sim});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.id < b.id;
    });

    const std::size_t cut = (n + 1) / 2;
    for (int half = 0; half < 2; ++half) {
        const std::size_t lo = half == 0 ? 0 : cut;
        const std::size_t hi = half == 0 ? cut : n;
        std::vector<Entry> part(entries.begin() + static_cast<std::ptrdiff_t>(lo),
                                entries.begin() + static_cast<std::ptrdiff_t>(hi));
        std::sort(part.begin(), part.end(),
                  [](const Entry& a, const Entry& b) { return a.id < b.id; });
        Cluster piece;
        for (const Entry& e : part) {
            piece.member_ids.push_back(e.id);
            piece.responsibilities.push_back(e.resp);
            piece.total_tokens += ws.tokens[ws.index.at(e.id)];
        }
        halve_into(ws, std::move(piece), out);
    }
}

void expand_into(Workspace& ws, Cluster cluster, int depth, std::vector<Cluster>& out) {
    if (cluster.total_tokens <= ws.cfg.summarizer_token_threshold ||
        cluster.member_ids.size() <= 1) {
        out.push_back(std::move(cluster));
        return;
    }
    if (depth >= ws.cfg.max_recluster_depth) {
        ws.warnings.push_back("re-cluster depth cap (" +
                              std::to_string(ws.cfg.max_recluster_depth) + ") reached");
        halve_into(ws, std::move(cluster), out);
        return;
    }
    const std::uint64_t sub_seed =
        derive_seed(ws.seed, "recluster:" + std::to_string(ws.recluster_counter++));
    std::vector<Cluster> subs = cluster_once(ws, cluster.member_ids, sub_seed);
    if (subs.size() == 1 && subs[0].member_ids.size() == cluster.member_ids.size()) {
        ws.warnings.push_back("re-clustering left a " + std::to_string(cluster.total_tokens) +
                              "-token cluster whole");
        halve_into(ws, std::move(cluster), out);
        return;
    }
    for (Cluster& s : subs) expand_into(ws, std::move(s), depth + 1, out);
}

}  // namespace

ClusterOutcome hierarchical_cluster(const std::vector<std::int64_t>& node_ids,
                                    const std::vector<Vector>& embeddings,
                                    const std::vector<std::int64_t>& token_counts,
                                    std::uint64_t seed, const ClusteringConfig& cfg) {
    if (node_ids.empty()) throw InvalidInputError("nothing to cluster");
    if (embeddings.size() != node_ids.size() || token_counts.size() != node_ids.size()) {
        throw InvalidInputError("node_ids, embeddings, and token_counts must align");
    }
    if (cfg.membership_threshold < 0.0 || cfg.membership_threshold > 1.0) {
        throw ConfigError("membership threshold must lie in [0, 1]");
    }
    if (cfg.k_max < 1) throw ConfigError("k_max must be positive");
    if (cfg.target_dim < 1) throw ConfigError("target_dim must be positive");
    if (cfg.max_recluster_depth < 1) throw ConfigError("max_recluster_depth must be positive");
    const std::size_t dim = embeddings[0].size();
    if (dim == 0) throw InvalidInputError("embeddings must be non-empty vectors");
    for (const Vector& e : embeddings) {
        if (e.size() != dim) throw InvalidInputError("embedding dimensions differ across nodes");
    }
    for (std::int64_t t : token_counts) {
        if (t < 0) throw InvalidInputError("token counts must be non-negative");
    }

    ClusterOutcome outcome;
    Workspace work{node_ids, embeddings, token_counts, {}, cfg, outcome.warnings, seed};
    work.index.reserve(node_ids.size());
    for (std::size_t i = 0; i < node_ids.size(); ++i) {
        if (!work.index.emplace(node_ids[i], i).second) {
            throw InvalidInputError("duplicate node id " + std::to_string(node_ids[i]));
        }
    }

    std::vector<Cluster> base = cluster_once(work, node_ids, derive_seed(seed, "base"));
    for (Cluster& c : base) expand_into(work, std::move(c), 1, outcome.clusters);
    return outcome;
}

}  // namespace raptor
