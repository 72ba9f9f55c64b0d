#include "raptor/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "raptor/errors.hpp"
#include "raptor/rng.hpp"

namespace raptor {

int global_n_neighbors(std::int64_t n_points) {
    if (n_points < 2) return 2;
    auto k = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_points - 1))));
    return std::clamp(k, 2, 50);
}

namespace {

// Curve parameters for the low-dimensional similarity 1 / (1 + a * d^(2b)),
// fit for spread 1.0 and min_dist 0.1.
constexpr double kCurveA = 1.5769434603113077;
constexpr double kCurveB = 0.8950608779109733;
constexpr int kNegativeSampleRate = 5;
constexpr double kGradClip = 4.0;
constexpr int kSigmaIters = 64;

struct KnnGraph {
    std::vector<std::vector<int>> indices;
    std::vector<std::vector<double>> distances;  // sorted ascending per row
};

KnnGraph exact_knn(const Eigen::MatrixXd& data, int k) {
    const auto n = static_cast<int>(data.rows());
    KnnGraph graph;
    graph.indices.resize(n);
    graph.distances.resize(n);
    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < n; ++i) {
        order.clear();
        order.reserve(n - 1);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = (data.row(i) - data.row(j)).norm();
            order.emplace_back(d, j);
        }
        std::sort(order.begin(), order.end());
        graph.indices[i].reserve(k);
        graph.distances[i].reserve(k);
        for (int j = 0; j < k; ++j) {
            graph.distances[i].push_back(order[j].first);
            graph.indices[i].push_back(order[j].second);
        }
    }
    return graph;
}

// Per-point kernel widths: rho is the nearest nonzero neighbor distance and
// sigma solves sum_j exp(-max(0, d_ij - rho) / sigma) = log2(k) by bisection.
void smooth_knn_dist(const KnnGraph& graph, std::vector<double>& rho, std::vector<double>& sigma) {
    const auto n = graph.indices.size();
    const int k = static_cast<int>(graph.indices.empty() ? 0 : graph.indices[0].size());
    const double target = std::log2(static_cast<double>(k));
    rho.assign(n, 0.0);
    sigma.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& dist = graph.distances[i];
        for (double d : dist) {
            if (d > 0.0) {
                rho[i] = d;
                break;
            }
        }
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        double mid = 1.0;
        for (int iter = 0; iter < kSigmaIters; ++iter) {
            double psum = 0.0;
            for (double d : dist) {
                const double gap = d - rho[i];
                psum += gap > 0.0 ? std::exp(-gap / mid) : 1.0;
            }
            if (std::abs(psum - target) < 1e-5) break;
            if (psum > target) {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
            }
        }
        double mean_dist = 0.0;
        for (double d : dist) mean_dist += d;
        if (!dist.empty()) mean_dist /= static_cast<double>(dist.size());
        sigma[i] = std::max(mid, 1e-3 * mean_dist);
    }
}

struct Edge {
    int u = 0;
    int v = 0;
    double weight = 0.0;
};

// Directed membership strengths symmetrized by fuzzy union:
// w = w_uv + w_vu - w_uv * w_vu.
std::vector<Edge> fuzzy_edges(const KnnGraph& graph, const std::vector<double>& rho,
                              const std::vector<double>& sigma) {
    std::map<std::pair<int, int>, std::pair<double, double>> directed;
    const auto n = static_cast<int>(graph.indices.size());
    for (int i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < graph.indices[i].size(); ++j) {
            const int nb = graph.indices[i][j];
            const double gap = graph.distances[i][j] - rho[i];
            const double w = gap > 0.0 ? std::exp(-gap / sigma[i]) : 1.0;
            if (i < nb) {
                directed[{i, nb}].first = w;
            } else {
                directed[{nb, i}].second = w;
            }
        }
    }
    std::vector<Edge> edges;
    edges.reserve(directed.size());
    for (const auto& [key, w] : directed) {
        const double sym = w.first + w.second - w.first * w.second;
        if (sym > 0.0) edges.push_back({key.first, key.second, sym});
    }
    return edges;
}

inline double clip_grad(double g) { return std::clamp(g, -kGradClip, kGradClip); }

}  // namespace

ReducedPoints reduce_dim(const std::vector<Vector>& vectors, int n_neighbors, int target_dim,
                         std::uint64_t seed, int n_epochs) {
    const auto n = static_cast<int>(vectors.size());
    if (n < 3) throw InvalidInputError("reduce_dim needs at least 3 points, got " + std::to_string(n));
    if (target_dim < 1) throw ConfigError("target_dim must be positive");
    if (n_epochs < 1) throw ConfigError("n_epochs must be positive");
    const auto dim = vectors[0].size();
    for (const auto& v : vectors) {
        if (v.size() != dim) throw InvalidInputError("embedding dimensions differ across points");
    }
    n_neighbors = std::clamp(n_neighbors, 2, n - 1);

    Eigen::MatrixXd data(n, static_cast<Eigen::Index>(dim));
    for (int i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dim; ++d) data(i, static_cast<Eigen::Index>(d)) = vectors[i][d];
    }

    const KnnGraph graph = exact_knn(data, n_neighbors);
    std::vector<double> rho;
    std::vector<double> sigma;
    smooth_knn_dist(graph, rho, sigma);
    std::vector<Edge> edges = fuzzy_edges(graph, rho, sigma);

    double max_w = 0.0;
    for (const auto& e : edges) max_w = std::max(max_w, e.weight);
    // Edges too weak to be sampled even once contribute nothing.
    const double cutoff = max_w / static_cast<double>(n_epochs);
    edges.erase(std::remove_if(edges.begin(), edges.end(),
                               [&](const Edge& e) { return e.weight < cutoff; }),
                edges.end());

    std::vector<double> epochs_per_sample(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) epochs_per_sample[e] = max_w / edges[e].weight;
    std::vector<double> next_sample(epochs_per_sample);
    std::vector<double> eps_negative(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        eps_negative[e] = epochs_per_sample[e] / kNegativeSampleRate;
    }
    std::vector<double> next_negative(eps_negative);

    SplitMix64 init_rng(derive_seed(seed, "umap:init"));
    Eigen::MatrixXd layout(n, target_dim);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < target_dim; ++d) layout(i, d) = init_rng.next_double() * 20.0 - 10.0;
    }

    SplitMix64 sgd_rng(derive_seed(seed, "umap:sgd"));
    for (int epoch = 1; epoch <= n_epochs; ++epoch) {
        const double alpha = 1.0 - static_cast<double>(epoch - 1) / static_cast<double>(n_epochs);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (next_sample[e] > static_cast<double>(epoch)) continue;
            const int u = edges[e].u;
            const int v = edges[e].v;
            const double d2 = (layout.row(u) - layout.row(v)).squaredNorm();
            if (d2 > 0.0) {
                const double pw = std::pow(d2, kCurveB - 1.0);
                const double coeff = (-2.0 * kCurveA * kCurveB * pw) / (kCurveA * pw * d2 + 1.0);
                for (int d = 0; d < target_dim; ++d) {
                    const double g = clip_grad(coeff * (layout(u, d) - layout(v, d)));
                    layout(u, d) += alpha * g;
                    layout(v, d) -= alpha * g;
                }
            }
            next_sample[e] += epochs_per_sample[e];

            const int n_neg = static_cast<int>((static_cast<double>(epoch) - next_negative[e]) /
                                               eps_negative[e]);
            for (int p = 0; p < n_neg; ++p) {
                const int other = static_cast<int>(sgd_rng.next_below(static_cast<std::uint64_t>(n)));
                if (other == u) continue;
                const double r2 = (layout.row(u) - layout.row(other)).squaredNorm();
                if (r2 > 0.0) {
                    const double pw = std::pow(r2, kCurveB);
                    const double coeff = (2.0 * kCurveB) / ((0.001 + r2) * (kCurveA * pw + 1.0));
                    for (int d = 0; d < target_dim; ++d) {
                        const double g = clip_grad(coeff * (layout(u, d) - layout(other, d)));
                        layout(u, d) += alpha * g;
                    }
                } else if (other != v) {
                    for (int d = 0; d < target_dim; ++d) layout(u, d) += alpha * kGradClip;
                }
            }
            next_negative[e] += static_cast<double>(n_neg) * eps_negative[e];
        }
    }

    ReducedPoints out;
    out.points = std::move(layout);
    out.source_ids.resize(n);
    for (int i = 0; i < n; ++i) out.source_ids[i] = i;
    out.n_neighbors = n_neighbors;
    out.seed = seed;
    return out;
}

}  // namespace raptor
