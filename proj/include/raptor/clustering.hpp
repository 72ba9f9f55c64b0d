#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "raptor/embedding.hpp"

namespace raptor {

// Rows of `points` align with `source_ids`.
struct ReducedPoints {
    Eigen::MatrixXd points;  // N x d_r
    std::vector<std::int64_t> source_ids;
    int n_neighbors = 0;
    std::uint64_t seed = 0;

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }
};

// Gaussian mixture with full covariances, fit in reduced space.
struct GmmModel {
    int num_components = 0;
    Eigen::MatrixXd means;                     // K x d
    std::vector<Eigen::MatrixXd> covariances;  // K matrices, d x d, SPD after regularization
    Eigen::VectorXd weights;                   // K, sums to 1
    double log_likelihood = 0.0;               // maximized value
    std::vector<double> log_likelihood_history;  // one entry per EM iteration
};

// A soft cluster: nodes may appear in several clusters.
struct Cluster {
    std::vector<std::int64_t> member_ids;
    std::vector<double> responsibilities;  // aligned with member_ids, in [0, 1]
    std::int64_t total_tokens = 0;
};

struct ClusteringConfig {
    double membership_threshold = 0.1;
    int k_max = 50;
    int n_neighbors_local = 10;
    // Cap on the reduced dimension; the effective value is min(target_dim, N - 2).
    int target_dim = 10;
    int max_recluster_depth = 5;
    std::int64_t summarizer_token_threshold = 3500;
    int em_max_iters = 100;
    double em_tol = 1e-4;  // per-point log-likelihood gain that counts as converged
    double covariance_reg = 1e-6;
    // Independent EM restarts per candidate K in select_k; best likelihood wins.
    int n_init = 1;
    int umap_epochs = 500;

    // Clusters at most this large skip the local pass.
    int min_local_size() const { return n_neighbors_local + 1; }
    // Below this many points, reduction is skipped and the GMM runs on the
    // raw vectors.
    int min_points_for_reduction() const { return target_dim + 2; }
};

// Neighborhood size for the global pass: floor(sqrt(N - 1)) clamped to [2, 50].
int global_n_neighbors(std::int64_t n_points);

// UMAP-style reduction: exact k-NN graph, fuzzy simplicial set with
// symmetrized membership strengths, then seeded SGD on the cross-entropy
// layout objective. Deterministic given the seed.
ReducedPoints reduce_dim(const std::vector<Vector>& vectors, int n_neighbors, int target_dim,
                         std::uint64_t seed, int n_epochs = 500);

// EM from k-means++ seeding. Stops when the log-likelihood improves by less
// than cfg.em_tol per point, after cfg.em_max_iters iterations, or on a
// likelihood drop (the regularized M-step can dip near singular components;
// the previous iterate is kept). Covariances carry +cfg.covariance_reg on
// the diagonal.
GmmModel fit_gmm(const ReducedPoints& points, int num_components, std::uint64_t seed,
                 const ClusteringConfig& cfg = {});

// Posterior responsibilities, N x K. Rows sum to 1.
Eigen::MatrixXd gmm_responsibilities(const GmmModel& model, const ReducedPoints& points);

// Free parameters of a K-component full-covariance mixture in `dim` dims.
std::int64_t gmm_param_count(int num_components, int dim);

// ln(N) * n_params - 2 * log_likelihood.
double bic(double log_likelihood, std::int64_t n_params, std::int64_t n_points);
double bic(const GmmModel& model, std::int64_t n_points);

// Sweeps K upward from 1 toward min(k_max, N) and returns the K minimizing
// BIC (ties go to the smaller K). The sweep stops early once eight
// consecutive candidates fail to improve the score.
std::pair<int, GmmModel> select_k(const ReducedPoints& points, int k_max, std::uint64_t seed,
                                  const ClusteringConfig& cfg = {});

// Point i joins cluster k iff responsibility(i, k) >= threshold; every point
// joins at least its argmax cluster. Empty clusters are dropped. When
// token_counts (aligned with points) is given, cluster token totals are
// filled in.
std::vector<Cluster> soft_assign(const GmmModel& model, const ReducedPoints& points, double threshold,
                                 const std::vector<std::int64_t>& token_counts = {});

struct ClusterOutcome {
    std::vector<Cluster> clusters;
    std::vector<std::string> warnings;
};

// Two-stage soft clustering: a global pass over all nodes, a local pass
// inside each sufficiently large global cluster, then recursive re-clustering
// of any cluster whose token total exceeds the summarizer threshold. Falls
// back to similarity-ranked halving at the recursion depth cap.
ClusterOutcome hierarchical_cluster(const std::vector<std::int64_t>& node_ids,
                                    const std::vector<Vector>& embeddings,
                                    const std::vector<std::int64_t>& token_counts,
                                    std::uint64_t seed, const ClusteringConfig& cfg = {});

}  // namespace raptor
