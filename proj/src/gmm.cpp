#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "raptor/clustering.hpp"
#include "raptor/errors.hpp"
#include "raptor/rng.hpp"

namespace raptor {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Cholesky with escalating diagonal loading; the M-step already adds reg once.
Eigen::LLT<Eigen::MatrixXd> robust_llt(Eigen::MatrixXd cov, double reg) {
    for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) return llt;
        cov.diagonal().array() += reg * std::pow(10.0, attempt + 1);
    }
    throw NumericalError("covariance matrix is not positive definite");
}

struct EStep {
    Eigen::MatrixXd log_resp;  // N x K, rows normalized
    double log_likelihood = 0.0;
};

EStep run_e_step(const GmmModel& model, const Eigen::MatrixXd& data, double reg) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    const int k = model.num_components;
    Eigen::MatrixXd logp(n, k);
    for (int c = 0; c < k; ++c) {
        if (model.weights(c) <= 0.0) {
            logp.col(c).setConstant(kNegInf);
            continue;
        }
        auto llt = robust_llt(model.covariances[c], reg);
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) log_det += std::log(llt.matrixLLT()(i, i));
        log_det *= 2.0;
        Eigen::MatrixXd centered = data.rowwise() - model.means.row(c);
        Eigen::MatrixXd white = llt.matrixLLT().triangularView<Eigen::Lower>().solve(centered.transpose());
        Eigen::VectorXd quad = white.colwise().squaredNorm().transpose();
        const double base = std::log(model.weights(c)) -
                            0.5 * (static_cast<double>(d) * kLog2Pi + log_det);
        logp.col(c) = (base - 0.5 * quad.array()).matrix();
    }

    EStep out;
    out.log_resp.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = logp.row(i).maxCoeff();
        if (!std::isfinite(m)) throw NumericalError("every mixture component lost support");
        double sum = 0.0;
        for (int c = 0; c < k; ++c) sum += std::exp(logp(i, c) - m);
        const double lse = m + std::log(sum);
        out.log_likelihood += lse;
        for (int c = 0; c < k; ++c) out.log_resp(i, c) = logp(i, c) - lse;
    }
    if (!std::isfinite(out.log_likelihood)) throw NumericalError("log-likelihood is not finite");
    return out;
}

void run_m_step(GmmModel& model, const Eigen::MatrixXd& data, const Eigen::MatrixXd& resp,
                double reg) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    for (int c = 0; c < model.num_components; ++c) {
        const double nk = resp.col(c).sum();
        model.weights(c) = nk / static_cast<double>(n);
        // A component with no effective mass keeps its parameters; its weight
        // removes it from the mixture.
        if (nk < 1e-12) continue;
        model.means.row(c) = (resp.col(c).transpose() * data) / nk;
        Eigen::MatrixXd centered = data.rowwise() - model.means.row(c);
        Eigen::MatrixXd weighted = centered.array().colwise() * resp.col(c).array();
        Eigen::MatrixXd cov = (centered.transpose() * weighted) / nk;
        cov.diagonal().array() += reg;
        model.covariances[c] = std::move(cov);
        (void)d;
    }
}

// k-means++ seeding plus a short Lloyd refinement; initial covariances come
// from the hard clusters (falling back to the global covariance for clusters
// of fewer than two points).
GmmModel kmeans_init(const Eigen::MatrixXd& data, int k, std::uint64_t seed, double reg) {
    const auto n = static_cast<int>(data.rows());
    const Eigen::Index d = data.cols();
    SplitMix64 rng(derive_seed(seed, "gmm:init"));

    std::vector<int> centers;
    centers.reserve(k);
    centers.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n))));
    Eigen::VectorXd d2(n);
    for (int i = 0; i < n; ++i) d2(i) = (data.row(i) - data.row(centers[0])).squaredNorm();
    while (static_cast<int>(centers.size()) < k) {
        const double total = d2.sum();
        int pick = 0;
        if (total > 0.0) {
            const double r = rng.next_double() * total;
            double acc = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += d2(i);
                if (r < acc) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
        }
        centers.push_back(pick);
        for (int i = 0; i < n; ++i) {
            d2(i) = std::min(d2(i), (data.row(i) - data.row(pick)).squaredNorm());
        }
    }

    Eigen::MatrixXd means(k, d);
    for (int c = 0; c < k; ++c) means.row(c) = data.row(centers[c]);

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < 25; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = (data.row(i) - means.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                const double dist = (data.row(i) - means.row(c)).squaredNorm();
                if (dist < best_d) {
                    best_d = dist;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            sums.row(assign[i]) += data.row(i);
            counts[assign[i]] += 1;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) means.row(c) = sums.row(c) / counts[c];
        }
    }

    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) counts[assign[i]] += 1;
    // Hand every starved cluster the point sitting farthest from its own
    // center so no component starts empty.
    for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        int worst = -1;
        double worst_d = -1.0;
        for (int i = 0; i < n; ++i) {
            if (counts[assign[i]] <= 1) continue;
            const double dist = (data.row(i) - means.row(assign[i])).squaredNorm();
            if (dist > worst_d) {
                worst_d = dist;
                worst = i;
            }
        }
        if (worst < 0) break;
        counts[assign[worst]] -= 1;
        assign[worst] = c;
        counts[c] = 1;
        means.row(c) = data.row(worst);
    }

    Eigen::RowVectorXd global_mean = data.colwise().mean();
    Eigen::MatrixXd centered = data.rowwise() - global_mean;
    Eigen::MatrixXd global_cov = (centered.transpose() * centered) / static_cast<double>(n);
    global_cov.diagonal().array() += reg;

    // Every component starts at the global covariance. Wide initial
    // covariances keep EM away from singleton collapse (a near-singular
    // component wrapped around one point), which would otherwise let BIC
    // reward degenerate fits on small point sets.
    GmmModel model;
    model.num_components = k;
    model.means = std::move(means);
    model.weights.resize(k);
    model.covariances.assign(k, global_cov);
    for (int c = 0; c < k; ++c) {
        model.weights(c) = static_cast<double>(std::max(counts[c], 0)) / static_cast<double>(n);
    }
    double wsum = model.weights.sum();
    if (wsum > 0.0) model.weights /= wsum;
    return model;
}

}  // namespace

GmmModel fit_gmm(const ReducedPoints& points, int num_components, std::uint64_t seed,
                 const ClusteringConfig& cfg) {
    const Eigen::Index n = points.points.rows();
    if (n < 1) throw InvalidInputError("cannot fit a mixture on an empty point set");
    if (num_components < 1) throw ConfigError("num_components must be positive");
    if (num_components > n) {
        throw ConfigError("more mixture components (" + std::to_string(num_components) +
                          ") than points (" + std::to_string(n) + ")");
    }

    GmmModel model = kmeans_init(points.points, num_components, seed, cfg.covariance_reg);
    double prev_ll = kNegInf;
    Eigen::MatrixXd prev_means;
    std::vector<Eigen::MatrixXd> prev_covariances;
    Eigen::VectorXd prev_weights;
    for (int iter = 0; iter < cfg.em_max_iters; ++iter) {
        EStep step = run_e_step(model, points.points, cfg.covariance_reg);
        // The diagonal loading in the M-step voids the textbook guarantee that
        // each iteration improves the likelihood: near a singular component the
        // regularized update can overshoot. A drop therefore means the previous
        // iterate was the peak; keep it and stop.
        if (iter > 0 && step.log_likelihood < prev_ll) {
            model.means = std::move(prev_means);
            model.covariances = std::move(prev_covariances);
            model.weights = std::move(prev_weights);
            model.log_likelihood = prev_ll;
            break;
        }
        model.log_likelihood_history.push_back(step.log_likelihood);
        model.log_likelihood = step.log_likelihood;
        // Convergence is judged per point, like sklearn's tol, so the
        // iteration count does not scale with the size of the point set.
        if (iter > 0 &&
            (step.log_likelihood - prev_ll) / static_cast<double>(n) < cfg.em_tol) {
            break;
        }
        prev_ll = step.log_likelihood;
        prev_means = model.means;
        prev_covariances = model.covariances;
        prev_weights = model.weights;
        Eigen::MatrixXd resp = step.log_resp.array().exp();
        run_m_step(model, points.points, resp, cfg.covariance_reg);
    }
    return model;
}

Eigen::MatrixXd gmm_responsibilities(const GmmModel& model, const ReducedPoints& points) {
    if (model.num_components < 1) throw InvalidInputError("model has no components");
    if (points.points.cols() != model.means.cols()) {
        throw InvalidInputError("point dimension does not match the model");
    }
    EStep step = run_e_step(model, points.points, 0.0);
    return step.log_resp.array().exp();
}

std::int64_t gmm_param_count(int num_components, int dim) {
    if (num_components < 1 || dim < 1) throw ConfigError("component count and dimension must be positive");
    const std::int64_t k = num_components;
    const std::int64_t d = dim;
    return k * (d + d * (d + 1) / 2) + (k - 1);
}

double bic(double log_likelihood, std::int64_t n_params, std::int64_t n_points) {
    if (n_points < 1) throw InvalidInputError("BIC needs at least one point");
    return std::log(static_cast<double>(n_points)) * static_cast<double>(n_params) -
           2.0 * log_likelihood;
}

double bic(const GmmModel& model, std::int64_t n_points) {
    return bic(model.log_likelihood,
               gmm_param_count(model.num_components, static_cast<int>(model.means.cols())),
               n_points);
}

namespace {

// BIC is an asymptotic score around a regular interior MLE. A component that
// collapsed onto too few points keeps most of its covariance spectrum pinned
// to the regularization floor, which inflates the likelihood by a factor of
// ~1/sqrt(2*pi*reg) per flattened direction per point; selecting against such
// boundary solutions is meaningless, so they are not admissible candidates.
// A single floored direction is tolerated: it is the normal outcome when a
// healthy component has barely more members than the space has dimensions.
bool is_degenerate_fit(const GmmModel& model, double reg) {
    for (int c = 0; c < model.num_components; ++c) {
        if (model.weights(c) < 1e-9) return true;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.covariances[c],
                                                           Eigen::EigenvaluesOnly);
        const Eigen::Index dim = eig.eigenvalues().size();
        Eigen::Index floored = 0;
        for (Eigen::Index d = 0; d < dim; ++d) {
            if (eig.eigenvalues()(d) <= 10.0 * reg) ++floored;
        }
        if (2 * floored >= dim) return true;
    }
    return false;
}

}  // namespace

std::pair<int, GmmModel> select_k(const ReducedPoints& points, int k_max, std::uint64_t seed,
                                  const ClusteringConfig& cfg) {
    const Eigen::Index n = points.points.rows();
    if (n < 1) throw InvalidInputError("cannot select K on an empty point set");
    if (k_max < 1) throw ConfigError("k_max must be positive");
    const int upper = static_cast<int>(std::min<Eigen::Index>(k_max, n));
    const int n_init = std::max(cfg.n_init, 1);
    // The ln(N) penalty grows linearly in K, so once this many candidates in
    // a row have failed to improve the score the sweep is deep into
    // penalty-dominated territory and fitting the rest is wasted work.
    constexpr int kSweepPatience = 8;

    int best_k = 0;
    GmmModel best_model;
    double best_bic = std::numeric_limits<double>::infinity();
    GmmModel fallback;  // K=1 fit, returned when every candidate is degenerate
    int stall = 0;
    for (int k = 1; k <= upper; ++k) {
        GmmModel best_for_k;
        double best_ll = kNegInf;
        for (int init = 0; init < n_init; ++init) {
            const std::uint64_t run_seed =
                derive_seed(seed, "select_k:" + std::to_string(k) + ":" + std::to_string(init));
            GmmModel model = fit_gmm(points, k, run_seed, cfg);
            if (model.log_likelihood > best_ll) {
                best_ll = model.log_likelihood;
                best_for_k = std::move(model);
            }
        }
        if (k == 1) fallback = best_for_k;
        bool improved = false;
        if (!is_degenerate_fit(best_for_k, cfg.covariance_reg)) {
            const double score = bic(best_for_k, n);
            if (score < best_bic) {
                best_bic = score;
                best_k = k;
                best_model = std::move(best_for_k);
                improved = true;
            }
        }
        if (best_k > 0) {  // never stall out before some candidate is usable
            stall = improved ? 0 : stall + 1;
            if (stall >= kSweepPatience) break;
        }
    }
    if (best_k == 0) return {1, std::move(fallback)};
    return {best_k, std::move(best_model)};
}

std::vector<Cluster> soft_assign(const GmmModel& model, const ReducedPoints& points, double threshold,
                                 const std::vector<std::int64_t>& token_counts) {
    if (threshold < 0.0 || threshold > 1.0) throw ConfigError("membership threshold must lie in [0, 1]");
    const Eigen::Index n = points.points.rows();
    if (!token_counts.empty() && static_cast<Eigen::Index>(token_counts.size()) != n) {
        throw InvalidInputError("token_counts must align with the points");
    }
    if (static_cast<Eigen::Index>(points.source_ids.size()) != n) {
        throw InvalidInputError("source_ids must align with the points");
    }
    const Eigen::MatrixXd resp = gmm_responsibilities(model, points);
    const int k = model.num_components;

    std::vector<std::vector<int>> members(k);
    std::vector<bool> placed(n, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int c = 0; c < k; ++c) {
            if (resp(i, c) >= threshold) {
                members[c].push_back(static_cast<int>(i));
                placed[i] = true;
            }
        }
    }
    // Points below the threshold everywhere still belong to their argmax
    // component.
    for (Eigen::Index i = 0; i < n; ++i) {
        if (placed[i]) continue;
        int best = 0;
        for (int c = 1; c < k; ++c) {
            if (resp(i, c) > resp(i, best)) best = c;
        }
        members[best].push_back(static_cast<int>(i));
    }

    std::vector<Cluster> clusters;
    for (int c = 0; c < k; ++c) {
        if (members[c].empty()) continue;
        Cluster cluster;
        for (int i : members[c]) {
            cluster.member_ids.push_back(points.source_ids[i]);
            cluster.responsibilities.push_back(resp(i, c));
            if (!token_counts.empty()) cluster.total_tokens += token_counts[i];
        }
        clusters.push_back(std::move(cluster));
    }
    return clusters;
}

}  // namespace raptor
