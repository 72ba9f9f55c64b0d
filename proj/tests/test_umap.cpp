#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "raptor/clustering.hpp"
#include "raptor/errors.hpp"
#include "raptor/rng.hpp"

using namespace raptor;

namespace {

std::vector<Vector> gaussian_blob(SplitMix64& rng, int n, int dim, const Vector& center) {
    std::vector<Vector> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        Vector v(dim);
        for (int d = 0; d < dim; ++d) v[d] = center[d] + rng.next_gaussian();
        out.push_back(std::move(v));
    }
    return out;
}

double row_dist(const Eigen::MatrixXd& m, int i, int j) {
    return (m.row(i) - m.row(j)).norm();
}

}  // namespace

TEST_CASE("global_n_neighbors follows sqrt with clamping") {
    CHECK(global_n_neighbors(2) == 2);
    CHECK(global_n_neighbors(5) == 2);
    CHECK(global_n_neighbors(10) == 3);
    CHECK(global_n_neighbors(101) == 10);
    CHECK(global_n_neighbors(2502) == 50);
    CHECK(global_n_neighbors(1000000) == 50);
}

TEST_CASE("reduce_dim validates input") {
    std::vector<Vector> two = {{1.0, 2.0}, {3.0, 4.0}};
    CHECK_THROWS_AS(reduce_dim(two, 2, 2, 0), InvalidInputError);
    std::vector<Vector> ok = {{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}, {7.0, 8.0}};
    CHECK_THROWS_AS(reduce_dim(ok, 2, 0, 0), ConfigError);
    std::vector<Vector> ragged = {{1.0, 2.0}, {3.0}, {5.0, 6.0}};
    CHECK_THROWS_AS(reduce_dim(ragged, 2, 2, 0), InvalidInputError);
}

TEST_CASE("identical vectors collapse to one spot") {
    std::vector<Vector> same(12, Vector{0.5, -0.25, 1.0, 2.0});
    auto reduced = reduce_dim(same, 11, 2, 42, 500);
    REQUIRE(reduced.points.rows() == 12);
    REQUIRE(reduced.points.cols() == 2);
    double max_pairwise = 0.0;
    for (int i = 0; i < 12; ++i) {
        for (int j = i + 1; j < 12; ++j) {
            max_pairwise = std::max(max_pairwise, row_dist(reduced.points, i, j));
        }
    }
    // Init spans [-10, 10]^2 (expected pairwise distance ~10.8). Negative
    // sampling keeps a repulsion floor, so "one spot" means well under init
    // scale, not literally coincident.
    CHECK(max_pairwise < 5.0);
}

TEST_CASE("two well-separated blobs stay linearly separable") {
    SplitMix64 rng(7);
    Vector c0(100, 0.0);
    Vector c1(100, 0.0);
    c1[0] = 10.0;  // 10 sigma apart, unit within-blob std per axis
    auto points = gaussian_blob(rng, 30, 100, c0);
    auto blob1 = gaussian_blob(rng, 30, 100, c1);
    points.insert(points.end(), blob1.begin(), blob1.end());

    auto reduced = reduce_dim(points, 10, 2, 123, 300);
    double max_intra = 0.0;
    double min_inter = 1e300;
    for (int i = 0; i < 60; ++i) {
        for (int j = i + 1; j < 60; ++j) {
            const double d = row_dist(reduced.points, i, j);
            const bool same_blob = (i < 30) == (j < 30);
            if (same_blob) {
                max_intra = std::max(max_intra, d);
            } else {
                min_inter = std::min(min_inter, d);
            }
        }
    }
    CAPTURE(max_intra);
    CAPTURE(min_inter);
    CHECK(min_inter > max_intra);
}

TEST_CASE("reduce_dim is deterministic given a seed") {
    SplitMix64 rng(88);
    auto points = gaussian_blob(rng, 20, 16, Vector(16, 0.0));
    auto a = reduce_dim(points, 5, 3, 999, 100);
    auto b = reduce_dim(points, 5, 3, 999, 100);
    REQUIRE(a.points.rows() == b.points.rows());
    CHECK((a.points - b.points).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.n_neighbors == 5);
    CHECK(a.seed == 999);

    auto c = reduce_dim(points, 5, 3, 1000, 100);
    CHECK((a.points - c.points).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("n_neighbors is clamped to the point count") {
    SplitMix64 rng(5);
    auto points = gaussian_blob(rng, 6, 4, Vector(4, 0.0));
    auto reduced = reduce_dim(points, 50, 2, 1, 50);
    CHECK(reduced.n_neighbors == 5);
    CHECK(reduced.source_ids.size() == 6);
}
