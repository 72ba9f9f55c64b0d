#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "raptor/errors.hpp"
#include "raptor/retrieval.hpp"
#include "raptor/rng.hpp"
#include "raptor/tree.hpp"
#include "tree_fixtures.hpp"

using namespace raptor;

namespace {

Node make_node(std::int64_t id, int layer, Vector embedding, std::int64_t tokens,
               std::vector<std::int64_t> children = {}) {
    Node n;
    n.id = id;
    n.layer = layer;
    n.text = "node " + std::to_string(id);
    n.embedding = std::move(embedding);
    normalize_in_place(n.embedding);
    n.token_count = tokens;
    n.children = std::move(children);
    if (layer == 0) n.source_offset = 0;
    return n;
}

// Two roots over four leaves: root 4 covers leaves {0, 1}, root 5 covers
// {2, 3}. The query axis (1, 0) is closest to root 4 and to leaf 0.
Tree two_root_fixture() {
    Tree tree;
    tree.nodes.emplace(0, make_node(0, 0, {5.0, 1.0}, 10));
    tree.nodes.emplace(1, make_node(1, 0, {0.6, 0.8}, 11));
    tree.nodes.emplace(2, make_node(2, 0, {-0.3, 1.0}, 12));
    tree.nodes.emplace(3, make_node(3, 0, {-1.0, 0.2}, 13));
    tree.nodes.emplace(4, make_node(4, 1, {1.0, 0.0}, 20, {0, 1}));
    tree.nodes.emplace(5, make_node(5, 1, {0.0, 1.0}, 21, {2, 3}));
    tree.layers = {{0, 1, 2, 3}, {4, 5}};
    return tree;
}

// Independent ranking oracle: full sort by (score desc, id asc), then the
// longest prefix that fits the budget, stopping at the first overflow.
std::vector<std::int64_t> brute_force_prefix(const Tree& tree, const Vector& query,
                                             const std::vector<std::int64_t>& pool,
                                             std::int64_t budget) {
    std::vector<std::pair<double, std::int64_t>> ranked;
    for (std::int64_t id : pool) {
        ranked.push_back({cosine_similarity(query, tree.node(id).embedding), id});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::int64_t> out;
    std::int64_t used = 0;
    for (const auto& [score, id] : ranked) {
        if (used + tree.node(id).token_count > budget) break;
        used += tree.node(id).token_count;
        out.push_back(id);
    }
    return out;
}

std::vector<std::int64_t> all_ids(const Tree& tree) {
    std::vector<std::int64_t> ids;
    for (const auto& [id, n] : tree.nodes) ids.push_back(id);
    return ids;
}

}  // namespace

TEST_CASE("traversal walks the hand-traced path") {
    Tree tree = two_root_fixture();
    RetrievalResult r = tree_traversal(tree, {1.0, 0.0}, 1, 2);

    CHECK(r.selected == std::vector<std::int64_t>{4, 0});
    CHECK(r.mode == RetrievalMode::traversal);
    REQUIRE(r.scores.size() == 2);
    CHECK(r.scores[0] == doctest::Approx(1.0));
    CHECK(r.scores[1] == doctest::Approx(5.0 / std::sqrt(26.0)));
    CHECK(r.stage_offsets == std::vector<std::size_t>{0, 1});
    CHECK(r.total_tokens == 30);
    CHECK(r.layer_tally == std::map<int, std::int64_t>{{0, 1}, {1, 1}});
    // Leaf 0 was reached through its selected parent 4.
    CHECK(r.ancestor_overlap ==
          std::vector<std::pair<std::int64_t, std::int64_t>>{{0, 4}});
}

TEST_CASE("traversal with a wide beam returns whole root-to-leaf paths") {
    Tree tree = two_root_fixture();
    RetrievalResult r = tree_traversal(tree, {1.0, 0.0}, 4, 2);

    REQUIRE(r.stage_offsets == std::vector<std::size_t>{0, 2});
    CHECK(r.selected.size() == 6);  // both roots, then every leaf
    std::set<std::int64_t> got(r.selected.begin(), r.selected.end());
    CHECK(got == std::set<std::int64_t>{0, 1, 2, 3, 4, 5});

    // |S_i| = min(k, candidate count) at each stage.
    RetrievalResult narrow = tree_traversal(tree, {1.0, 0.0}, 3, 2);
    CHECK(narrow.stage_offsets == std::vector<std::size_t>{0, 2});
    CHECK(narrow.selected.size() == 2 + 3);
}

TEST_CASE("traversal scores are non-increasing within each stage") {
    SplitMix64 rng(2025);
    for (int trial = 0; trial < 25; ++trial) {
        Tree tree = fixtures::random_tree(rng, 50, 6, 2);
        const Vector query = fixtures::unit_vector(rng, 6);
        const int k = 1 + static_cast<int>(rng.next_below(4));
        RetrievalResult r = tree_traversal(tree, query, k);
        for (std::size_t s = 0; s < r.stage_offsets.size(); ++s) {
            const std::size_t begin = r.stage_offsets[s];
            const std::size_t end =
                s + 1 < r.stage_offsets.size() ? r.stage_offsets[s + 1] : r.selected.size();
            for (std::size_t i = begin + 1; i < end; ++i) {
                CHECK(r.scores[i] <= r.scores[i - 1]);
            }
        }
    }
}

TEST_CASE("deeper traversals contain shallower ones") {
    SplitMix64 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        Tree tree = fixtures::random_tree(rng, 60, 8, 2);
        const Vector query = fixtures::unit_vector(rng, 8);
        const int k = 1 + static_cast<int>(rng.next_below(4));

        std::set<std::int64_t> previous;
        for (int depth = 1; depth <= static_cast<int>(tree.layers.size()); ++depth) {
            RetrievalResult r = tree_traversal(tree, query, k, depth);
            std::set<std::int64_t> now(r.selected.begin(), r.selected.end());
            CHECK(std::includes(now.begin(), now.end(), previous.begin(), previous.end()));
            previous = std::move(now);
        }
    }
}

TEST_CASE("collapsed tree follows the scored prefix rule") {
    Tree tree;
    // Scores against the query axis: 0.9, 0.8, 0.7 with 50, 60, 70 tokens.
    auto leaf = [](std::int64_t id, double score, std::int64_t tokens) {
        return make_node(id, 0, {score, std::sqrt(1.0 - score * score)}, tokens);
    };
    tree.nodes.emplace(0, leaf(0, 0.9, 50));
    tree.nodes.emplace(1, leaf(1, 0.8, 60));
    tree.nodes.emplace(2, leaf(2, 0.7, 70));
    tree.layers = {{0, 1, 2}};
    const Vector query = {1.0, 0.0};

    RetrievalResult r = collapsed_tree(tree, query, 120);
    CHECK(r.selected == std::vector<std::int64_t>{0, 1});
    CHECK(r.total_tokens == 110);
    CHECK(r.mode == RetrievalMode::collapsed);

    CHECK(collapsed_tree(tree, query, 0).selected.empty());
    CHECK(collapsed_tree(tree, query, 49).selected.empty());
    CHECK(collapsed_tree(tree, query, 10000).selected == std::vector<std::int64_t>{0, 1, 2});
    CHECK_THROWS_AS(collapsed_tree(tree, query, -1), ConfigError);

    // Strict prefix stop: node 2 would still fit the leftover budget after
    // node 1 overflows, but scanning must not continue past the overflow.
    Tree skip;
    skip.nodes.emplace(0, leaf(0, 0.9, 50));
    skip.nodes.emplace(1, leaf(1, 0.8, 60));
    skip.nodes.emplace(2, leaf(2, 0.7, 40));
    skip.layers = {{0, 1, 2}};
    RetrievalResult stopped = collapsed_tree(skip, query, 100);
    CHECK(stopped.selected == std::vector<std::int64_t>{0});
    CHECK(stopped.total_tokens == 50);
}

TEST_CASE("collapsed tree matches the brute-force oracle on random trees") {
    SplitMix64 rng(424242);
    for (int trial = 0; trial < 25; ++trial) {
        Tree tree = fixtures::random_tree(rng, 80, 8);
        const Vector query = fixtures::unit_vector(rng, 8);
        const std::int64_t budget = static_cast<std::int64_t>(rng.next_below(3000));

        RetrievalResult r = collapsed_tree(tree, query, budget);
        CHECK(r.selected == brute_force_prefix(tree, query, all_ids(tree), budget));
        CHECK(r.total_tokens <= budget);
        std::int64_t tally_sum = 0;
        for (const auto& [layer, count] : r.layer_tally) tally_sum += count;
        CHECK(tally_sum == static_cast<std::int64_t>(r.selected.size()));
    }
}

TEST_CASE("hundred-token nodes at budget 2000 select about twenty nodes") {
    SplitMix64 rng(9);
    Tree tree = fixtures::random_tree(rng, 200, 8);
    for (auto& [id, n] : tree.nodes) n.token_count = 100;
    RetrievalResult r = collapsed_tree(tree, fixtures::unit_vector(rng, 8), 2000);
    CHECK(r.selected.size() == 20);
}

TEST_CASE("layer-restricted retrieval scopes the pool") {
    SplitMix64 rng(31);
    Tree tree = fixtures::random_tree(rng, 60, 8, 3);
    REQUIRE(tree.layers.size() >= 3);
    const Vector query = fixtures::unit_vector(rng, 8);

    std::vector<int> all_layers;
    for (int l = 0; l <= tree.top_layer(); ++l) all_layers.push_back(l);
    RetrievalResult unrestricted = layer_restricted_retrieve(tree, query, all_layers, 800);
    RetrievalResult collapsed = collapsed_tree(tree, query, 800);
    CHECK(unrestricted.selected == collapsed.selected);
    CHECK(unrestricted.scores == collapsed.scores);
    CHECK(unrestricted.mode == RetrievalMode::layer_restricted);

    RetrievalResult leaves_only = layer_restricted_retrieve(tree, query, {0}, 800);
    RetrievalResult flat = flat_retrieve(tree, query, 800);
    CHECK(leaves_only.selected == flat.selected);
    CHECK(flat.mode == RetrievalMode::flat);

    RetrievalResult upper = layer_restricted_retrieve(tree, query, {2}, 800);
    for (const auto& [layer, count] : upper.layer_tally) CHECK(layer == 2);

    CHECK_THROWS_AS(layer_restricted_retrieve(tree, query, {}, 800), ConfigError);
    CHECK_THROWS_AS(layer_restricted_retrieve(tree, query, {99}, 800), ConfigError);
    CHECK_THROWS_AS(layer_restricted_retrieve(tree, query, {-1}, 800), ConfigError);
}

TEST_CASE("flat retrieval equals a brute-force sort of the leaves") {
    SplitMix64 rng(5151);
    for (int trial = 0; trial < 25; ++trial) {
        Tree tree = fixtures::random_tree(rng, 70, 8, 2);
        const Vector query = fixtures::unit_vector(rng, 8);
        const std::int64_t budget = static_cast<std::int64_t>(rng.next_below(2000));
        RetrievalResult r = flat_retrieve(tree, query, budget);
        CHECK(r.selected == brute_force_prefix(tree, query, tree.layers[0], budget));
        for (const auto& [layer, count] : r.layer_tally) CHECK(layer == 0);
    }
}

TEST_CASE("single-leaf tree returns its leaf when the budget allows") {
    Tree tree;
    tree.nodes.emplace(0, make_node(0, 0, {1.0, 0.0}, 7));
    tree.layers = {{0}};
    RetrievalResult r = flat_retrieve(tree, {0.5, 0.5}, 7);
    CHECK(r.selected == std::vector<std::int64_t>{0});
    CHECK(flat_retrieve(tree, {0.5, 0.5}, 6).selected.empty());
}

TEST_CASE("retrieval input validation") {
    Tree empty;
    CHECK_THROWS_AS(collapsed_tree(empty, {1.0}, 100), InvalidInputError);
    CHECK_THROWS_AS(tree_traversal(empty, {1.0}, 1), InvalidInputError);

    Tree tree = two_root_fixture();
    CHECK_THROWS_AS(tree_traversal(tree, {1.0, 0.0}, 0), ConfigError);
    CHECK_THROWS_AS(tree_traversal(tree, {1.0, 0.0}, 1, 3), ConfigError);
    CHECK_THROWS_AS(tree_traversal(tree, {1.0, 0.0}, 1, 1, 5), ConfigError);
    CHECK_THROWS_AS(tree_traversal(tree, {1.0, 0.0, 0.0}, 1), InvalidInputError);
    CHECK_THROWS_AS(collapsed_tree(tree, {0.0, 0.0}, 100), InvalidInputError);
}

TEST_CASE("the dispatcher routes every mode") {
    Tree tree = two_root_fixture();
    const Vector query = {1.0, 0.0};

    QueryConfig config;
    config.mode = RetrievalMode::traversal;
    config.top_k = 1;
    config.depth = 2;
    CHECK(retrieve(tree, query, config).selected == tree_traversal(tree, query, 1, 2).selected);

    config = {};
    config.max_tokens = 40;
    CHECK(retrieve(tree, query, config).selected == collapsed_tree(tree, query, 40).selected);

    config.mode = RetrievalMode::layer_restricted;
    config.allowed_layers = {1};
    CHECK(retrieve(tree, query, config).selected ==
          layer_restricted_retrieve(tree, query, {1}, 40).selected);

    config.mode = RetrievalMode::flat;
    CHECK(retrieve(tree, query, config).selected == flat_retrieve(tree, query, 40).selected);

    CHECK(to_string(RetrievalMode::traversal) == "traversal");
    CHECK(to_string(RetrievalMode::collapsed) == "collapsed");
    CHECK(to_string(RetrievalMode::layer_restricted) == "layer_restricted");
    CHECK(to_string(RetrievalMode::flat) == "flat");
}

TEST_CASE("layer_histogram turns tallies into percentages") {
    RetrievalResult a;
    a.layer_tally = {{0, 2}, {1, 1}};
    auto hist = layer_histogram({a});
    CHECK(hist.at(0) == doctest::Approx(66.67).epsilon(0.001));
    CHECK(hist.at(1) == doctest::Approx(33.33).epsilon(0.001));

    RetrievalResult flat1, flat2;
    flat1.layer_tally = {{0, 4}};
    flat2.layer_tally = {{0, 6}};
    auto flat_hist = layer_histogram({flat1, flat2});
    CHECK(flat_hist.size() == 1);
    CHECK(flat_hist.at(0) == doctest::Approx(100.0));

    SplitMix64 rng(8);
    std::vector<RetrievalResult> results;
    for (int i = 0; i < 10; ++i) {
        Tree tree = fixtures::random_tree(rng, 40, 6, 2);
        results.push_back(collapsed_tree(tree, fixtures::unit_vector(rng, 6), 700));
    }
    double total = 0.0;
    for (const auto& [layer, pct] : layer_histogram(results)) total += pct;
    CHECK(total == doctest::Approx(100.0).epsilon(1e-4));

    CHECK_THROWS_AS(layer_histogram({}), InvalidInputError);
}

TEST_CASE("assemble_context joins texts in the requested order") {
    Tree tree = two_root_fixture();
    tree.nodes.at(0).doc_id = "b";
    tree.nodes.at(0).source_offset = 10;
    tree.nodes.at(1).doc_id = "a";
    tree.nodes.at(1).source_offset = 99;

    RetrievalResult r;
    r.selected = {0, 4, 1};
    CHECK(assemble_context(tree, r) == "node 0\n\nnode 4\n\nnode 1");
    // Document order: summaries first, then leaves by (doc_id, offset).
    CHECK(assemble_context(tree, r, true) == "node 4\n\nnode 1\n\nnode 0");
    CHECK(assemble_context(tree, {}).empty());
}
