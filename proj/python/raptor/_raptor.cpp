// Python bindings for the index core: build, save, load, query, and stats,
// plus the deterministic mock embedder so query vectors can be produced in
// the same space a tree was built in.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "raptor/errors.hpp"
#include "raptor/http_providers.hpp"
#include "raptor/persistence.hpp"
#include "raptor/retrieval.hpp"
#include "raptor/tree.hpp"

namespace py = pybind11;
using namespace raptor;

namespace {

std::unique_ptr<EmbeddingProvider> embedder_from(const std::string& kind, int dimension,
                                                 std::uint64_t seed,
                                                 const std::vector<std::string>& topics) {
    if (kind == "http") {
        HttpProviderConfig config;
        const char* url = std::getenv(kEmbedUrlEnv);
        if (!url || !*url) throw ConfigError(std::string(kEmbedUrlEnv) + " is not set");
        config.url = url;
        if (const char* key = std::getenv(kApiKeyEnv)) config.api_key = key;
        return std::make_unique<HttpEmbedder>(std::move(config));
    }
    MockEmbedderConfig config;
    config.dimension = dimension;
    config.seed = seed;
    if (kind == "mock-topic") {
        if (topics.empty()) throw ConfigError("embedder \"mock-topic\" needs topics");
        config.topic_lexicon = topics;
    } else if (kind != "mock") {
        throw ConfigError("unknown embedder kind: " + kind);
    }
    return std::make_unique<MockEmbedder>(config);
}

std::unique_ptr<SummarizationProvider> summarizer_from(const std::string& kind,
                                                       std::int64_t max_tokens) {
    if (kind == "http") {
        HttpProviderConfig config;
        const char* url = std::getenv(kLlmUrlEnv);
        if (!url || !*url) throw ConfigError(std::string(kLlmUrlEnv) + " is not set");
        config.url = url;
        if (const char* key = std::getenv(kApiKeyEnv)) config.api_key = key;
        return std::make_unique<HttpSummarizer>(std::move(config), max_tokens);
    }
    if (kind == "mock-extractive") return std::make_unique<MockExtractiveSummarizer>(max_tokens);
    if (kind == "mock-truncate") return std::make_unique<MockTruncateSummarizer>(max_tokens);
    throw ConfigError("unknown summarizer kind: " + kind);
}

RetrievalMode mode_from(const std::string& name) {
    if (name == "collapsed") return RetrievalMode::collapsed;
    if (name == "traversal") return RetrievalMode::traversal;
    if (name == "layer_restricted") return RetrievalMode::layer_restricted;
    if (name == "flat") return RetrievalMode::flat;
    throw ConfigError("unknown retrieval mode: " + name);
}

Tree build_py(const std::vector<std::pair<std::string, std::string>>& documents,
              std::uint64_t seed, const std::string& embedder, int embed_dim,
              std::optional<std::uint64_t> embed_seed, const std::vector<std::string>& topics,
              const std::string& summarizer, std::int64_t max_summary_tokens,
              std::int64_t chunk_budget, int max_layers, int min_top_nodes, int max_in_flight,
              const std::string& grouping, int window) {
    std::vector<Document> corpus;
    corpus.reserve(documents.size());
    for (const auto& [doc_id, text] : documents) corpus.push_back({doc_id, text});

    auto emb = embedder_from(embedder, embed_dim, embed_seed.value_or(seed), topics);
    auto summ = summarizer_from(summarizer, max_summary_tokens);

    BuildConfig config;
    config.seed = seed;
    config.chunk_budget = chunk_budget;
    config.max_layers = max_layers;
    config.min_top_nodes = min_top_nodes;
    config.max_in_flight = max_in_flight;

    if (grouping == "recency") {
        return build_recency_tree(corpus, *emb, *summ, window, config);
    }
    if (grouping != "gmm") throw ConfigError("unknown grouping: " + grouping);
    return build_tree(corpus, *emb, *summ, config);
}

RetrievalResult query_py(const Tree& tree, const Vector& vector, const std::string& mode,
                         std::int64_t max_tokens, int top_k, int depth, int start_layer,
                         const std::vector<int>& layers) {
    QueryConfig config;
    config.mode = mode_from(mode);
    config.max_tokens = max_tokens;
    config.top_k = top_k;
    config.depth = depth;
    config.start_layer = start_layer;
    config.allowed_layers = layers;
    return retrieve(tree, vector, config);
}

py::dict stats_py(const Tree& tree) {
    const TreeStats stats = tree_stats(tree);
    py::dict out;
    out["nodes"] = tree.nodes.size();
    out["layers"] = stats.layer_node_counts;
    out["parent_count"] = stats.parent_count;
    out["avg_summary_tokens"] = stats.avg_summary_tokens;
    out["avg_child_tokens"] = stats.avg_child_tokens;
    out["avg_children_per_parent"] = stats.avg_children_per_parent;
    out["avg_compression_ratio"] = stats.avg_compression_ratio;
    out["documents"] = tree.provenance.size();
    out["grouping"] = tree.grouping;
    out["embedder"] = tree.providers.embedder_kind;
    out["embedding_dim"] = tree.providers.embedding_dim;
    out["summarizer"] = tree.providers.summarizer_kind;
    out["config_fingerprint"] = tree.config_fingerprint;
    return out;
}

}  // namespace

PYBIND11_MODULE(_raptor, m) {
    m.doc() = "hierarchical summarization index: build, persist, and query";

    // The base error is registered first so the more specific translators,
    // which run in reverse registration order, get the first look.
    const auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InvalidInputError>(m, "InvalidInputError", PyExc_ValueError);
    py::register_exception<ProviderError>(m, "ProviderError", base.ptr());
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<CorruptIndexError>(m, "CorruptIndexError", base.ptr());
    py::register_exception<UnsupportedVersionError>(m, "UnsupportedVersionError", base.ptr());

    py::class_<RetrievalResult>(m, "RetrievalResult")
        .def_readonly("ids", &RetrievalResult::selected)
        .def_readonly("scores", &RetrievalResult::scores)
        .def_readonly("total_tokens", &RetrievalResult::total_tokens)
        .def_readonly("layer_tally", &RetrievalResult::layer_tally)
        .def_readonly("stage_offsets", &RetrievalResult::stage_offsets)
        .def_readonly("ancestor_overlap", &RetrievalResult::ancestor_overlap)
        .def_property_readonly("mode",
                               [](const RetrievalResult& r) { return to_string(r.mode); })
        .def("__repr__", [](const RetrievalResult& r) {
            return "<RetrievalResult " + to_string(r.mode) + ", " +
                   std::to_string(r.selected.size()) + " nodes, " +
                   std::to_string(r.total_tokens) + " tokens>";
        });

    py::class_<Tree>(m, "Tree")
        .def_property_readonly("node_count", [](const Tree& t) { return t.nodes.size(); })
        .def_property_readonly("layer_counts",
                               [](const Tree& t) {
                                   std::vector<std::size_t> counts;
                                   for (const auto& layer : t.layers)
                                       counts.push_back(layer.size());
                                   return counts;
                               })
        .def_property_readonly("documents", [](const Tree& t) { return t.provenance; })
        .def_property_readonly("fingerprint",
                               [](const Tree& t) { return t.config_fingerprint; })
        .def("save", &save_tree, py::arg("path"),
             "Write the tree as a checksummed index file; \".gz\" compresses.")
        .def("stats", &stats_py, "Aggregate shape and compression statistics.")
        .def("query", &query_py, py::arg("vector"), py::kw_only(),
             py::arg("mode") = "collapsed", py::arg("max_tokens") = 2000, py::arg("top_k") = 5,
             py::arg("depth") = -1, py::arg("start_layer") = -1,
             py::arg("layers") = std::vector<int>{},
             "Retrieve the best nodes for an embedded query.")
        .def("context", &assemble_context, py::arg("result"),
             py::arg("document_order") = false,
             "Join a result's node texts into one retrieval context.")
        .def("node_text",
             [](const Tree& t, std::int64_t id) { return t.node(id).text; },
             py::arg("id"))
        .def("__len__", [](const Tree& t) { return t.nodes.size(); })
        .def("__repr__", [](const Tree& t) {
            return "<Tree " + std::to_string(t.nodes.size()) + " nodes, " +
                   std::to_string(t.layers.size()) + " layers>";
        });

    py::class_<MockEmbedder>(m, "MockEmbedder")
        .def(py::init([](int dimension, std::uint64_t seed, std::vector<std::string> topics,
                         double noise_scale) {
                 MockEmbedderConfig config;
                 config.dimension = dimension;
                 config.seed = seed;
                 config.topic_lexicon = std::move(topics);
                 config.noise_scale = noise_scale;
                 return MockEmbedder(config);
             }),
             py::kw_only(), py::arg("dimension") = 64, py::arg("seed") = 0,
             py::arg("topics") = std::vector<std::string>{}, py::arg("noise_scale") = 0.05)
        .def("embed", &MockEmbedder::embed, py::arg("texts"),
             "One vector per text, deterministic for this instance.")
        .def_property_readonly("dimension", &MockEmbedder::dimension)
        .def_property_readonly("kind", &MockEmbedder::kind);

    m.def("build", &build_py, py::arg("documents"), py::kw_only(), py::arg("seed"),
          py::arg("embedder") = "mock", py::arg("embed_dim") = 64,
          py::arg("embed_seed") = std::nullopt,
          py::arg("topics") = std::vector<std::string>{},
          py::arg("summarizer") = "mock-extractive", py::arg("max_summary_tokens") = 150,
          py::arg("chunk_budget") = 100, py::arg("max_layers") = 5,
          py::arg("min_top_nodes") = 5, py::arg("max_in_flight") = 8,
          py::arg("grouping") = "gmm", py::arg("window") = 7,
          "Build a summary tree over (doc_id, text) pairs.");
    m.def("load", &load_tree, py::arg("path"), "Load and revalidate a saved index.");
}
