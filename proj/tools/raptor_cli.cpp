// Command-line front end: build an index from a directory or file, query it,
// inspect its stats, and run the scaling benchmark and retrieval evaluations.
//
// Exit codes: 0 success, 1 bad configuration or input, 2 provider failure,
// 3 file I/O failure, 4 corrupt or unreadable index.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "raptor/errors.hpp"
#include "raptor/eval.hpp"
#include "raptor/http_providers.hpp"
#include "raptor/persistence.hpp"
#include "raptor/retrieval.hpp"
#include "raptor/rng.hpp"
#include "raptor/tree.hpp"

namespace fs = std::filesystem;
using namespace raptor;

namespace {

std::string fmt(double value, int digits = 4) {
    if (std::isnan(value)) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
    return buf;
}

std::vector<Document> read_corpus(const std::string& input) {
    const fs::path root(input);
    if (!fs::exists(root)) {
        throw ConfigError("input path does not exist: " + input);
    }
    auto read_file = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw IoError("cannot open " + p.string());
        std::ostringstream body;
        body << in.rdbuf();
        if (in.bad()) throw IoError("cannot read " + p.string());
        return body.str();
    };

    std::vector<Document> corpus;
    if (fs::is_regular_file(root)) {
        corpus.push_back({root.filename().string(), read_file(root)});
        return corpus;
    }
    if (!fs::is_directory(root)) {
        throw ConfigError("input path is neither a file nor a directory: " + input);
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().filename().string().front() != '.') {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& p : files) {
        corpus.push_back({fs::relative(p, root).string(), read_file(p)});
    }
    if (corpus.empty()) {
        throw InvalidInputError("no files found under: " + input);
    }
    return corpus;
}

struct ProviderFlags {
    std::string embedder = "mock";
    std::string summarizer = "mock-extractive";
    int embed_dim = 64;
    std::uint64_t embed_seed = 0;
    bool embed_seed_set = false;
    std::vector<std::string> topics;
    std::int64_t max_summary_tokens = 150;
};

std::unique_ptr<EmbeddingProvider> make_embedder(const ProviderFlags& flags,
                                                 std::uint64_t default_seed) {
    if (flags.embedder == "http") {
        HttpProviderConfig config;
        const char* url = std::getenv(kEmbedUrlEnv);
        if (!url || !*url) throw ConfigError(std::string(kEmbedUrlEnv) + " is not set");
        config.url = url;
        if (const char* key = std::getenv(kApiKeyEnv)) config.api_key = key;
        return std::make_unique<HttpEmbedder>(std::move(config));
    }
    MockEmbedderConfig config;
    config.dimension = flags.embed_dim;
    config.seed = flags.embed_seed_set ? flags.embed_seed : default_seed;
    if (flags.embedder == "mock-topic") {
        if (flags.topics.empty()) {
            throw ConfigError("--embedder mock-topic needs --topics");
        }
        config.topic_lexicon = flags.topics;
    } else if (flags.embedder != "mock") {
        throw ConfigError("unknown embedder kind: " + flags.embedder);
    }
    return std::make_unique<MockEmbedder>(config);
}

std::unique_ptr<SummarizationProvider> make_summarizer(const ProviderFlags& flags) {
    if (flags.summarizer == "http") {
        HttpProviderConfig config;
        const char* url = std::getenv(kLlmUrlEnv);
        if (!url || !*url) throw ConfigError(std::string(kLlmUrlEnv) + " is not set");
        config.url = url;
        if (const char* key = std::getenv(kApiKeyEnv)) config.api_key = key;
        return std::make_unique<HttpSummarizer>(std::move(config), flags.max_summary_tokens);
    }
    if (flags.summarizer == "mock-extractive") {
        return std::make_unique<MockExtractiveSummarizer>(flags.max_summary_tokens);
    }
    if (flags.summarizer == "mock-truncate") {
        return std::make_unique<MockTruncateSummarizer>(flags.max_summary_tokens);
    }
    throw ConfigError("unknown summarizer kind: " + flags.summarizer);
}

nlohmann::ordered_json stats_to_json(const Tree& tree, const TreeStats& stats) {
    return {{"nodes", tree.nodes.size()},
            {"layers", stats.layer_node_counts},
            {"parent_count", stats.parent_count},
            {"avg_summary_tokens", stats.avg_summary_tokens},
            {"avg_child_tokens", stats.avg_child_tokens},
            {"avg_children_per_parent", stats.avg_children_per_parent},
            {"avg_compression_ratio", stats.avg_compression_ratio},
            {"grouping", tree.grouping},
            {"recency_window", tree.recency_window},
            {"embedder", tree.providers.embedder_kind},
            {"embedding_dim", tree.providers.embedding_dim},
            {"summarizer", tree.providers.summarizer_kind},
            {"config_fingerprint", tree.config_fingerprint},
            {"documents", tree.provenance.size()}};
}

void print_stats_table(const Tree& tree, const TreeStats& stats) {
    std::ostringstream layers;
    for (std::size_t i = 0; i < stats.layer_node_counts.size(); ++i) {
        if (i) layers << ' ';
        layers << stats.layer_node_counts[i];
    }
    std::cout << "nodes: " << tree.nodes.size() << "  layer sizes: " << layers.str() << "\n"
              << "documents: " << tree.provenance.size() << "  grouping: " << tree.grouping
              << "\n"
              << "parents: " << stats.parent_count << "\n"
              << "avg summary tokens: " << fmt(stats.avg_summary_tokens) << "\n"
              << "avg child tokens: " << fmt(stats.avg_child_tokens) << "\n"
              << "avg children per parent: " << fmt(stats.avg_children_per_parent) << "\n"
              << "avg compression ratio: " << fmt(stats.avg_compression_ratio) << "\n"
              << "embedder: " << tree.providers.embedder_kind << " (dim "
              << tree.providers.embedding_dim << ")  summarizer: "
              << tree.providers.summarizer_kind << "\n"
              << "config fingerprint: " << tree.config_fingerprint << "\n";
}

// ---- build ----------------------------------------------------------------

struct BuildArgs {
    std::string input;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string grouping = "gmm";
    int window = 7;
    BuildConfig config;
    ProviderFlags providers;
    bool json = false;
};

int cmd_build(const BuildArgs& args) {
    const std::vector<Document> corpus = read_corpus(args.input);
    if (!args.seed_set &&
        (args.providers.embedder != "http" || args.providers.summarizer != "http")) {
        throw ConfigError("--seed is required for mock-provider builds");
    }
    auto embedder = make_embedder(args.providers, args.seed);
    auto summarizer = make_summarizer(args.providers);

    BuildConfig config = args.config;
    config.seed = args.seed;
    BuildReport report;
    const Tree tree =
        args.grouping == "recency"
            ? build_recency_tree(corpus, *embedder, *summarizer, args.window, config, &report)
            : build_tree(corpus, *embedder, *summarizer, config, &report);
    save_tree(tree, args.out);
    const TreeStats stats = tree_stats(tree);

    for (const std::string& warning : report.warnings) {
        std::cerr << "warning: " << warning << "\n";
    }
    std::cerr << "built in " << fmt(report.wall_seconds, 2) << "s\n";

    if (args.json) {
        nlohmann::ordered_json j;
        j["index"] = args.out;
        j["chunks"] = report.chunk_count;
        j["termination"] = report.termination;
        j["stats"] = stats_to_json(tree, stats);
        j["usage"] = {{"calls", report.summarizer_usage.calls},
                      {"prompt_tokens", report.summarizer_usage.prompt_tokens},
                      {"completion_tokens", report.summarizer_usage.completion_tokens}};
        j["warnings"] = report.warnings;
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    std::cout << "index written: " << args.out << "\n"
              << "chunks: " << report.chunk_count << "  termination: " << report.termination
              << "\n";
    print_stats_table(tree, stats);
    std::cout << "summarizer usage: " << report.summarizer_usage.calls << " calls, "
              << report.summarizer_usage.prompt_tokens << " prompt tokens, "
              << report.summarizer_usage.completion_tokens << " completion tokens\n";
    return 0;
}

// ---- query ----------------------------------------------------------------

struct QueryArgs {
    std::string index;
    std::string query_text;
    std::vector<double> query_vector;
    std::string mode = "collapsed";
    std::int64_t max_tokens = 2000;
    int top_k = 5;
    int depth = -1;
    int start_layer = -1;
    std::vector<int> layers;
    ProviderFlags providers;
    bool document_order = false;
    bool json = false;
};

RetrievalMode parse_mode(const std::string& name) {
    if (name == "collapsed") return RetrievalMode::collapsed;
    if (name == "traversal") return RetrievalMode::traversal;
    if (name == "layer_restricted") return RetrievalMode::layer_restricted;
    if (name == "flat") return RetrievalMode::flat;
    throw ConfigError("unknown retrieval mode: " + name);
}

int cmd_query(const QueryArgs& args) {
    if (args.query_text.empty() == args.query_vector.empty()) {
        throw ConfigError("give exactly one of --query or --query-vector");
    }
    const Tree tree = load_tree(args.index);

    Vector query = args.query_vector;
    if (query.empty()) {
        auto embedder = make_embedder(args.providers, args.providers.embed_seed);
        query = embedder->embed({args.query_text})[0];
    }

    QueryConfig config;
    config.mode = parse_mode(args.mode);
    config.max_tokens = args.max_tokens;
    config.top_k = args.top_k;
    config.depth = args.depth;
    config.start_layer = args.start_layer;
    config.allowed_layers = args.layers;
    const RetrievalResult result = retrieve(tree, query, config);

    if (args.json) {
        nlohmann::ordered_json j;
        j["mode"] = to_string(result.mode);
        j["ids"] = result.selected;
        j["scores"] = result.scores;
        nlohmann::ordered_json tally = nlohmann::ordered_json::object();
        for (const auto& [layer, count] : result.layer_tally) tally[std::to_string(layer)] = count;
        j["layer_tally"] = tally;
        j["total_tokens"] = result.total_tokens;
        if (result.mode == RetrievalMode::traversal) j["stage_offsets"] = result.stage_offsets;
        nlohmann::ordered_json overlap = nlohmann::ordered_json::array();
        for (const auto& [node, ancestor] : result.ancestor_overlap) {
            overlap.push_back({{"node", node}, {"ancestor", ancestor}});
        }
        j["ancestor_overlap"] = overlap;
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    std::cout << assemble_context(tree, result, args.document_order) << "\n";
    return 0;
}

// ---- stats ----------------------------------------------------------------

int cmd_stats(const std::string& index, bool json) {
    const Tree tree = load_tree(index);
    const TreeStats stats = tree_stats(tree);
    if (json) {
        std::cout << stats_to_json(tree, stats).dump(2) << "\n";
    } else {
        print_stats_table(tree, stats);
    }
    return 0;
}

// ---- bench scaling ---------------------------------------------------------

struct BenchArgs {
    std::vector<std::int64_t> sizes = {10000, 20000, 40000, 80000};
    std::uint64_t seed = 7;
    int chunks_per_topic = 10;
    std::string csv_path;
    bool json = false;
};

int cmd_bench_scaling(const BenchArgs& args) {
    ScalingConfig config;
    config.seed = args.seed;
    config.chunks_per_topic = args.chunks_per_topic;
    const EvalReport report = scaling_benchmark(args.sizes, config);

    if (!args.csv_path.empty()) {
        std::ofstream out(args.csv_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + args.csv_path);
        out << scaling_to_csv(report);
        if (!out) throw IoError("cannot write " + args.csv_path);
    }
    if (args.json) {
        std::cout << report_to_json(report);
        return 0;
    }
    std::printf("%10s %14s %10s %8s %8s\n", "length", "summary_tokens", "seconds", "chunks",
                "nodes");
    for (const ScalingRow& row : report.scaling) {
        std::printf("%10lld %14lld %10.3f %8lld %8lld\n",
                    static_cast<long long>(row.corpus_tokens),
                    static_cast<long long>(row.summarizer_tokens), row.wall_seconds,
                    static_cast<long long>(row.chunk_count),
                    static_cast<long long>(row.node_count));
    }
    auto print_fit = [](const char* name, const LinearFit& fit) {
        if (fit.defined) {
            std::cout << name << ": slope " << fmt(fit.slope, 6) << ", intercept "
                      << fmt(fit.intercept, 2) << ", r_squared " << fmt(fit.r_squared) << "\n";
        } else {
            std::cout << name << ": undefined (need two distinct lengths)\n";
        }
    };
    print_fit("token fit", report.token_fit);
    print_fit("time fit", report.time_fit);
    return 0;
}

// ---- eval recall / ablation -------------------------------------------------

struct EvalArgs {
    std::uint64_t seed = 0;
    int n_topics = 5;
    int chunks_per_topic = 20;
    bool contiguous = false;
    std::int64_t budget = 2000;
    std::string grouping = "recency";
    int window = 7;
    bool json = false;
};

struct EvalTree {
    SyntheticCorpus corpus;
    Tree tree;
    MockEmbedderConfig embedder_config;
};

EvalTree build_eval_tree(const EvalArgs& args, const std::string& grouping) {
    SyntheticCorpus corpus =
        generate_corpus(args.seed, args.n_topics, args.chunks_per_topic, !args.contiguous);
    MockEmbedderConfig ec;
    ec.seed = derive_seed(args.seed, "eval-embed");
    ec.topic_lexicon = corpus_lexicon(corpus);
    MockEmbedder embedder(ec);
    MockExtractiveSummarizer summarizer;
    BuildConfig config;
    config.seed = derive_seed(args.seed, "eval-build:" + grouping);
    Tree tree = grouping == "recency"
                    ? build_recency_tree(corpus.documents, embedder, summarizer, args.window,
                                         config)
                    : build_tree(corpus.documents, embedder, summarizer, config);
    return {std::move(corpus), std::move(tree), std::move(ec)};
}

void print_strategy_table(const EvalReport& report) {
    std::printf("%-12s %8s %8s %10s %8s\n", "strategy", "recall", "detail", "thematic",
                "queries");
    for (const StrategyScore& s : report.strategies) {
        std::printf("%-12s %8s %8s %10s %8lld\n", s.name.c_str(), fmt(s.recall).c_str(),
                    fmt(s.detail_recall).c_str(), fmt(s.thematic_recall).c_str(),
                    static_cast<long long>(s.detail_queries + s.thematic_queries));
    }
    for (const StrategyScore& s : report.strategies) {
        std::cout << s.name << " layer histogram:";
        for (const auto& [layer, pct] : s.layer_histogram) {
            std::cout << "  " << layer << ": " << fmt(pct, 2) << "%";
        }
        std::cout << "\n";
    }
}

int cmd_eval_recall(const EvalArgs& args) {
    EvalTree built = build_eval_tree(args, "gmm");
    MockEmbedder embedder(built.embedder_config);
    const std::vector<StrategySpec> strategies = {
        {"collapsed", &built.tree, {.mode = RetrievalMode::collapsed}},
        {"leaves_only", &built.tree, {.mode = RetrievalMode::flat}},
    };
    const EvalReport report = evaluate(built.corpus, strategies, embedder, args.budget);
    if (args.json) {
        std::cout << report_to_json(report);
    } else {
        print_strategy_table(report);
    }
    return 0;
}

int cmd_eval_ablation(const EvalArgs& args) {
    if (args.grouping != "recency") {
        throw ConfigError("unknown ablation grouping: " + args.grouping);
    }
    EvalTree clustered = build_eval_tree(args, "gmm");
    EvalTree baseline = build_eval_tree(args, args.grouping);
    MockEmbedder embedder(clustered.embedder_config);

    const std::vector<StrategySpec> strategies = {
        {"gmm", &clustered.tree, {.mode = RetrievalMode::collapsed}},
        {args.grouping, &baseline.tree, {.mode = RetrievalMode::collapsed}},
    };
    const EvalReport report = evaluate(clustered.corpus, strategies, embedder, args.budget);
    const double gmm_purity = parent_topic_purity(clustered.tree, clustered.corpus);
    const double baseline_purity = parent_topic_purity(baseline.tree, baseline.corpus);

    if (args.json) {
        nlohmann::ordered_json j = nlohmann::ordered_json::parse(report_to_json(report));
        j["parent_purity"] = {{"gmm", gmm_purity}, {args.grouping, baseline_purity}};
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    print_strategy_table(report);
    std::cout << "gmm parent purity: " << fmt(gmm_purity) << "\n"
              << args.grouping << " parent purity: " << fmt(baseline_purity) << "\n";
    return 0;
}

int dispatch(const std::function<int()>& command) {
    try {
        return command();
    } catch (const CorruptIndexError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const UnsupportedVersionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ProviderError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical summarization index: build, query, and evaluate"};
    app.require_subcommand(1);

    BuildArgs build_args;
    CLI::App* build = app.add_subcommand("build", "build an index from a file or directory");
    build->add_option("--input", build_args.input, "corpus file or directory")->required();
    build->add_option("--out", build_args.out, "index output path (.raptor.json or .gz)")
        ->required();
    auto* seed_opt = build->add_option("--seed", build_args.seed, "build seed");
    build->add_option("--embedder", build_args.providers.embedder, "mock | mock-topic | http")
        ->capture_default_str();
    build
        ->add_option("--summarizer", build_args.providers.summarizer,
                     "mock-extractive | mock-truncate | http")
        ->capture_default_str();
    build->add_option("--embed-dim", build_args.providers.embed_dim, "mock embedding dimension")
        ->capture_default_str();
    auto* embed_seed_opt =
        build->add_option("--embed-seed", build_args.providers.embed_seed,
                          "mock embedder seed (defaults to --seed)");
    build->add_option("--topics", build_args.providers.topics,
                      "comma-separated lexicon for mock-topic")
        ->delimiter(',');
    build
        ->add_option("--max-summary-tokens", build_args.providers.max_summary_tokens,
                     "summary token budget")
        ->capture_default_str();
    build->add_option("--chunk-tokens", build_args.config.chunk_budget, "tokens per leaf chunk")
        ->capture_default_str();
    build->add_option("--max-layers", build_args.config.max_layers, "total layer cap")
        ->capture_default_str();
    build
        ->add_option("--min-top-nodes", build_args.config.min_top_nodes,
                     "stop when a layer is this small")
        ->capture_default_str();
    build
        ->add_option("--max-in-flight", build_args.config.max_in_flight,
                     "concurrent summarization requests")
        ->capture_default_str();
    build->add_option("--grouping", build_args.grouping, "gmm | recency")
        ->check(CLI::IsMember({"gmm", "recency"}))
        ->capture_default_str();
    build->add_option("--window", build_args.window, "recency window size")
        ->capture_default_str();
    ClusteringConfig& cc = build_args.config.clustering;
    build->add_option("--membership-threshold", cc.membership_threshold,
                      "soft-assignment probability threshold")
        ->capture_default_str();
    build->add_option("--k-max", cc.k_max, "largest candidate cluster count")
        ->capture_default_str();
    build->add_option("--target-dim", cc.target_dim, "reduced dimension cap")
        ->capture_default_str();
    build->add_option("--n-neighbors-local", cc.n_neighbors_local, "local-pass neighborhood")
        ->capture_default_str();
    build->add_option("--max-recluster-depth", cc.max_recluster_depth,
                      "oversize re-clustering depth cap")
        ->capture_default_str();
    build->add_option("--summarizer-threshold", cc.summarizer_token_threshold,
                      "cluster token threshold for re-clustering")
        ->capture_default_str();
    build->add_option("--em-max-iters", cc.em_max_iters, "EM iteration cap")
        ->capture_default_str();
    build->add_option("--em-tol", cc.em_tol, "EM convergence tolerance per point")
        ->capture_default_str();
    build->add_option("--covariance-reg", cc.covariance_reg, "covariance regularization")
        ->capture_default_str();
    build->add_option("--n-init", cc.n_init, "EM restarts per candidate K")
        ->capture_default_str();
    build->add_option("--umap-epochs", cc.umap_epochs, "layout optimization epochs")
        ->capture_default_str();
    build->add_flag("--json", build_args.json, "machine-readable output");

    QueryArgs query_args;
    CLI::App* query = app.add_subcommand("query", "retrieve context for a query");
    query->add_option("--index", query_args.index, "index path")->required();
    query->add_option("--query", query_args.query_text, "query text (embedded by --embedder)");
    query
        ->add_option("--query-vector", query_args.query_vector,
                     "comma-separated query vector, bypassing the embedder")
        ->delimiter(',');
    query
        ->add_option("--mode", query_args.mode,
                     "collapsed | traversal | layer_restricted | flat")
        ->capture_default_str();
    query->add_option("--max-tokens", query_args.max_tokens, "retrieval token budget")
        ->capture_default_str();
    query->add_option("--top-k", query_args.top_k, "nodes per traversal stage")
        ->capture_default_str();
    query->add_option("--depth", query_args.depth, "traversal stages (-1: to the leaves)")
        ->capture_default_str();
    query->add_option("--start-layer", query_args.start_layer,
                      "traversal start layer (-1: top)")
        ->capture_default_str();
    query->add_option("--layers", query_args.layers, "allowed layers for layer_restricted")
        ->delimiter(',');
    query->add_option("--embedder", query_args.providers.embedder, "mock | mock-topic | http")
        ->capture_default_str();
    query->add_option("--embed-dim", query_args.providers.embed_dim, "mock embedding dimension")
        ->capture_default_str();
    auto* query_embed_seed =
        query->add_option("--embed-seed", query_args.providers.embed_seed, "mock embedder seed");
    query->add_option("--topics", query_args.providers.topics, "mock-topic lexicon")
        ->delimiter(',');
    query->add_flag("--document-order", query_args.document_order,
                    "order leaf context by source position");
    query->add_flag("--json", query_args.json, "machine-readable output");

    std::string stats_index;
    bool stats_json = false;
    CLI::App* stats = app.add_subcommand("stats", "print index statistics");
    stats->add_option("--index", stats_index, "index path")->required();
    stats->add_flag("--json", stats_json, "machine-readable output");

    BenchArgs bench_args;
    CLI::App* bench = app.add_subcommand("bench", "benchmarks");
    bench->require_subcommand(1);
    CLI::App* bench_scaling =
        bench->add_subcommand("scaling", "token and time cost vs corpus length");
    bench_scaling->add_option("--sizes", bench_args.sizes, "corpus lengths in tokens")
        ->delimiter(',')
        ->capture_default_str();
    bench_scaling->add_option("--seed", bench_args.seed, "benchmark seed")->capture_default_str();
    bench_scaling
        ->add_option("--chunks-per-topic", bench_args.chunks_per_topic, "corpus topic granularity")
        ->capture_default_str();
    bench_scaling->add_option("--csv", bench_args.csv_path, "also write a CSV report here");
    bench_scaling->add_flag("--json", bench_args.json, "machine-readable output");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "retrieval evaluations on a seeded corpus");
    eval->require_subcommand(1);
    CLI::App* eval_recall =
        eval->add_subcommand("recall", "recall of full-tree vs leaves-only retrieval");
    CLI::App* eval_ablation =
        eval->add_subcommand("ablation", "clustered grouping vs a positional baseline");
    for (CLI::App* sub : {eval_recall, eval_ablation}) {
        sub->add_option("--seed", eval_args.seed, "corpus and build seed")->required();
        sub->add_option("--n-topics", eval_args.n_topics, "planted topics")
            ->capture_default_str();
        sub->add_option("--chunks-per-topic", eval_args.chunks_per_topic, "chunks per topic")
            ->capture_default_str();
        sub->add_flag("--contiguous", eval_args.contiguous,
                      "keep each topic's chunks adjacent instead of interleaving");
        sub->add_option("--budget", eval_args.budget, "retrieval token budget")
            ->capture_default_str();
        sub->add_flag("--json", eval_args.json, "machine-readable output");
    }
    eval_ablation->add_option("--grouping", eval_args.grouping, "baseline grouping (recency)")
        ->capture_default_str();
    eval_ablation->add_option("--window", eval_args.window, "recency window size")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    build_args.seed_set = seed_opt->count() > 0;
    build_args.providers.embed_seed_set = embed_seed_opt->count() > 0;
    query_args.providers.embed_seed_set = query_embed_seed->count() > 0;

    if (build->parsed()) return dispatch([&] { return cmd_build(build_args); });
    if (query->parsed()) return dispatch([&] { return cmd_query(query_args); });
    if (stats->parsed()) return dispatch([&] { return cmd_stats(stats_index, stats_json); });
    if (bench->parsed() && bench_scaling->parsed()) {
        return dispatch([&] { return cmd_bench_scaling(bench_args); });
    }
    if (eval->parsed() && eval_recall->parsed()) {
        return dispatch([&] { return cmd_eval_recall(eval_args); });
    }
    if (eval->parsed() && eval_ablation->parsed()) {
        return dispatch([&] { return cmd_eval_ablation(eval_args); });
    }
    std::cerr << "error: no command given\n";
    return 1;
}
