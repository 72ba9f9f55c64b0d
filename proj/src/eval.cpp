#include "raptor/eval.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string_view>
#include <unordered_map>

#include "json.hpp"
#include "raptor/errors.hpp"
#include "raptor/rng.hpp"
#include "raptor/summarization.hpp"
#include "raptor/tokenizer.hpp"

namespace raptor {

namespace {

constexpr std::array<std::string_view, 24> kTopicWords = {
    "rivers",  "volcano", "glacier", "harbor",  "orchid", "falcon",
    "granite", "monsoon", "aurora",  "tundra",  "comet",  "lagoon",
    "meadow",  "cavern",  "cyclone", "reef",    "dune",   "fjord",
    "geyser",  "savanna", "quartz",  "delta",   "marsh",  "basalt",
};

constexpr std::array<std::string_view, 30> kFillerWords = {
    "survey",   "station", "records",  "measured", "readings", "gradient",
    "samples",  "archive", "seasonal", "baseline", "contour",  "interval",
    "profile",  "sector",  "transect", "outlook",  "margin",   "plateau",
    "basin",    "terrace", "drift",    "ridge",    "axis",     "footing",
    "span",     "grid",    "index",    "bearing",  "datum",    "crest",
};

std::string topic_name(int t) {
    if (t < static_cast<int>(kTopicWords.size())) return std::string(kTopicWords[t]);
    return "region" + std::to_string(t);
}

std::string capitalized(std::string word) {
    if (!word.empty()) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
    return word;
}

// Three templated sentences anchored on the topic keyword, with a unique
// marker token in the middle sentence for pinpoint queries.
std::string make_chunk_text(const std::string& topic, int marker, SplitMix64& rng) {
    std::string out;
    for (int s = 0; s < 3; ++s) {
        std::string sentence = capitalized(topic);
        for (int w = 0; w < 24; ++w) {
            sentence += ' ';
            sentence += kFillerWords[rng.next_below(kFillerWords.size())];
        }
        if (s == 1) sentence += " mk" + std::to_string(marker);
        sentence += '.';
        if (s > 0) out += ' ';
        out += sentence;
    }
    return out;
}

// Largest subset of pairwise non-adjacent document positions, greedily.
int non_adjacent_span(std::vector<int> positions) {
    std::sort(positions.begin(), positions.end());
    int picks = 0;
    int last = std::numeric_limits<int>::min();
    for (int p : positions) {
        if (last == std::numeric_limits<int>::min() || p > last + 1) {
            ++picks;
            last = p;
        }
    }
    return picks;
}

double mean_or_zero(double sum, std::int64_t count) {
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

nlohmann::ordered_json fit_to_json(const LinearFit& fit) {
    if (!fit.defined) return nullptr;
    return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}};
}

}  // namespace

SyntheticCorpus generate_corpus(std::uint64_t seed, int n_topics, int chunks_per_topic,
                                bool shuffle) {
    if (n_topics < 1) throw ConfigError("generate_corpus: n_topics must be >= 1");
    if (chunks_per_topic < 1) throw ConfigError("generate_corpus: chunks_per_topic must be >= 1");

    SyntheticCorpus corpus;
    corpus.seed = seed;

    std::vector<std::string> topics(n_topics);
    for (int t = 0; t < n_topics; ++t) topics[t] = topic_name(t);

    // Document order: contiguous topic blocks, or round-robin interleaved so
    // no topic ever holds two consecutive positions (for n_topics > 1).
    std::vector<std::pair<int, int>> order;  // (topic, chunk index within topic)
    order.reserve(static_cast<std::size_t>(n_topics) * chunks_per_topic);
    if (shuffle) {
        for (int j = 0; j < chunks_per_topic; ++j)
            for (int t = 0; t < n_topics; ++t) order.emplace_back(t, j);
    } else {
        for (int t = 0; t < n_topics; ++t)
            for (int j = 0; j < chunks_per_topic; ++j) order.emplace_back(t, j);
    }

    SplitMix64 text_rng(derive_seed(seed, "corpus-text"));
    std::map<std::string, std::vector<int>> topic_positions;
    for (int pos = 0; pos < static_cast<int>(order.size()); ++pos) {
        const auto [t, j] = order[pos];
        const int marker = t * chunks_per_topic + j;
        const std::string doc_id = topics[t] + "-" + std::to_string(j);
        corpus.documents.push_back({doc_id, make_chunk_text(topics[t], marker, text_rng)});
        corpus.planted_topics[topics[t]].push_back(doc_id);
        topic_positions[topics[t]].push_back(pos);
    }

    SplitMix64 query_rng(derive_seed(seed, "corpus-queries"));
    for (int t = 0; t < n_topics; ++t) {
        const std::string& topic = topics[t];
        const std::vector<std::string>& ids = corpus.planted_topics[topic];

        const int n_detail = std::min<int>(2, chunks_per_topic);
        int first = static_cast<int>(query_rng.next_below(static_cast<std::uint64_t>(chunks_per_topic)));
        for (int q = 0; q < n_detail; ++q) {
            const int j = (first + q) % chunks_per_topic;
            const int marker = t * chunks_per_topic + j;
            corpus.queries.push_back({topic + " station mk" + std::to_string(marker) + " detail",
                                      {ids[static_cast<std::size_t>(j)]},
                                      "detail"});
        }

        if (non_adjacent_span(topic_positions[topic]) >= 3) {
            corpus.queries.push_back({topic + " overview across sites", ids, "thematic"});
            corpus.queries.push_back({topic + " recurring themes summary", ids, "thematic"});
        }
    }
    return corpus;
}

std::vector<std::string> corpus_lexicon(const SyntheticCorpus& corpus) {
    std::vector<std::string> topics;
    topics.reserve(corpus.planted_topics.size());
    for (const auto& [topic, ids] : corpus.planted_topics) topics.push_back(topic);
    return topics;  // map keys are already sorted
}

std::set<std::string> covered_documents(const Tree& tree, const std::vector<std::int64_t>& selected) {
    std::set<std::string> covered;
    std::vector<std::int64_t> stack(selected.begin(), selected.end());
    std::set<std::int64_t> seen;
    while (!stack.empty()) {
        const std::int64_t id = stack.back();
        stack.pop_back();
        if (!seen.insert(id).second) continue;
        const Node& node = tree.node(id);
        if (node.children.empty()) {
            covered.insert(node.doc_id);
        } else {
            stack.insert(stack.end(), node.children.begin(), node.children.end());
        }
    }
    return covered;
}

double coverage_recall(const Tree& tree, const std::vector<std::int64_t>& selected,
                       const std::vector<std::string>& relevant) {
    if (relevant.empty()) throw InvalidInputError("coverage_recall: empty relevant set");
    const std::set<std::string> covered = covered_documents(tree, selected);
    const std::set<std::string> wanted(relevant.begin(), relevant.end());
    std::int64_t hit = 0;
    for (const std::string& id : wanted) {
        if (covered.count(id)) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(wanted.size());
}

LinearFit fit_least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    LinearFit fit;
    if (x.size() != y.size() || x.size() < 2) return fit;
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) return fit;  // all x equal, slope undefined
    fit.defined = true;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double pred = fit.slope * x[i] + fit.intercept;
        ss_res += (y[i] - pred) * (y[i] - pred);
        ss_tot += (y[i] - my) * (y[i] - my);
    }
    fit.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

EvalReport evaluate(const SyntheticCorpus& corpus, const std::vector<StrategySpec>& strategies,
                    EmbeddingProvider& embedder, std::int64_t budget) {
    if (strategies.empty()) throw InvalidInputError("evaluate: no strategies given");
    for (const StrategySpec& spec : strategies) {
        if (spec.tree == nullptr)
            throw InvalidInputError("evaluate: strategy '" + spec.name + "' has no tree");
    }
    if (budget < 0) throw ConfigError("evaluate: budget must be >= 0");

    EvalReport report;
    report.seed = corpus.seed;
    report.budget = budget;

    std::vector<Vector> query_vectors;
    if (!corpus.queries.empty()) {
        std::vector<std::string> texts;
        texts.reserve(corpus.queries.size());
        for (const EvalQuery& q : corpus.queries) texts.push_back(q.text);
        query_vectors = embedder.embed(texts);
    }

    for (const StrategySpec& spec : strategies) {
        StrategyScore score;
        score.name = spec.name;
        double total = 0, detail = 0, thematic = 0;
        std::int64_t n_total = 0;
        std::vector<RetrievalResult> results;
        results.reserve(corpus.queries.size());
        for (std::size_t i = 0; i < corpus.queries.size(); ++i) {
            const EvalQuery& q = corpus.queries[i];
            QueryConfig qc = spec.query;
            qc.max_tokens = budget;
            RetrievalResult r = retrieve(*spec.tree, query_vectors[i], qc);
            const double rec = coverage_recall(*spec.tree, r.selected, q.relevant);
            total += rec;
            ++n_total;
            if (q.kind == "thematic") {
                thematic += rec;
                ++score.thematic_queries;
            } else {
                detail += rec;
                ++score.detail_queries;
            }
            results.push_back(std::move(r));
        }
        score.recall = mean_or_zero(total, n_total);
        score.detail_recall = mean_or_zero(detail, score.detail_queries);
        score.thematic_recall = mean_or_zero(thematic, score.thematic_queries);
        if (!results.empty()) score.layer_histogram = layer_histogram(results);
        report.strategies.push_back(std::move(score));
    }
    return report;
}

EvalReport scaling_benchmark(const std::vector<std::int64_t>& lengths,
                             const ScalingConfig& config) {
    if (lengths.empty()) throw ConfigError("scaling_benchmark: no corpus lengths given");
    for (std::int64_t len : lengths) {
        if (len <= 0) throw ConfigError("scaling_benchmark: corpus lengths must be positive");
    }
    if (config.chunks_per_topic < 1)
        throw ConfigError("scaling_benchmark: chunks_per_topic must be >= 1");

    // One probe chunk tells us the (constant) chunk size of the generator.
    const SyntheticCorpus probe = generate_corpus(config.seed, 1, 1, false);
    const std::int64_t tokens_per_chunk = count_tokens(probe.documents[0].text);

    EvalReport report;
    report.seed = config.seed;
    for (std::int64_t target : lengths) {
        const std::int64_t n_chunks =
            std::max<std::int64_t>(1, (target + tokens_per_chunk / 2) / tokens_per_chunk);
        const int n_topics = static_cast<int>(
            (n_chunks + config.chunks_per_topic - 1) / config.chunks_per_topic);
        const SyntheticCorpus corpus = generate_corpus(
            derive_seed(config.seed, "bench:" + std::to_string(target)), n_topics,
            config.chunks_per_topic, true);
        // The generator emits whole topics; trim the interleaved tail so the
        // corpus length actually tracks the requested one.
        const std::vector<Document> documents(
            corpus.documents.begin(),
            corpus.documents.begin() + static_cast<std::ptrdiff_t>(n_chunks));

        MockEmbedderConfig ec;
        ec.seed = derive_seed(config.seed, "bench-embed");
        ec.topic_lexicon = corpus_lexicon(corpus);
        MockEmbedder embedder(ec);
        MockExtractiveSummarizer summarizer;

        BuildConfig bc = config.build;
        bc.seed = derive_seed(config.seed, "bench-build:" + std::to_string(target));
        BuildReport build_report;
        const Tree tree = build_tree(documents, embedder, summarizer, bc, &build_report);

        ScalingRow row;
        for (const Document& doc : documents) row.corpus_tokens += count_tokens(doc.text);
        row.summarizer_tokens = build_report.summarizer_usage.total_tokens();
        row.wall_seconds = build_report.wall_seconds;
        row.chunk_count = build_report.chunk_count;
        row.node_count = static_cast<std::int64_t>(tree.nodes.size());
        report.scaling.push_back(row);
    }

    std::sort(report.scaling.begin(), report.scaling.end(),
              [](const ScalingRow& a, const ScalingRow& b) {
                  return a.corpus_tokens < b.corpus_tokens;
              });

    std::vector<double> x, tokens, seconds;
    for (const ScalingRow& row : report.scaling) {
        x.push_back(static_cast<double>(row.corpus_tokens));
        tokens.push_back(static_cast<double>(row.summarizer_tokens));
        seconds.push_back(row.wall_seconds);
    }
    report.token_fit = fit_least_squares(x, tokens);
    report.time_fit = fit_least_squares(x, seconds);
    return report;
}

double parent_topic_purity(const Tree& tree, const SyntheticCorpus& corpus) {
    std::unordered_map<std::string, std::string> topic_of;
    for (const auto& [topic, ids] : corpus.planted_topics) {
        for (const std::string& id : ids) topic_of[id] = topic;
    }

    // Distinct descendant leaves per node, built bottom-up layer by layer.
    std::unordered_map<std::int64_t, std::set<std::int64_t>> leaves_below;
    double purity_sum = 0;
    std::int64_t parent_count = 0;
    for (std::size_t layer = 0; layer < tree.layers.size(); ++layer) {
        for (std::int64_t id : tree.layers[layer]) {
            const Node& node = tree.node(id);
            if (node.children.empty()) {
                leaves_below[id] = {id};
                continue;
            }
            std::set<std::int64_t>& mine = leaves_below[id];
            for (std::int64_t child : node.children) {
                const std::set<std::int64_t>& sub = leaves_below.at(child);
                mine.insert(sub.begin(), sub.end());
            }
            std::map<std::string, std::int64_t> counts;
            for (std::int64_t leaf : mine) {
                auto it = topic_of.find(tree.node(leaf).doc_id);
                if (it != topic_of.end()) ++counts[it->second];
            }
            std::int64_t best = 0, covered = 0;
            for (const auto& [topic, n] : counts) {
                best = std::max(best, n);
                covered += n;
            }
            if (covered > 0) {
                purity_sum += static_cast<double>(best) / static_cast<double>(covered);
                ++parent_count;
            }
        }
    }
    if (parent_count == 0) return std::numeric_limits<double>::quiet_NaN();
    return purity_sum / static_cast<double>(parent_count);
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["seed"] = report.seed;
    j["budget"] = report.budget;
    j["strategies"] = nlohmann::ordered_json::array();
    for (const StrategyScore& s : report.strategies) {
        nlohmann::ordered_json hist = nlohmann::ordered_json::object();
        for (const auto& [layer, pct] : s.layer_histogram) hist[std::to_string(layer)] = pct;
        j["strategies"].push_back({{"name", s.name},
                                   {"recall", s.recall},
                                   {"detail_recall", s.detail_recall},
                                   {"thematic_recall", s.thematic_recall},
                                   {"detail_queries", s.detail_queries},
                                   {"thematic_queries", s.thematic_queries},
                                   {"layer_histogram", hist}});
    }
    j["scaling"] = nlohmann::ordered_json::array();
    for (const ScalingRow& row : report.scaling) {
        j["scaling"].push_back({{"length", row.corpus_tokens},
                                {"summarizer_tokens", row.summarizer_tokens},
                                {"wall_seconds", row.wall_seconds},
                                {"chunks", row.chunk_count},
                                {"nodes", row.node_count}});
    }
    j["token_fit"] = fit_to_json(report.token_fit);
    j["time_fit"] = fit_to_json(report.time_fit);
    return j.dump(2) + "\n";
}

std::string scaling_to_csv(const EvalReport& report) {
    std::string out = "length,tokens,seconds,r_squared\n";
    char buf[128];
    for (const ScalingRow& row : report.scaling) {
        std::snprintf(buf, sizeof(buf), "%lld,%lld,%.6f,",
                      static_cast<long long>(row.corpus_tokens),
                      static_cast<long long>(row.summarizer_tokens), row.wall_seconds);
        out += buf;
        if (report.token_fit.defined) {
            std::snprintf(buf, sizeof(buf), "%.6f", report.token_fit.r_squared);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

}  // namespace raptor
