#include "raptor/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "raptor/errors.hpp"
#include "raptor/rng.hpp"
#include "raptor/tokenizer.hpp"

namespace raptor {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

Vector gaussian_vector(std::uint64_t seed, int dim) {
    SplitMix64 rng(seed);
    Vector v(static_cast<std::size_t>(dim));
    for (auto& x : v) x = rng.next_gaussian();
    return v;
}

Vector unit_gaussian_vector(std::uint64_t seed, int dim) {
    Vector v = gaussian_vector(seed, dim);
    normalize_in_place(v);
    return v;
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InvalidInputError("cosine_similarity: dimension mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw InvalidInputError("cosine_similarity: zero vector");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void normalize_in_place(Vector& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return;
    for (double& x : v) x /= norm;
}

std::vector<Vector> EmbeddingProvider::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw InvalidInputError("embed: empty batch");
    }
    for (const auto& t : texts) {
        if (is_blank(t)) throw InvalidInputError("embed: text is empty after trimming");
    }
    auto out = embed_impl(texts);
    if (out.size() != texts.size()) {
        throw ProviderError("embed: provider returned " + std::to_string(out.size()) +
                            " vectors for " + std::to_string(texts.size()) + " texts");
    }
    const auto dim = static_cast<std::size_t>(dimension());
    for (const auto& v : out) {
        if (v.empty()) {
            throw ProviderError("embed: provider returned an empty vector");
        }
        if (v.size() != dim) {
            throw ProviderError("embed: provider returned vector of dimension " +
                                std::to_string(v.size()) + ", expected " + std::to_string(dim));
        }
    }
    return out;
}

MockEmbedder::MockEmbedder(MockEmbedderConfig config) : config_(std::move(config)) {
    if (config_.dimension < 1) throw ConfigError("mock embedder dimension must be >= 1");
    for (const auto& term : config_.topic_lexicon) {
        const std::string key = to_lower(term);
        centroids_.emplace(key, unit_gaussian_vector(derive_seed(config_.seed, "topic:" + key),
                                                     config_.dimension));
    }
}

Vector MockEmbedder::topic_centroid(const std::string& term) const {
    auto it = centroids_.find(to_lower(term));
    if (it == centroids_.end()) {
        throw InvalidInputError("topic_centroid: unknown term '" + term + "'");
    }
    return it->second;
}

Vector MockEmbedder::embed_one(const std::string& text) const {
    const int dim = config_.dimension;
    if (!centroids_.empty()) {
        Vector acc(static_cast<std::size_t>(dim), 0.0);
        bool hit = false;
        for (const auto& tok : tokenize(text)) {
            auto it = centroids_.find(to_lower(tok));
            if (it == centroids_.end()) continue;
            hit = true;
            for (int d = 0; d < dim; ++d) acc[static_cast<std::size_t>(d)] += it->second[static_cast<std::size_t>(d)];
        }
        if (hit) {
            normalize_in_place(acc);
            const Vector noise =
                unit_gaussian_vector(derive_seed(config_.seed, "text:" + text), dim);
            for (int d = 0; d < dim; ++d) {
                acc[static_cast<std::size_t>(d)] += config_.noise_scale * noise[static_cast<std::size_t>(d)];
            }
            normalize_in_place(acc);
            return acc;
        }
    }
    return unit_gaussian_vector(derive_seed(config_.seed, "text:" + text), dim);
}

std::vector<Vector> MockEmbedder::embed_impl(const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

}  // namespace raptor
