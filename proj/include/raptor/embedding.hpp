#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace raptor {

using Vector = std::vector<double>;

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Scale a vector to unit norm. Zero vectors are returned unchanged.
void normalize_in_place(Vector& v);

// Pluggable embedding backend. Implementations must be deterministic per
// instance (same text, same vector), emit a constant dimension, and be safe
// for concurrent calls.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    // One vector per text, order preserved. Throws InvalidInputError on an
    // empty batch or a text that is empty after trimming.
    std::vector<Vector> embed(const std::vector<std::string>& texts);

    virtual int dimension() const = 0;
    virtual std::string kind() const = 0;

protected:
    virtual std::vector<Vector> embed_impl(const std::vector<std::string>& texts) = 0;
};

struct MockEmbedderConfig {
    int dimension = 64;
    std::uint64_t seed = 0;
    // Terms with planted centroids. Empty lexicon means pure hash mode:
    // every text maps to an independent pseudo-random unit vector.
    std::vector<std::string> topic_lexicon;
    double noise_scale = 0.05;
};

// Offline deterministic embedder. Hash mode draws a seeded pseudo-random
// unit vector per text. When a topic lexicon is configured, a text embeds
// near the combined centroid of the lexicon terms it mentions, weighted by
// mention count, plus small per-text noise; texts mentioning no known term
// fall back to hash mode. Identical across runs given (seed, dimension).
class MockEmbedder : public EmbeddingProvider {
public:
    explicit MockEmbedder(MockEmbedderConfig config);

    int dimension() const override { return config_.dimension; }
    std::string kind() const override { return config_.topic_lexicon.empty() ? "mock" : "mock-topic"; }
    const MockEmbedderConfig& config() const { return config_; }

    // The planted unit centroid for a lexicon term.
    Vector topic_centroid(const std::string& term) const;

protected:
    std::vector<Vector> embed_impl(const std::vector<std::string>& texts) override;

private:
    Vector embed_one(const std::string& text) const;

    MockEmbedderConfig config_;
    std::unordered_map<std::string, Vector> centroids_;
};

}  // namespace raptor
