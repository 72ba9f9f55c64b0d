#pragma once

#include <atomic>
#include <cstdint>
#include <string>

#include "raptor/embedding.hpp"
#include "raptor/summarization.hpp"

namespace raptor {

struct HttpProviderConfig {
    std::string url;      // full endpoint URL, e.g. http://host:8080/v1/embeddings
    std::string api_key;  // sent as a bearer token when non-empty
    std::string model;    // passed through in the request body when non-empty
    int max_attempts = 3;
    int initial_backoff_ms = 1000;  // doubles after each failed attempt
    int timeout_seconds = 120;
};

// Environment variables read by the from_env factories.
inline constexpr const char* kEmbedUrlEnv = "RAPTOR_EMBED_URL";
inline constexpr const char* kLlmUrlEnv = "RAPTOR_LLM_URL";
inline constexpr const char* kApiKeyEnv = "RAPTOR_API_KEY";

// Client for a JSON embeddings endpoint: posts {"input": [texts...]} and
// reads {"data": [{"index": i, "embedding": [floats...]}, ...]}, reordering
// by index. Transport failures and 429/5xx responses are retried with
// exponential backoff up to max_attempts, then raise ProviderError; other
// non-2xx responses fail immediately.
class HttpEmbedder : public EmbeddingProvider {
public:
    // expected_dimension 0 means: learn the dimension from the first
    // response (dimension() reports 0 until then).
    explicit HttpEmbedder(HttpProviderConfig config, int expected_dimension = 0);

    // Reads RAPTOR_EMBED_URL (required) and RAPTOR_API_KEY (optional).
    static HttpEmbedder from_env();

    int dimension() const override { return dimension_.load(); }
    std::string kind() const override { return "http"; }

protected:
    std::vector<Vector> embed_impl(const std::vector<std::string>& texts) override;

private:
    HttpProviderConfig config_;
    std::atomic<int> dimension_;
};

// Client for a JSON chat-completions endpoint. Every call sends the fixed
// system and user summary messages at temperature 0 and reads
// choices[0].message.content; token usage reported by the server is metered
// verbatim, otherwise counted locally. Retry policy as for HttpEmbedder.
class HttpSummarizer : public SummarizationProvider {
public:
    explicit HttpSummarizer(HttpProviderConfig config, std::int64_t max_tokens = 150);

    // Reads RAPTOR_LLM_URL (required) and RAPTOR_API_KEY (optional).
    static HttpSummarizer from_env();

    std::string kind() const override { return "http"; }
    std::int64_t max_summary_tokens() const override { return max_tokens_; }

protected:
    SummaryOutput summarize_impl(const std::string& context) override;

private:
    HttpProviderConfig config_;
    std::int64_t max_tokens_;
};

}  // namespace raptor
