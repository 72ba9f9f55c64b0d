#include "raptor/http_providers.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "raptor/errors.hpp"

namespace raptor {

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    if (url.rfind("https://", 0) == 0) {
        throw ConfigError("http provider: https endpoints are not supported in this build: " + url);
    }
    const std::string scheme = "http://";
    if (url.rfind(scheme, 0) != 0 || url.size() == scheme.size()) {
        throw ConfigError("http provider: URL must look like http://host[:port]/path, got '" +
                          url + "'");
    }
    const auto slash = url.find('/', scheme.size());
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

void validate_config(const HttpProviderConfig& config) {
    split_url(config.url);
    if (config.max_attempts < 1) {
        throw ConfigError("http provider: max_attempts must be >= 1");
    }
    if (config.initial_backoff_ms < 0 || config.timeout_seconds < 1) {
        throw ConfigError("http provider: backoff must be >= 0 and timeout >= 1");
    }
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

// POST the body, retrying transport failures and 429/5xx with exponential
// backoff; returns the body of a 2xx response.
std::string post_json(const HttpProviderConfig& config, const std::string& body) {
    const SplitUrl url = split_url(config.url);
    std::string last_error;
    int backoff_ms = config.initial_backoff_ms;
    for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        httplib::Client client(url.base);
        client.set_connection_timeout(config.timeout_seconds, 0);
        client.set_read_timeout(config.timeout_seconds, 0);
        client.set_write_timeout(config.timeout_seconds, 0);
        httplib::Headers headers;
        if (!config.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + config.api_key);
        }
        httplib::Result res = client.Post(url.path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) return res->body;
        last_error = "HTTP " + std::to_string(res->status);
        if (!res->body.empty()) last_error += ": " + res->body.substr(0, 200);
        if (!retryable_status(res->status)) {
            throw ProviderError(config.url + ": " + last_error);
        }
    }
    throw ProviderError(config.url + ": giving up after " + std::to_string(config.max_attempts) +
                        " attempts (" + last_error + ")");
}

nlohmann::json parse_response(const std::string& url, const std::string& body) {
    nlohmann::json parsed = nlohmann::json::parse(body, nullptr, false);
    if (parsed.is_discarded()) {
        throw ProviderError(url + ": response is not valid JSON");
    }
    return parsed;
}

std::string env_or_empty(const char* name) {
    const char* value = std::getenv(name);
    return value ? std::string(value) : std::string();
}

std::string require_env(const char* name) {
    std::string value = env_or_empty(name);
    if (value.empty()) {
        throw ConfigError(std::string(name) + " is not set");
    }
    return value;
}

}  // namespace

HttpEmbedder::HttpEmbedder(HttpProviderConfig config, int expected_dimension)
    : config_(std::move(config)), dimension_(expected_dimension) {
    validate_config(config_);
    if (expected_dimension < 0) {
        throw ConfigError("http embedder: expected_dimension must be >= 0");
    }
}

HttpEmbedder HttpEmbedder::from_env() {
    HttpProviderConfig config;
    config.url = require_env(kEmbedUrlEnv);
    config.api_key = env_or_empty(kApiKeyEnv);
    return HttpEmbedder(std::move(config));
}

std::vector<Vector> HttpEmbedder::embed_impl(const std::vector<std::string>& texts) {
    nlohmann::json body;
    if (!config_.model.empty()) body["model"] = config_.model;
    body["input"] = texts;
    const nlohmann::json response = parse_response(config_.url, post_json(config_, body.dump()));

    std::vector<Vector> out(texts.size());
    try {
        if (!response.contains("data") || !response["data"].is_array()) {
            throw ProviderError(config_.url + ": response has no data array");
        }
        const auto& data = response["data"];
        if (data.size() != texts.size()) {
            throw ProviderError(config_.url + ": got " + std::to_string(data.size()) +
                                " embeddings for " + std::to_string(texts.size()) + " texts");
        }
        std::vector<bool> seen(texts.size(), false);
        std::size_t pos = 0;
        for (const auto& item : data) {
            std::size_t index = pos++;
            if (item.contains("index")) index = item.at("index").get<std::size_t>();
            if (index >= out.size() || seen[index]) {
                throw ProviderError(config_.url + ": bad embedding index " +
                                    std::to_string(index));
            }
            seen[index] = true;
            out[index] = item.at("embedding").get<Vector>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(config_.url + ": malformed embeddings response: " + e.what());
    }

    if (!out.empty() && !out[0].empty()) {
        int expected = 0;
        dimension_.compare_exchange_strong(expected, static_cast<int>(out[0].size()));
    }
    return out;
}

HttpSummarizer::HttpSummarizer(HttpProviderConfig config, std::int64_t max_tokens)
    : config_(std::move(config)), max_tokens_(max_tokens) {
    validate_config(config_);
    if (max_tokens_ < 1) {
        throw ConfigError("http summarizer: max_summary_tokens must be >= 1");
    }
}

HttpSummarizer HttpSummarizer::from_env() {
    HttpProviderConfig config;
    config.url = require_env(kLlmUrlEnv);
    config.api_key = env_or_empty(kApiKeyEnv);
    return HttpSummarizer(std::move(config));
}

SummarizationProvider::SummaryOutput HttpSummarizer::summarize_impl(const std::string& context) {
    nlohmann::json body;
    if (!config_.model.empty()) body["model"] = config_.model;
    body["messages"] = nlohmann::json::array(
        {{{"role", "system"}, {"content", std::string(kSummarySystemPrompt)}},
         {{"role", "user"}, {"content", render_summary_user_message(context)}}});
    body["temperature"] = 0;
    body["max_tokens"] = max_tokens_;
    const nlohmann::json response = parse_response(config_.url, post_json(config_, body.dump()));

    try {
        if (!response.contains("choices") || !response["choices"].is_array() ||
            response["choices"].empty()) {
            throw ProviderError(config_.url + ": response has no choices");
        }
        SummaryOutput out;
        out.text = response["choices"][0].at("message").at("content").get<std::string>();
        if (response.contains("usage")) {
            const auto& usage = response["usage"];
            if (usage.contains("prompt_tokens") && usage.contains("completion_tokens")) {
                out.usage = std::make_pair(usage.at("prompt_tokens").get<std::int64_t>(),
                                           usage.at("completion_tokens").get<std::int64_t>());
            }
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(config_.url + ": malformed completion response: " + e.what());
    }
}

}  // namespace raptor
