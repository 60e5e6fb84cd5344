#pragma once
// Live chat-completion client (OpenAI-style POST) with bounded retries.

#include <chrono>
#include <cstdlib>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "causalrag/error.hpp"
#include "causalrag/llm_gateway.hpp"

namespace causalrag {

struct EndpointConfig {
    std::string url;      // e.g. https://api.example.com/v1/chat/completions
    std::string api_key;  // sent as a bearer token when non-empty
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::seconds timeout{120};
    int max_in_flight = 4;

    // LLM_ENDPOINT and LLM_API_KEY.
    static EndpointConfig from_environment() {
        EndpointConfig cfg;
        if (const char* url = std::getenv("LLM_ENDPOINT")) cfg.url = url;
        if (const char* key = std::getenv("LLM_API_KEY")) cfg.api_key = key;
        return cfg;
    }
};

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("endpoint URL needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline nlohmann::json to_json(const LlmRequest& r) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : r.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", r.model},
            {"messages", std::move(messages)},
            {"temperature", r.temperature},
            {"max_tokens", r.max_tokens}};
}

inline bool is_transient_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

class HttpLlmClient : public LlmClient {
public:
    explicit HttpLlmClient(EndpointConfig cfg)
        : cfg_(std::move(cfg)), url_(split_url(cfg_.url)), slots_(cfg_.max_in_flight) {
        if (cfg_.max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
        if (cfg_.max_in_flight < 1 || cfg_.max_in_flight > kMaxInFlight)
            throw ValidationError("max_in_flight must be in [1,64]");
    }

    LlmResponse complete(const LlmRequest& request) override {
        request.validate();
        slots_.acquire();
        struct Release {
            std::counting_semaphore<kMaxInFlight>& s;
            ~Release() { s.release(); }
        } release{slots_};

        std::string body = to_json(request).dump();
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        auto backoff = cfg_.initial_backoff;
        std::string last_error;
        for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
            auto started = std::chrono::steady_clock::now();
            httplib::Client client(url_.origin);
            client.set_connection_timeout(cfg_.timeout);
            client.set_read_timeout(cfg_.timeout);
            auto res = client.Post(url_.path, headers, body, "application/json");
            if (res && res->status == 200) {
                auto elapsed = std::chrono::steady_clock::now() - started;
                return parse_response(res->body,
                                      std::chrono::duration<double, std::milli>(elapsed).count());
            }
            if (res) {
                last_error = "HTTP " + std::to_string(res->status);
                if (!is_transient_status(res->status))
                    throw TransportError("LLM endpoint returned " + last_error);
            } else {
                last_error = httplib::to_string(res.error());
            }
            if (attempt < cfg_.max_attempts) {
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
        }
        throw TransportError("LLM request failed after " + std::to_string(cfg_.max_attempts) +
                             " attempts: " + last_error);
    }

private:
    static constexpr int kMaxInFlight = 64;

    static LlmResponse parse_response(const std::string& body, double latency_ms) {
        LlmResponse out;
        out.latency_ms = latency_ms;
        try {
            auto j = nlohmann::json::parse(body);
            out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            if (j.contains("usage")) {
                out.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
                out.completion_tokens = j["usage"].value("completion_tokens", 0L);
            }
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("malformed LLM response: ") + e.what());
        }
        return out;
    }

    EndpointConfig cfg_;
    ParsedUrl url_;
    std::counting_semaphore<kMaxInFlight> slots_;
};

}  // namespace causalrag
