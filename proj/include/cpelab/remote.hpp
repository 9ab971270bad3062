#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "cpelab/manifest.hpp"
#include "cpelab/nexttoken.hpp"

namespace cpelab {

struct EndpointConfig {
    std::string base_url;            // e.g. http://127.0.0.1:8080
    std::string model_name;
    std::string auth_env;            // name of the env var holding the token; empty = none
    double timeout_seconds = 30.0;
    int max_retries = 3;
    int top_k = 20;                  // requested logprobs; >= 2 so margins exist
    bool chat_completions = false;   // use the chat endpoint variant
    int backoff_base_ms = 250;
    int in_flight = 4;
    std::string instruction_prefix;  // prepended to rendered token prompts

    void validate() const;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;  // <= 0
};

class RemoteError : public std::runtime_error {
public:
    enum class Kind { Transport, Incompatible, Auth };

    RemoteError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Collects per-request telemetry for the run manifest.
class RequestLogSink {
public:
    void record(RemoteRequestLog entry) {
        std::lock_guard<std::mutex> lock(mu_);
        entries_.push_back(std::move(entry));
    }
    std::vector<RemoteRequestLog> drain() {
        std::lock_guard<std::mutex> lock(mu_);
        std::vector<RemoteRequestLog> out;
        out.swap(entries_);
        return out;
    }

private:
    std::mutex mu_;
    std::vector<RemoteRequestLog> entries_;
};

// One request with max_tokens=1, temperature=0, top-K logprobs; exponential
// backoff on transient failures, never a retry after a well-formed response.
// The returned list is sorted by logprob descending (ties by token text).
std::vector<TokenLogprob> next_token_logprobs(const EndpointConfig& endpoint,
                                              const std::string& prompt,
                                              RequestLogSink* sink = nullptr);

struct PromptPairRow {
    std::string sigma;           // greedy token under the alpha prompt
    double p_alpha = 0.0;        // P(sigma | alpha)
    double p_beta = 0.0;         // P(sigma | beta); 0 when absent from beta's top-K
    bool sensitive = false;      // greedy tokens differ
    bool beta_truncated = false; // sigma was missing from beta's top-K
};

std::vector<PromptPairRow> prompt_pair_sensitivity(
    const EndpointConfig& endpoint, const std::vector<std::pair<std::string, std::string>>& pairs,
    std::uint64_t seed, RequestLogSink* sink = nullptr);

std::string prompt_pair_csv(const std::vector<PromptPairRow>& rows);

// NextTokenModel over the endpoint: the distribution covers the token texts
// "0" and "1" plus a catch-all bucket; a generated token outside {0,1} maps to
// the bucket and counts as divergence/failure downstream.
class RemoteModel : public NextTokenModel {
public:
    explicit RemoteModel(EndpointConfig endpoint);

    const Alphabet& alphabet() const override { return alphabet_; }
    NextTokenOutcome next(const TokenSeq& tokens) override;
    bool pushable(Token t) const override { return t == 0 || t == 1; }

    std::vector<RemoteRequestLog> drain_request_log() { return sink_.drain(); }
    static constexpr Token kOtherBucket = 2;

private:
    EndpointConfig endpoint_;
    Alphabet alphabet_;
    RequestLogSink sink_;
    class Gate;
    std::shared_ptr<Gate> gate_;
};

std::unique_ptr<RemoteModel> as_next_token_model(const EndpointConfig& endpoint);

}  // namespace cpelab
