#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cpelab/remote.hpp"

namespace cpelab {

// Completions-compatible mock endpoint for tests and offline protocol runs.
// Serves POST /v1/completions and /v1/chat/completions on 127.0.0.1.
class MockLlmServer {
public:
    // prompt -> top-K token logprobs, most probable first
    using Rule = std::function<std::vector<TokenLogprob>(const std::string&)>;

    explicit MockLlmServer(Rule rule);
    ~MockLlmServer();

    MockLlmServer(const MockLlmServer&) = delete;
    MockLlmServer& operator=(const MockLlmServer&) = delete;

    void start();
    void stop();
    int port() const { return port_; }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    long request_count() const { return requests_.load(); }
    void fail_next(int count, int status);   // inject transient failures
    void set_omit_logprobs(bool omit);       // simulate an incompatible server

    // canned behaviors
    static Rule always(const std::string& token);
    // answers "1" iff the prompt's payload (after the last ':') contains a '1'
    static Rule flip_sensitive();
    // continues the smallest period consistent with the payload
    static Rule period_follower();
    // continues assuming the payload has period exactly p
    static Rule fixed_period(int p);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    Rule rule_;
    std::atomic<long> requests_{0};
    std::atomic<int> fail_budget_{0};
    std::atomic<int> fail_status_{500};
    std::atomic<bool> omit_logprobs_{false};
    int port_ = 0;
};

}  // namespace cpelab
