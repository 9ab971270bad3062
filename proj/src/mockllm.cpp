#include "cpelab/mockllm.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace cpelab {

namespace {

using Json = nlohmann::json;

std::string payload_of(const std::string& prompt) {
    auto pos = prompt.rfind(':');
    return pos == std::string::npos ? prompt : prompt.substr(pos + 1);
}

}  // namespace

struct MockLlmServer::Impl {
    httplib::Server server;
    std::thread thread;
};

MockLlmServer::MockLlmServer(Rule rule) : impl_(std::make_unique<Impl>()), rule_(std::move(rule)) {}

MockLlmServer::~MockLlmServer() { stop(); }

void MockLlmServer::fail_next(int count, int status) {
    fail_budget_ = count;
    fail_status_ = status;
}

void MockLlmServer::set_omit_logprobs(bool omit) { omit_logprobs_ = omit; }

void MockLlmServer::start() {
    auto handle = [this](const httplib::Request& req, httplib::Response& res, bool chat) {
        ++requests_;
        if (fail_budget_ > 0) {
            --fail_budget_;
            res.status = fail_status_;
            res.set_content("{\"error\":\"injected failure\"}", "application/json");
            return;
        }
        Json body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            res.status = 400;
            return;
        }
        std::string prompt;
        if (chat)
            prompt = body.at("messages").at(0).at("content").get<std::string>();
        else
            prompt = body.at("prompt").get<std::string>();

        std::vector<TokenLogprob> lps = rule_(prompt);
        Json choice;
        if (omit_logprobs_) {
            choice = Json{{"text", lps.front().token}};
        } else if (chat) {
            Json top = Json::array();
            for (const TokenLogprob& tl : lps)
                top.push_back({{"token", tl.token}, {"logprob", tl.logprob}});
            choice = Json{{"message", Json{{"role", "assistant"}, {"content", lps.front().token}}},
                          {"logprobs",
                           Json{{"content", Json::array({Json{{"token", lps.front().token},
                                                              {"logprob", lps.front().logprob},
                                                              {"top_logprobs", top}}})}}}};
        } else {
            Json top = Json::object();
            for (const TokenLogprob& tl : lps) top[tl.token] = tl.logprob;
            choice = Json{{"text", lps.front().token},
                          {"logprobs", Json{{"top_logprobs", Json::array({top})}}}};
        }
        Json out{{"choices", Json::array({choice})}};
        res.set_content(out.dump(), "application/json");
    };

    impl_->server.Post("/v1/completions",
                       [handle](const httplib::Request& req, httplib::Response& res) {
                           handle(req, res, false);
                       });
    impl_->server.Post("/v1/chat/completions",
                       [handle](const httplib::Request& req, httplib::Response& res) {
                           handle(req, res, true);
                       });

    port_ = impl_->server.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("mock server: could not bind a port");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void MockLlmServer::stop() {
    if (impl_ && impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

MockLlmServer::Rule MockLlmServer::always(const std::string& token) {
    return [token](const std::string&) {
        std::string other = token == "0" ? "1" : "0";
        return std::vector<TokenLogprob>{{token, -0.10536051565782630},
                                         {other, -2.3025850929940455}};
    };
}

MockLlmServer::Rule MockLlmServer::flip_sensitive() {
    return [](const std::string& prompt) {
        std::string payload = payload_of(prompt);
        bool any_one = payload.find('1') != std::string::npos;
        std::string top = any_one ? "1" : "0";
        std::string other = any_one ? "0" : "1";
        return std::vector<TokenLogprob>{{top, -0.10536051565782630},
                                         {other, -2.3025850929940455}};
    };
}

MockLlmServer::Rule MockLlmServer::period_follower() {
    return [](const std::string& prompt) {
        std::string payload = payload_of(prompt);
        std::string next = "0";
        if (!payload.empty()) {
            std::size_t n = payload.size();
            std::size_t period = n;  // fallback: repeat from the start
            for (std::size_t p = 1; p < n; ++p) {
                bool ok = true;
                for (std::size_t i = p; i < n; ++i)
                    if (payload[i] != payload[i - p]) {
                        ok = false;
                        break;
                    }
                if (ok) {
                    period = p;
                    break;
                }
            }
            next = std::string(1, payload[n - period]);
        }
        std::string other = next == "0" ? "1" : "0";
        return std::vector<TokenLogprob>{{next, -0.10536051565782630},
                                         {other, -2.3025850929940455}};
    };
}

MockLlmServer::Rule MockLlmServer::fixed_period(int p) {
    return [p](const std::string& prompt) {
        std::string payload = payload_of(prompt);
        std::string next = "0";
        if (payload.size() >= static_cast<std::size_t>(p))
            next = std::string(1, payload[payload.size() - static_cast<std::size_t>(p)]);
        std::string other = next == "0" ? "1" : "0";
        return std::vector<TokenLogprob>{{next, -0.10536051565782630},
                                         {other, -2.3025850929940455}};
    };
}

}  // namespace cpelab
