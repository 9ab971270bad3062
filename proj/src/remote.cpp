#include "cpelab/remote.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cpelab/serialize.hpp"

namespace cpelab {

void EndpointConfig::validate() const {
    if (base_url.empty()) throw std::invalid_argument("endpoint: base_url required");
    if (top_k < 2) throw std::invalid_argument("endpoint: top_k must be >= 2");
    if (!(timeout_seconds > 0.0)) throw std::invalid_argument("endpoint: timeout must be > 0");
    if (max_retries < 0) throw std::invalid_argument("endpoint: max_retries must be >= 0");
}

namespace {

using Json = nlohmann::json;

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\n\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\n\r");
    return s.substr(b, e - b + 1);
}

std::string bearer_token(const EndpointConfig& endpoint) {
    if (endpoint.auth_env.empty()) return "";
    const char* tok = std::getenv(endpoint.auth_env.c_str());
    if (!tok || !*tok)
        throw RemoteError(RemoteError::Kind::Auth,
                          "auth token missing: environment variable " + endpoint.auth_env +
                              " is not set");
    return tok;
}

bool transient_status(int status) { return status == 429 || (status >= 500 && status < 600); }

// Extracts the top-K list for the first generated position; throws
// Incompatible when any required path is missing.
std::vector<TokenLogprob> parse_logprobs(const Json& body, bool chat) {
    std::vector<TokenLogprob> out;
    try {
        const Json& choice = body.at("choices").at(0);
        if (chat) {
            const Json& entry = choice.at("logprobs").at("content").at(0);
            for (const Json& item : entry.at("top_logprobs"))
                out.push_back({item.at("token").get<std::string>(), item.at("logprob").get<double>()});
        } else {
            const Json& top = choice.at("logprobs").at("top_logprobs").at(0);
            for (auto it = top.begin(); it != top.end(); ++it)
                out.push_back({it.key(), it.value().get<double>()});
        }
    } catch (const Json::exception&) {
        throw RemoteError(RemoteError::Kind::Incompatible,
                          "incompatible server: response is missing logprobs");
    }
    if (out.empty())
        throw RemoteError(RemoteError::Kind::Incompatible,
                          "incompatible server: empty logprob list");
    std::sort(out.begin(), out.end(), [](const TokenLogprob& a, const TokenLogprob& b) {
        if (a.logprob != b.logprob) return a.logprob > b.logprob;
        return a.token < b.token;
    });
    return out;
}

}  // namespace

std::vector<TokenLogprob> next_token_logprobs(const EndpointConfig& endpoint,
                                              const std::string& prompt, RequestLogSink* sink) {
    endpoint.validate();
    const std::string token = bearer_token(endpoint);

    Json body;
    std::string path;
    if (endpoint.chat_completions) {
        path = "/v1/chat/completions";
        body = {{"model", endpoint.model_name},
                {"messages", Json::array({Json{{"role", "user"}, {"content", prompt}}})},
                {"max_tokens", 1},
                {"temperature", 0},
                {"logprobs", true},
                {"top_logprobs", endpoint.top_k}};
    } else {
        path = "/v1/completions";
        body = {{"model", endpoint.model_name},
                {"prompt", prompt},
                {"max_tokens", 1},
                {"temperature", 0},
                {"logprobs", endpoint.top_k}};
    }
    const std::string payload = body.dump();

    auto started = std::chrono::steady_clock::now();
    int attempts = 0;
    int last_status = 0;
    std::string failure;
    for (; attempts <= endpoint.max_retries; ++attempts) {
        if (attempts > 0) {
            auto delay = endpoint.backoff_base_ms * (1L << (attempts - 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client client(endpoint.base_url);
        client.set_connection_timeout(std::chrono::duration<double>(endpoint.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(endpoint.timeout_seconds));
        if (!token.empty()) client.set_bearer_token_auth(token);

        httplib::Result res = client.Post(path, payload, "application/json");
        if (!res) {
            last_status = 0;
            failure = "connection failed";
            continue;  // transient
        }
        last_status = res->status;
        if (res->status == 200) {
            Json parsed;
            try {
                parsed = Json::parse(res->body);
            } catch (const Json::exception&) {
                throw RemoteError(RemoteError::Kind::Incompatible,
                                  "incompatible server: response is not JSON");
            }
            auto out = parse_logprobs(parsed, endpoint.chat_completions);
            if (sink) {
                auto ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - started)
                              .count();
                sink->record({fnv1a_hex(prompt), ms, attempts, 200});
            }
            return out;  // well-formed response: done, never retried
        }
        failure = "http status " + std::to_string(res->status);
        if (!transient_status(res->status)) break;
    }
    if (sink) {
        auto ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                .count();
        sink->record({fnv1a_hex(prompt), ms, attempts, last_status});
    }
    throw RemoteError(RemoteError::Kind::Transport,
                      "request failed after " + std::to_string(attempts) + " attempt(s): " + failure);
}

std::vector<PromptPairRow> prompt_pair_sensitivity(
    const EndpointConfig& endpoint, const std::vector<std::pair<std::string, std::string>>& pairs,
    std::uint64_t /*seed*/, RequestLogSink* sink) {
    std::vector<PromptPairRow> rows;
    for (const auto& [alpha, beta] : pairs) {
        if (alpha.empty() || beta.empty() || alpha.back() != beta.back())
            throw std::invalid_argument(
                "prompt_pair_sensitivity: prompts must share their final token");
        auto lp_alpha = next_token_logprobs(endpoint, alpha, sink);
        auto lp_beta = next_token_logprobs(endpoint, beta, sink);
        PromptPairRow row;
        row.sigma = lp_alpha[0].token;
        row.p_alpha = std::exp(lp_alpha[0].logprob);
        row.sensitive = lp_beta[0].token != row.sigma;
        row.beta_truncated = true;
        for (const TokenLogprob& tl : lp_beta)
            if (tl.token == row.sigma) {
                row.p_beta = std::exp(tl.logprob);
                row.beta_truncated = false;
                break;
            }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string prompt_pair_csv(const std::vector<PromptPairRow>& rows) {
    std::string out = "pair,sigma,p_alpha,p_beta,sensitive,beta_truncated\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out += std::to_string(i) + ',' + rows[i].sigma + ',' + fmt_double(rows[i].p_alpha) + ',' +
               fmt_double(rows[i].p_beta) + ',' + (rows[i].sensitive ? "1" : "0") + ',' +
               (rows[i].beta_truncated ? "1" : "0") + '\n';
    }
    return out;
}

// Counting gate bounding concurrent requests.
class RemoteModel::Gate {
public:
    explicit Gate(int limit) : limit_(limit) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return active_ < limit_; });
        ++active_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            --active_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int limit_;
    int active_ = 0;
};

RemoteModel::RemoteModel(EndpointConfig endpoint)
    : endpoint_(std::move(endpoint)),
      alphabet_({"0", "1", "other"}),
      gate_(std::make_shared<Gate>(std::max(1, endpoint_.in_flight))) {
    endpoint_.validate();
}

NextTokenOutcome RemoteModel::next(const TokenSeq& tokens) {
    std::string prompt = endpoint_.instruction_prefix;
    for (Token t : tokens) {
        if (t != 0 && t != 1)
            throw std::invalid_argument("RemoteModel: prompts must be binary sequences");
        prompt += t == 0 ? '0' : '1';
    }

    gate_->acquire();
    std::vector<TokenLogprob> lps;
    try {
        lps = next_token_logprobs(endpoint_, prompt, &sink_);
    } catch (...) {
        gate_->release();
        throw;
    }
    gate_->release();

    double p0 = 0.0, p1 = 0.0;
    for (const TokenLogprob& tl : lps) {
        std::string t = trimmed(tl.token);
        if (t == "0" && p0 == 0.0) p0 = std::exp(tl.logprob);
        if (t == "1" && p1 == 0.0) p1 = std::exp(tl.logprob);
    }
    double other = std::max(0.0, 1.0 - p0 - p1);
    double sum = p0 + p1 + other;
    Vec probs{p0 / sum, p1 / sum, other / sum};

    std::string top = trimmed(lps[0].token);
    Token greedy = top == "0" ? 0 : top == "1" ? 1 : kOtherBucket;
    double margin =
        lps.size() > 1 ? std::exp(lps[0].logprob) - std::exp(lps[1].logprob) : std::exp(lps[0].logprob);
    return {Dist(std::move(probs)), greedy, margin};
}

std::unique_ptr<RemoteModel> as_next_token_model(const EndpointConfig& endpoint) {
    return std::make_unique<RemoteModel>(endpoint);
}

}  // namespace cpelab
