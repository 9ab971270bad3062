#include "cpelab/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cpelab {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string iso8601_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json reqs = nlohmann::json::array();
    for (const RemoteRequestLog& r : requests)
        reqs.push_back({{"prompt_hash", r.prompt_hash},
                        {"latency_ms", r.latency_ms},
                        {"retries", r.retries},
                        {"status", r.status}});
    return {{"command_line", command_line},
            {"config_hash", config_hash},
            {"seed", seed},
            {"code_version", code_version},
            {"tie_break", tie_break},
            {"started_at", started_at},
            {"finished_at", finished_at},
            {"output_files", output_files},
            {"requests", reqs}};
}

void RunManifest::save(const std::string& path) const {
    write_text_file(path, to_json().dump(1) + "\n");
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace cpelab
