#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace cpelab {

// Full 17-significant-digit formatting so result files diff exactly.
std::string fmt_double(double x);

std::string fnv1a_hex(const std::string& data);

std::string iso8601_utc_now();

struct RemoteRequestLog {
    std::string prompt_hash;
    double latency_ms = 0.0;
    int retries = 0;
    int status = 0;
};

struct RunManifest {
    std::string command_line;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string code_version = "cpelab 0.1.0";
    std::string tie_break = "lowest-index";  // greedy argmax tie rule in force
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> output_files;
    std::vector<RemoteRequestLog> requests;

    nlohmann::json to_json() const;
    void save(const std::string& path) const;
};

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace cpelab
