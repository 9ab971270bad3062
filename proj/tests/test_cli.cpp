#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cpelab/config.hpp"
#include "cpelab/manifest.hpp"
#include "cpelab/mockllm.hpp"

using namespace cpelab;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(CPELAB_BIN) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("cpelab_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("load_config fills the documented defaults") {
    Json j{{"experiment", "nts"},
           {"model", Json{{"construct", "single"}, {"target", "constant0"}}}};
    ExperimentConfig c = config_from_json(j);
    CHECK(c.gammas == kDefaultGammas);
    CHECK(c.samples == 100);
    CHECK(c.length == 190);
    CHECK(c.steps == 505);
    REQUIRE(c.model.has_value());
    CHECK(c.model->kind == ModelSource::Kind::ConstructSingle);
    CHECK(c.model->single.target == SeqSpec::constant_of(0));
}

TEST_CASE("config errors name the offending field") {
    CHECK_THROWS_WITH_AS(config_from_json(Json{{"model", Json{{"file", "x.json"}}}}),
                         "config: missing field 'experiment'", ConfigError);
    CHECK_THROWS_WITH_AS(
        config_from_json(Json{{"experiment", "nts"},
                              {"model", Json{{"file", "m.json"}}},
                              {"gamma_typo", 1}}),
        "config: unknown field 'gamma_typo'", ConfigError);
    CHECK_THROWS_AS(config_from_json(Json{{"experiment", "dance"},
                                          {"model", Json{{"file", "m.json"}}}}),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(Json{{"experiment", "nts"}}), ConfigError);
}

TEST_CASE("effective config round-trips to an identical configuration") {
    Json j{{"experiment", "modulus"}, {"model", Json{{"file", "m.json"}}}, {"seed", 9}};
    ExperimentConfig c = config_from_json(j);
    Json eff = effective_json(c);
    ExperimentConfig back = config_from_json(eff);
    CHECK(effective_json(back) == eff);
    CHECK(back.gammas == c.gammas);
    CHECK(back.n_values == c.n_values);
}

TEST_CASE("sequence spec shorthands") {
    CHECK(parse_seqspec_shorthand("constant0") == SeqSpec::constant_of(0));
    CHECK(parse_seqspec_shorthand("periodic:001") == SeqSpec::periodic({0, 0, 1}));
    CHECK(parse_seqspec_shorthand("evper:11:0") ==
          SeqSpec::eventually_periodic({1, 1}, {0}));
    CHECK(parse_seqspec_shorthand("increasing") == SeqSpec::increasing_spacing());
    CHECK(parse_seqspec_shorthand("powers2") == SeqSpec::indicator(IndicatorSet::PowersOfTwo));
    CHECK_THROWS_AS(parse_seqspec_shorthand("nope"), ConfigError);
}

TEST_CASE("cli: construct then verify round-trip (exit 0, witness learned)") {
    fs::path dir = fresh_dir("verify");
    fs::path model = dir / "single.json";
    int rc = run_cli("construct single --target constant0 --eta 0.1 --seed 1 --out " +
                     (dir / "out").string() + " --model-out " + model.string());
    REQUIRE(rc == 0);
    REQUIRE(fs::exists(model));

    rc = run_cli("verify --model " + model.string() +
                 " --spec constant0 --eps 0.8 --n0 1 --N 2000 --seed 2 --out " +
                 (dir / "out").string());
    CHECK(rc == 0);
    Json witness = Json::parse(read_text_file((dir / "out/verify/2/witness.json").string()));
    CHECK(witness.at("learned").get<bool>());
}

TEST_CASE("cli: unknown flag exits 1 with usage diagnostics") {
    CHECK(run_cli("nts --definitely-not-a-flag 3") == 1);
    CHECK(run_cli("not-a-subcommand") == 1);
    CHECK(run_cli("--help") == 0);
}

TEST_CASE("cli: omitted seed is generated and the run still lands on disk") {
    fs::path dir = fresh_dir("genseed");
    fs::path model = dir / "single.json";
    REQUIRE(run_cli("construct single --target constant0 --seed 4 --out " + (dir / "o").string() +
                    " --model-out " + model.string()) == 0);
    REQUIRE(run_cli("nts --model " + model.string() +
                    " --gamma 0.5 --samples 3 --length 16 --out " + (dir / "ns").string()) == 0);
    std::size_t runs = 0;
    for (const auto& entry : fs::directory_iterator(dir / "ns/nts")) {
        ++runs;
        CHECK(fs::exists(entry.path() / "results.csv"));
        CHECK(fs::exists(entry.path() / "manifest.json"));
        CHECK(fs::exists(entry.path() / "effective-config.json"));
        Json manifest = Json::parse(read_text_file((entry.path() / "manifest.json").string()));
        CHECK(manifest.at("tie_break").get<std::string>() == "lowest-index");
    }
    CHECK(runs == 1);
}

TEST_CASE("cli: prefix export, one sequence per line") {
    fs::path dir = fresh_dir("prefix");
    fs::path file = dir / "seqs.txt";
    REQUIRE(run_cli("prefix increasing periodic:01 --n 26 --out-file " + file.string()) == 0);
    CHECK(read_text_file(file.string()) ==
          "10100100010000100000100000\n"
          "01010101010101010101010101\n");
}

TEST_CASE("cli: identical seeds give byte-identical result files") {
    fs::path dir = fresh_dir("determinism");
    fs::path model = dir / "family.json";
    REQUIRE(run_cli("construct family --periods 2,3 --seed 1 --out " + (dir / "o1").string() +
                    " --model-out " + model.string()) == 0);

    int rc1 = run_cli("nts --model " + model.string() +
                      " --gamma 0.01,0.05 --samples 20 --length 64 --seed 7 --out " +
                      (dir / "a").string());
    int rc2 = run_cli("nts --model " + model.string() +
                      " --gamma 0.01,0.05 --samples 20 --length 64 --seed 7 --out " +
                      (dir / "b").string());
    REQUIRE(rc1 == 0);
    REQUIRE(rc2 == 0);
    std::string csv_a = read_text_file((dir / "a/nts/7/results.csv").string());
    std::string csv_b = read_text_file((dir / "b/nts/7/results.csv").string());
    CHECK(csv_a == csv_b);
    CHECK(!csv_a.empty());

    Json manifest = Json::parse(read_text_file((dir / "a/nts/7/manifest.json").string()));
    CHECK(manifest.at("seed").get<std::uint64_t>() == 7);
    CHECK(manifest.at("output_files").size() >= 1);
}

TEST_CASE("cli: config file with unknown fields exits 1") {
    fs::path dir = fresh_dir("badconfig");
    fs::path cfg = dir / "bad.json";
    write_text_file(cfg.string(), R"({"experiment":"nts","model":{"file":"x"},"wat":1})");
    CHECK(run_cli("nts --config " + cfg.string() + " --seed 1 --out " + (dir / "o").string()) ==
          1);
}

TEST_CASE("cli: runtime errors exit 2") {
    fs::path dir = fresh_dir("runtime");
    // missing model file surfaces as a runtime error, not a config error
    CHECK(run_cli("nts --model " + (dir / "missing.json").string() + " --seed 1 --out " +
                  (dir / "o").string()) == 2);
}

TEST_CASE("cli: remote transport failures exit 3") {
    fs::path dir = fresh_dir("transport");
    fs::path cfg = dir / "remote.json";
    write_text_file(cfg.string(),
                    R"({"experiment":"nts","samples":2,"length":8,"gammas":[0.5],
                        "model":{"remote":{"base_url":"http://127.0.0.1:9",
                                            "model":"none","max_retries":0,
                                            "backoff_ms":1,"timeout_s":2}}})");
    CHECK(run_cli("nts --config " + cfg.string() + " --seed 1 --out " + (dir / "o").string()) ==
          3);
}

TEST_CASE("cli: nts against the bundled mock server") {
    MockLlmServer server(MockLlmServer::flip_sensitive());
    server.start();
    fs::path dir = fresh_dir("mockrun");
    fs::path cfg = dir / "remote.json";
    write_text_file(cfg.string(), std::string(R"({"experiment":"nts","samples":4,"length":10,
        "gammas":[0.5],"model":{"remote":{"base_url":")") +
                                      server.base_url() + R"(","model":"mock"}}})");
    REQUIRE(run_cli("nts --config " + cfg.string() + " --seed 5 --out " + (dir / "o").string()) ==
            0);
    std::string csv = read_text_file((dir / "o/nts/5/results.csv").string());
    CHECK(csv ==
          "gamma,perturb_count,samples,nts,base_next,next_tokens\n"
          "0.5,4,4,4,0,1|1|1|1\n");
    Json manifest = Json::parse(read_text_file((dir / "o/nts/5/manifest.json").string()));
    CHECK(manifest.at("requests").size() == 5);  // 1 base + 4 samples
}
