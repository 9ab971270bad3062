// Command-line entry point: construct models, train, run the experiment
// protocols locally or against a completions-compatible endpoint, and persist
// seeded, reproducible result files.

#include <filesystem>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "cpelab/config.hpp"
#include "cpelab/experiments.hpp"
#include "cpelab/manifest.hpp"
#include "cpelab/serialize.hpp"

namespace fs = std::filesystem;
using namespace cpelab;

namespace {

struct CliOverrides {
    std::string config_path;
    std::string out_dir = "out";
    std::string model_file;
    std::string construct_kind;
    std::string target;
    std::string spec;
    std::string remote_url;
    std::string remote_model;
    std::string pairs_file;
    std::string model_out;
    std::string optimizer;
    std::vector<double> gammas;
    std::vector<int> periods;
    std::vector<int> p_values;
    std::vector<int> r_values;
    std::vector<int> k_values;
    std::vector<std::size_t> n_values;
    double eta = -1.0;
    double sharpness = -1.0;
    double epsilon = -1.0;
    double gamma_pos = -1.0;
    long long seed = -1;
    long long samples = -1;
    long long length = -1;
    long long steps = -1;
    long long p_max = -1;
    long long r = -1;
    long long n = -1;
    long long n0 = -1;
    long long horizon = -1;
};

Json overrides_to_json(const CliOverrides& o, const std::string& experiment) {
    Json j;
    j["experiment"] = experiment;
    if (o.seed >= 0) j["seed"] = static_cast<std::uint64_t>(o.seed);
    if (!o.model_file.empty()) j["model"] = Json{{"file", o.model_file}};
    if (!o.remote_url.empty()) {
        Json remote{{"base_url", o.remote_url}};
        if (!o.remote_model.empty()) remote["model"] = o.remote_model;
        j["model"] = Json{{"remote", remote}};
    }
    if (!o.construct_kind.empty()) {
        Json m{{"construct", o.construct_kind}};
        if (!o.target.empty()) m["target"] = o.target;
        if (o.eta >= 0.0) m["eta"] = o.eta;
        if (!o.periods.empty()) m["periods"] = o.periods;
        if (o.sharpness >= 0.0) m["sharpness"] = o.sharpness;
        j["model"] = m;
    }
    if (!o.gammas.empty()) j["gammas"] = o.gammas;
    if (!o.p_values.empty()) j["p_values"] = o.p_values;
    if (!o.r_values.empty()) j["r_values"] = o.r_values;
    if (!o.k_values.empty()) j["k_values"] = o.k_values;
    if (!o.n_values.empty()) j["n_values"] = o.n_values;
    if (!o.spec.empty()) j["spec"] = o.spec;
    if (!o.pairs_file.empty()) j["pairs_file"] = o.pairs_file;
    if (!o.model_out.empty()) j["model_out"] = o.model_out;
    if (o.epsilon >= 0.0) j["epsilon"] = o.epsilon;
    if (o.gamma_pos >= 0.0) j["positional_gamma"] = o.gamma_pos;
    if (o.samples >= 0) j["samples"] = static_cast<std::size_t>(o.samples);
    if (o.length >= 0) j["length"] = static_cast<std::size_t>(o.length);
    if (o.steps >= 0) j["steps"] = static_cast<std::size_t>(o.steps);
    if (o.p_max >= 0) j["p_max"] = static_cast<int>(o.p_max);
    if (o.r >= 0) j["r"] = static_cast<int>(o.r);
    if (o.n >= 0) j["n"] = static_cast<std::size_t>(o.n);
    if (o.n0 >= 0) j["n0"] = static_cast<std::uint64_t>(o.n0);
    if (o.horizon >= 0) j["horizon"] = static_cast<std::uint64_t>(o.horizon);
    return j;
}

Json merge(Json base, const Json& overrides) {
    for (auto it = overrides.begin(); it != overrides.end(); ++it) base[it.key()] = *it;
    return base;
}

std::uint64_t ensure_seed(ExperimentConfig& config) {
    if (!config.seed) {
        std::random_device rd;
        std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        config.seed = s;
        std::cout << "generated seed: " << s << "\n";
    }
    return *config.seed;
}

struct RunContext {
    fs::path dir;
    RunManifest manifest;
    ExperimentConfig config;

    void emit(const std::string& name, const std::string& content) {
        fs::path p = dir / name;
        write_text_file(p.string(), content);
        manifest.output_files.push_back(p.string());
    }
};

class PreparedModel {
public:
    std::unique_ptr<LocalModel> local;
    std::unique_ptr<RemoteModel> remote;
    BuiltLearner built;  // populated for constructed models

    NextTokenModel& interface() {
        if (remote) return *remote;
        return *local;
    }
    bool is_local() const { return local != nullptr; }
    const TransformerModel& transformer() const {
        if (!local) throw ConfigError("this experiment needs a local model, not a remote endpoint");
        return local->model();
    }
};

PreparedModel prepare_model(const ExperimentConfig& config) {
    PreparedModel pm;
    if (!config.model) throw ConfigError("model: missing");
    switch (config.model->kind) {
        case ModelSource::Kind::ConstructSingle:
            pm.built = build_single_learner(config.model->single);
            pm.local = std::make_unique<LocalModel>(pm.built.model);
            break;
        case ModelSource::Kind::ConstructFamily:
            pm.built = build_family_learner(config.model->family);
            pm.local = std::make_unique<LocalModel>(pm.built.model);
            break;
        case ModelSource::Kind::File:
            pm.local = std::make_unique<LocalModel>(load_model(config.model->file));
            break;
        case ModelSource::Kind::Remote:
            pm.remote = as_next_token_model(config.model->remote);
            break;
    }
    return pm;
}

std::vector<std::pair<std::string, std::string>> load_pairs(const ExperimentConfig& config) {
    if (!config.pairs.empty()) return config.pairs;
    if (config.pairs_file.empty())
        throw ConfigError("pair-sensitivity: provide 'pairs' or 'pairs_file'");
    Json j = Json::parse(read_text_file(config.pairs_file), nullptr, false);
    if (j.is_discarded() || !j.is_array())
        throw ConfigError("pairs_file: expected a JSON array of {alpha, beta}");
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const Json& p : j)
        pairs.emplace_back(p.at("alpha").get<std::string>(), p.at("beta").get<std::string>());
    return pairs;
}

int run_experiment(ExperimentConfig config, const std::string& out_dir,
                   const std::string& command_line) {
    std::uint64_t seed = ensure_seed(config);

    RunContext ctx;
    ctx.config = config;
    ctx.dir = fs::path(out_dir) / config.experiment / std::to_string(seed);
    fs::create_directories(ctx.dir);
    ctx.manifest.command_line = command_line;
    ctx.manifest.seed = seed;
    ctx.manifest.started_at = iso8601_utc_now();
    Json effective = effective_json(config);
    ctx.manifest.config_hash = fnv1a_hex(effective.dump());

    const std::string& exp = config.experiment;
    if (exp == "construct") {
        PreparedModel pm = prepare_model(config);
        Json doc = model_to_json(pm.transformer());
        ctx.emit("model.json", doc.dump(1) + "\n");
        if (!config.model_out.empty()) {
            write_text_file(config.model_out, doc.dump(1) + "\n");
            ctx.manifest.output_files.push_back(config.model_out);
        }
        std::cout << "constructed model: margin=" << fmt_double(pm.built.epsilon)
                  << " n0=" << pm.built.n0 << "\n";
    } else if (exp == "train") {
        TrainableConfig tc = config.train;
        tc.seed = seed;
        TrainOutcome out = train(tc);
        Json doc = model_to_json(out.model);
        ctx.emit("model.json", doc.dump(1) + "\n");
        if (!config.model_out.empty()) {
            write_text_file(config.model_out, doc.dump(1) + "\n");
            ctx.manifest.output_files.push_back(config.model_out);
        }
        std::string curve = "step,loss\n";
        for (std::size_t s = 0; s < out.losses.size(); ++s)
            curve += std::to_string(s) + ',' + fmt_double(out.losses[s]) + '\n';
        ctx.emit("loss_curve.csv", curve);
        std::cout << "trained " << out.losses.size() << " steps; final loss "
                  << (out.losses.empty() ? std::string("n/a") : fmt_double(out.losses.back()))
                  << "\n";
    } else if (exp == "verify") {
        PreparedModel pm = prepare_model(config);
        auto wit = verify_eventual_learning(pm.transformer(), config.spec, config.epsilon,
                                            config.n0, config.horizon);
        Json j{{"learned", wit.learned},
               {"epsilon", wit.epsilon},
               {"n0", wit.n0},
               {"horizon", wit.horizon},
               {"first_failing_n", wit.first_failing_n}};
        ctx.emit("witness.json", j.dump(1) + "\n");
        std::cout << (wit.learned ? "learned" : "refuted");
        if (!wit.learned) std::cout << " at n=" << wit.first_failing_n;
        std::cout << "\n";
    } else if (exp == "nts") {
        PreparedModel pm = prepare_model(config);
        auto res = nts_zero(pm.interface(), config.gammas, config.samples, config.length, seed);
        ctx.emit("results.csv", nts_csv(res, pm.interface().alphabet()));
        for (const NtsRow& row : res.rows)
            std::cout << "gamma=" << row.gamma << " count=" << row.perturb_count
                      << " NTS=" << row.nts << "/" << row.samples << "\n";
        if (pm.remote) ctx.manifest.requests = pm.remote->drain_request_log();
    } else if (exp == "nts-positional") {
        PreparedModel pm = prepare_model(config);
        auto res = nts_positional(pm.interface(), config.shapes, config.positional_gamma,
                                  config.samples, config.length, seed);
        ctx.emit("results.csv", nts_positional_csv(res, pm.interface().alphabet()));
        for (const NtsPositionalRow& row : res.rows)
            std::cout << "u=" << row.u << " v=" << row.v << " NTS=" << row.nts.nts << "/"
                      << row.nts.samples << "\n";
        if (pm.remote) ctx.manifest.requests = pm.remote->drain_request_log();
    } else if (exp == "periodic") {
        PreparedModel pm = prepare_model(config);
        auto res = periodic_eval(pm.interface(), config.p_values, config.r_values, config.steps,
                                 seed);
        ctx.emit("results.csv", periodic_csv(res, pm.interface().alphabet()));
        std::size_t ok = 0;
        for (const PeriodicCell& c : res.cells) ok += c.success ? 1 : 0;
        std::cout << ok << "/" << res.cells.size() << " cells successful\n";
        if (pm.remote) ctx.manifest.requests = pm.remote->drain_request_log();
    } else if (exp == "critical-period") {
        PreparedModel pm = prepare_model(config);
        auto res = critical_period(pm.interface(), config.r, config.p_max, config.steps, seed);
        ctx.emit("results.csv", critical_period_csv(res, pm.interface().alphabet()));
        if (res.p_star)
            std::cout << "critical period: " << *res.p_star << "\n";
        else
            std::cout << "no failing period up to p_max=" << config.p_max << "\n";
        if (pm.remote) ctx.manifest.requests = pm.remote->drain_request_log();
    } else if (exp == "modulus") {
        PreparedModel pm = prepare_model(config);
        auto res = continuity_modulus(pm.interface(), config.gammas, config.n_values,
                                      config.samples, seed, config.spec);
        ctx.emit("results.csv", modulus_csv(res));
        for (const ModulusCell& c : res.cells)
            std::cout << "gamma=" << c.gamma << " n=" << c.n << " D=" << fmt_double(c.d_max)
                      << "\n";
        if (pm.remote) ctx.manifest.requests = pm.remote->drain_request_log();
    } else if (exp == "collapse") {
        PreparedModel pm = prepare_model(config);
        auto res = collapse_probe(pm.interface(), config.spec, config.gammas, config.samples,
                                  config.n, seed);
        ctx.emit("results.csv", collapse_csv(res));
        if (res.precondition_warning)
            std::cerr << "warning: model does not predict the sequence's next symbol at n=" << config.n
                      << "\n";
        for (const CollapseRow& row : res.rows)
            std::cout << "gamma=" << row.gamma << " agreement=" << row.agreement << "\n";
        if (pm.remote) ctx.manifest.requests = pm.remote->drain_request_log();
    } else if (exp == "isolation") {
        PreparedModel pm = prepare_model(config);
        double eps = config.epsilon;
        std::uint64_t n0 = config.n0;
        if (config.model->kind == ModelSource::Kind::ConstructSingle ||
            config.model->kind == ModelSource::Kind::ConstructFamily) {
            eps = pm.built.epsilon;
            n0 = static_cast<std::uint64_t>(pm.built.n0);
        }
        auto res = isolation_demo(pm.transformer(), config.k_values, config.horizon, eps, n0);
        ctx.emit("results.csv", isolation_csv(res));
        if (!res.precondition_ok)
            std::cerr << "warning: model does not verify as learning the all-0 sequence\n";
        for (const IsolationRow& row : res.rows)
            std::cout << "k=" << row.k << (row.refuted ? " refuted at n=" : " NOT refuted ")
                      << row.first_failing_n << "\n";
    } else if (exp == "ssmax-compare") {
        SsmaxPairOptions opts;
        opts.dim = config.pair_init.dim;
        opts.num_layers = config.pair_init.num_layers;
        opts.init_scale = config.pair_init.init_scale;
        opts.ssmax_scale = config.pair_init.ssmax_scale;
        opts.init_seed = seed;
        auto [soft, ss] = make_ssmax_pair(opts);
        auto res = ssmax_compare(soft, ss, config.gammas, config.samples, config.length, seed);
        ctx.emit("results.csv", ssmax_compare_csv(res));
        std::cout << "mean NTS difference (ssmax - softmax): " << fmt_double(res.mean_diff)
                  << "\n";
    } else if (exp == "pair-sensitivity") {
        if (!config.model || config.model->kind != ModelSource::Kind::Remote)
            throw ConfigError("pair-sensitivity: requires a remote model");
        RequestLogSink sink;
        auto rows = prompt_pair_sensitivity(config.model->remote, load_pairs(config), seed, &sink);
        ctx.emit("results.csv", prompt_pair_csv(rows));
        std::size_t sensitive = 0;
        for (const PromptPairRow& r : rows) sensitive += r.sensitive ? 1 : 0;
        std::cout << sensitive << "/" << rows.size() << " pairs sensitive\n";
        ctx.manifest.requests = sink.drain();
    } else {
        throw ConfigError("experiment: unhandled kind '" + exp + "'");
    }

    ctx.emit("effective-config.json", effective.dump(1) + "\n");
    ctx.manifest.finished_at = iso8601_utc_now();
    ctx.manifest.save((ctx.dir / "manifest.json").string());
    std::cout << "results in " << ctx.dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cpelab: attention-model laboratory for sequence learnability experiments"};
    app.require_subcommand(1);

    std::string command_line;
    for (int i = 0; i < argc; ++i) {
        if (i) command_line += ' ';
        command_line += argv[i];
    }

    CliOverrides o;
    std::string chosen;

    auto add_common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON config file");
        sub->add_option("--out", o.out_dir, "output directory (default: out)");
        sub->add_option("--seed", o.seed, "run seed (generated and printed when omitted)");
        sub->add_option("--model", o.model_file, "model JSON file");
        sub->add_option("--remote-url", o.remote_url, "completions endpoint base URL");
        sub->add_option("--remote-model", o.remote_model, "remote model name");
    };

    auto* construct = app.add_subcommand("construct", "build a learner and emit its model JSON");
    add_common(construct);
    construct->add_option("kind", o.construct_kind, "single | family")->required();
    construct->add_option("--target", o.target, "target spec (single)");
    construct->add_option("--eta", o.eta, "leak mass (single)");
    construct->add_option("--periods", o.periods, "candidate periods (family)")->delimiter(',');
    construct->add_option("--sharpness", o.sharpness, "attention sharpness (family)");
    construct->add_option("--model-out", o.model_out, "also write the model JSON here");

    auto* train_cmd = app.add_subcommand("train", "train a small model on a sequence mixture");
    add_common(train_cmd);
    train_cmd->add_option("--model-out", o.model_out, "also write the model JSON here");

    auto* verify = app.add_subcommand("verify", "check eventual learning of a sequence");
    add_common(verify);
    verify->add_option("--spec", o.spec, "sequence spec (e.g. constant0, periodic:01)");
    verify->add_option("--eps", o.epsilon, "required margin");
    verify->add_option("--n0", o.n0, "first checked prefix length");
    verify->add_option("--N", o.horizon, "last checked prefix length");

    auto* nts = app.add_subcommand("nts", "next-token sensitivity around the all-zero prompt");
    add_common(nts);
    nts->add_option("--gamma", o.gammas, "perturbation fractions")->delimiter(',');
    nts->add_option("--samples", o.samples, "perturbed samples per gamma");
    nts->add_option("--length", o.length, "prompt length");

    auto* ntsp = app.add_subcommand("nts-positional", "sensitivity by perturbation position");
    add_common(ntsp);
    ntsp->add_option("--gamma", o.gamma_pos, "perturbation fraction");
    ntsp->add_option("--samples", o.samples, "perturbed samples per shape");
    ntsp->add_option("--length", o.length, "prompt length");

    auto* periodic = app.add_subcommand("periodic", "periodic pattern generation grid");
    add_common(periodic);
    periodic->add_option("--p", o.p_values, "periods")->delimiter(',');
    periodic->add_option("--r", o.r_values, "repetition counts")->delimiter(',');
    periodic->add_option("--steps", o.steps, "autoregressive steps");

    auto* critical = app.add_subcommand("critical-period", "smallest failing period");
    add_common(critical);
    critical->add_option("--r", o.r, "repetition count");
    critical->add_option("--p-max", o.p_max, "largest period scanned");
    critical->add_option("--steps", o.steps, "autoregressive steps");

    auto* modulus = app.add_subcommand("modulus", "empirical continuity modulus D(gamma, n)");
    add_common(modulus);
    modulus->add_option("--gamma", o.gammas, "perturbation fractions")->delimiter(',');
    modulus->add_option("--n", o.n_values, "prompt lengths")->delimiter(',');
    modulus->add_option("--samples", o.samples, "pairs per cell");
    modulus->add_option("--spec", o.spec, "base sequence spec");

    auto* collapse = app.add_subcommand("collapse", "agreement with the learned continuation");
    add_common(collapse);
    collapse->add_option("--spec", o.spec, "learned sequence spec");
    collapse->add_option("--gamma", o.gammas, "perturbation fractions")->delimiter(',');
    collapse->add_option("--samples", o.samples, "samples per gamma");
    collapse->add_option("--n", o.n, "prompt length");

    auto* isolation = app.add_subcommand("isolation", "refutation scan over (0^{k-1}1)^w");
    add_common(isolation);
    isolation->add_option("--k", o.k_values, "periods k")->delimiter(',');
    isolation->add_option("--N", o.horizon, "scan horizon");
    isolation->add_option("--eps", o.epsilon, "margin (defaults to the construction's)");
    isolation->add_option("--n0", o.n0, "first checked prefix length");

    auto* ssmax = app.add_subcommand("ssmax-compare", "paired softmax vs ssmax sensitivity");
    add_common(ssmax);
    ssmax->add_option("--gamma", o.gammas, "perturbation fractions")->delimiter(',');
    ssmax->add_option("--samples", o.samples, "samples per gamma");
    ssmax->add_option("--length", o.length, "prompt length");

    auto* pairs = app.add_subcommand("pair-sensitivity", "prompt-pair probability scatter");
    add_common(pairs);
    pairs->add_option("--pairs", o.pairs_file, "JSON file with [{alpha, beta}, ...]");

    // utility: export sequence prefixes as plain text, one sequence per line
    auto* prefix_cmd = app.add_subcommand("prefix", "print prefixes of sequence specs");
    std::vector<std::string> prefix_specs;
    long long prefix_n = 64;
    std::string prefix_file;
    prefix_cmd->add_option("specs", prefix_specs, "sequence specs (e.g. periodic:01)")
        ->required();
    prefix_cmd->add_option("--n", prefix_n, "prefix length");
    prefix_cmd->add_option("--out-file", prefix_file, "write here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    for (CLI::App* sub : app.get_subcommands()) chosen = sub->get_name();

    try {
        if (chosen == "prefix") {
            Alphabet binary;
            std::string out;
            for (const std::string& s : prefix_specs) {
                SeqSpec spec = parse_seqspec_shorthand(s);
                out += binary.render(prefix(spec, static_cast<std::size_t>(prefix_n))) + "\n";
            }
            if (prefix_file.empty())
                std::cout << out;
            else
                write_text_file(prefix_file, out);
            return 0;
        }
        Json base;
        if (!o.config_path.empty()) {
            base = Json::parse(read_text_file(o.config_path), nullptr, false);
            if (base.is_discarded()) throw ConfigError("config file is not valid JSON");
        } else {
            base = Json::object();
        }
        Json merged = merge(base, overrides_to_json(o, chosen));
        ExperimentConfig config = config_from_json(merged);
        return run_experiment(std::move(config), o.out_dir, command_line);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const RemoteError& e) {
        std::cerr << "remote error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
