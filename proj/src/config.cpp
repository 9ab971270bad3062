#include "cpelab/config.hpp"

#include <algorithm>
#include <fstream>

#include "cpelab/experiments.hpp"

namespace cpelab {

const std::vector<double> kDefaultGammas = {0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};

namespace {

const std::vector<std::string> kExperiments = {
    "construct", "train",     "nts",       "nts-positional", "periodic",        "critical-period",
    "modulus",   "collapse",  "isolation", "ssmax-compare",  "pair-sensitivity", "verify"};

void check_fields(const Json& j, const std::string& ctx,
                  std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError(ctx + ": unknown field '" + it.key() + "'");
    }
}

TokenSeq parse_pattern(const std::string& s, const std::string& ctx) {
    if (s.empty()) throw ConfigError(ctx + ": empty pattern");
    TokenSeq t;
    for (char c : s) {
        if (c != '0' && c != '1') throw ConfigError(ctx + ": patterns use 0/1 only");
        t.push_back(c - '0');
    }
    return t;
}

}  // namespace

SeqSpec parse_seqspec_shorthand(const std::string& text) {
    if (text == "constant0") return SeqSpec::constant_of(0);
    if (text == "constant1") return SeqSpec::constant_of(1);
    if (text == "increasing") return SeqSpec::increasing_spacing();
    if (text == "powers2") return SeqSpec::indicator(IndicatorSet::PowersOfTwo);
    if (text == "squares") return SeqSpec::indicator(IndicatorSet::Squares);
    if (text == "primes") return SeqSpec::indicator(IndicatorSet::Primes);
    if (text.rfind("periodic:", 0) == 0)
        return SeqSpec::periodic(parse_pattern(text.substr(9), "spec"));
    if (text.rfind("evper:", 0) == 0) {
        std::string rest = text.substr(6);
        auto colon = rest.find(':');
        if (colon == std::string::npos)
            throw ConfigError("spec: evper needs preamble:pattern");
        TokenSeq pre;
        if (colon > 0) pre = parse_pattern(rest.substr(0, colon), "spec");
        return SeqSpec::eventually_periodic(pre, parse_pattern(rest.substr(colon + 1), "spec"));
    }
    throw ConfigError("spec: unknown shorthand '" + text + "'");
}

SeqSpec parse_seqspec_field(const Json& j) {
    if (j.is_string()) return parse_seqspec_shorthand(j.get<std::string>());
    try {
        return seqspec_from_json(j);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("spec: ") + e.what());
    }
}

namespace {

ModelSource model_source_from_json(const Json& j) {
    ModelSource src;
    if (j.contains("construct")) {
        check_fields(j, "model",
                     {"construct", "target", "eta", "periods", "sharpness", "max_lag"});
        const std::string what = j.at("construct").get<std::string>();
        if (what == "single") {
            src.kind = ModelSource::Kind::ConstructSingle;
            if (j.contains("target")) src.single.target = parse_seqspec_field(j.at("target"));
            src.single.eta = j.value("eta", 0.1);
        } else if (what == "family") {
            src.kind = ModelSource::Kind::ConstructFamily;
            if (!j.contains("periods")) throw ConfigError("model: family needs 'periods'");
            src.family.periods = j.at("periods").get<std::vector<int>>();
            src.family.sharpness = j.value("sharpness", 20.0);
            src.family.max_lag = j.value("max_lag", 0);
        } else {
            throw ConfigError("model: construct must be 'single' or 'family'");
        }
    } else if (j.contains("file")) {
        check_fields(j, "model", {"file"});
        src.kind = ModelSource::Kind::File;
        src.file = j.at("file").get<std::string>();
    } else if (j.contains("remote")) {
        check_fields(j, "model", {"remote"});
        const Json& r = j.at("remote");
        check_fields(r, "model.remote",
                     {"base_url", "model", "auth_env", "timeout_s", "max_retries", "top_k",
                      "chat", "backoff_ms", "in_flight", "instruction"});
        src.kind = ModelSource::Kind::Remote;
        src.remote.base_url = r.at("base_url").get<std::string>();
        src.remote.model_name = r.value("model", "");
        src.remote.auth_env = r.value("auth_env", "");
        src.remote.timeout_seconds = r.value("timeout_s", 30.0);
        src.remote.max_retries = r.value("max_retries", 3);
        src.remote.top_k = r.value("top_k", 20);
        src.remote.chat_completions = r.value("chat", false);
        src.remote.backoff_base_ms = r.value("backoff_ms", 250);
        src.remote.in_flight = r.value("in_flight", 4);
        if (r.contains("instruction"))
            src.remote.instruction_prefix = r.at("instruction").get<std::string>();
        else
            src.remote.instruction_prefix = "";  // filled per experiment in normalize
    } else {
        throw ConfigError("model: need one of 'construct', 'file', 'remote'");
    }
    return src;
}

Json model_to_config_json(const ModelSource& src) {
    switch (src.kind) {
        case ModelSource::Kind::ConstructSingle:
            return Json{{"construct", "single"},
                        {"target", seqspec_to_json(src.single.target)},
                        {"eta", src.single.eta}};
        case ModelSource::Kind::ConstructFamily:
            return Json{{"construct", "family"},
                        {"periods", src.family.periods},
                        {"sharpness", src.family.sharpness},
                        {"max_lag", src.family.max_lag}};
        case ModelSource::Kind::File: return Json{{"file", src.file}};
        case ModelSource::Kind::Remote:
            return Json{{"remote", Json{{"base_url", src.remote.base_url},
                                        {"model", src.remote.model_name},
                                        {"auth_env", src.remote.auth_env},
                                        {"timeout_s", src.remote.timeout_seconds},
                                        {"max_retries", src.remote.max_retries},
                                        {"top_k", src.remote.top_k},
                                        {"chat", src.remote.chat_completions},
                                        {"backoff_ms", src.remote.backoff_base_ms},
                                        {"in_flight", src.remote.in_flight},
                                        {"instruction", src.remote.instruction_prefix}}}};
    }
    throw std::logic_error("model_to_config_json: unreachable");
}

PeKind pe_from_config(const std::string& s) {
    if (s == "rotary-relative") return PeKind::RotaryRelative;
    if (s == "sinusoidal") return PeKind::Sinusoidal;
    if (s == "constant-zero") return PeKind::ConstantZero;
    throw ConfigError("train.pe: unknown kind '" + s + "' (table-bounded is not trainable)");
}

const char* pe_to_config(PeKind k) {
    switch (k) {
        case PeKind::RotaryRelative: return "rotary-relative";
        case PeKind::Sinusoidal: return "sinusoidal";
        case PeKind::ConstantZero: return "constant-zero";
        case PeKind::TableBounded: break;
    }
    throw std::logic_error("pe_to_config: not a trainable encoding");
}

TrainableConfig train_from_json(const Json& j) {
    check_fields(j, "train",
                 {"dim", "layers", "pe", "rotary_clip", "context", "batch", "steps", "lr",
                  "optimizer", "adam_beta1", "adam_beta2", "adam_eps", "init_scale",
                  "window_horizon", "mixture"});
    TrainableConfig t;
    t.dim = j.value("dim", 32);
    t.num_layers = j.value("layers", 2);
    if (j.contains("pe")) t.pe = pe_from_config(j.at("pe").get<std::string>());
    t.rotary_clip = j.value("rotary_clip", 64);
    t.context = j.value("context", 96);
    t.batch = j.value("batch", 12);
    t.steps = j.value("steps", 3000);
    t.lr = j.value("lr", 3e-4);
    t.optimizer = j.value("optimizer", "adam");
    t.adam_beta1 = j.value("adam_beta1", 0.9);
    t.adam_beta2 = j.value("adam_beta2", 0.999);
    t.adam_eps = j.value("adam_eps", 1e-8);
    t.init_scale = j.value("init_scale", 1.0);
    t.window_horizon = j.value("window_horizon", std::uint64_t{4096});
    if (!j.contains("mixture")) throw ConfigError("train: 'mixture' is required");
    for (const Json& entry : j.at("mixture")) {
        check_fields(entry, "train.mixture[]", {"spec", "weight"});
        t.mixture.emplace_back(parse_seqspec_field(entry.at("spec")), entry.value("weight", 1.0));
    }
    return t;
}

Json train_to_json(const TrainableConfig& t) {
    Json mixture = Json::array();
    for (const auto& [spec, w] : t.mixture)
        mixture.push_back(Json{{"spec", seqspec_to_json(spec)}, {"weight", w}});
    return Json{{"dim", t.dim},
                {"layers", t.num_layers},
                {"pe", pe_to_config(t.pe)},
                {"rotary_clip", t.rotary_clip},
                {"context", t.context},
                {"batch", t.batch},
                {"steps", t.steps},
                {"lr", t.lr},
                {"optimizer", t.optimizer},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_eps", t.adam_eps},
                {"init_scale", t.init_scale},
                {"window_horizon", t.window_horizon},
                {"mixture", mixture}};
}

void normalize(ExperimentConfig& c) {
    if (std::find(kExperiments.begin(), kExperiments.end(), c.experiment) == kExperiments.end())
        throw ConfigError("experiment: unknown kind '" + c.experiment + "'");

    const bool needs_model = c.experiment != "train";
    if (needs_model && !c.model)
        throw ConfigError("model: required for experiment '" + c.experiment + "'");
    if (c.experiment == "train" && !c.train_given)
        throw ConfigError("train: configuration block required");

    if (c.gammas.empty()) {
        if (c.experiment == "modulus")
            c.gammas = {1.0 / 64, 1.0 / 16, 1.0 / 4};
        else if (c.experiment == "collapse")
            c.gammas = {0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
        else if (c.experiment == "ssmax-compare")
            c.gammas = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
        else
            c.gammas = kDefaultGammas;
    }
    if (c.p_values.empty())
        for (int p = 2; p <= c.p_max; ++p) c.p_values.push_back(p);
    if (c.r_values.empty()) c.r_values = {1, 4, 10};
    if (c.n_values.empty()) c.n_values = {64, 256, 1024};
    if (c.k_values.empty()) c.k_values = {2, 4, 8, 16, 32};
    if (c.shapes.empty()) c.shapes = default_betabinomial_shapes();

    // remote runs of the sequence protocols carry the natural-language
    // instruction; local token models take the raw sequence
    if (c.model && c.model->kind == ModelSource::Kind::Remote &&
        c.model->remote.instruction_prefix.empty()) {
        if (c.experiment == "periodic" || c.experiment == "critical-period")
            c.model->remote.instruction_prefix =
                "Complete the following periodic sequence with 0s and 1s:";
        else
            c.model->remote.instruction_prefix = "Complete the sequence with 0s and 1s:";
    }
}

}  // namespace

ExperimentConfig config_from_json(const Json& j) {
    check_fields(j, "config",
                 {"experiment", "seed",   "model",   "gammas",  "samples", "length",
                  "steps",      "p_values", "r_values", "p_max", "r",       "n_values",
                  "n",          "k_values", "horizon", "epsilon", "n0",      "shapes",
                  "positional_gamma", "spec", "pairs",  "pairs_file", "pair_init", "train",
                  "model_out"});
    ExperimentConfig c;
    if (!j.contains("experiment")) throw ConfigError("config: missing field 'experiment'");
    c.experiment = j.at("experiment").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("model")) c.model = model_source_from_json(j.at("model"));
    if (j.contains("gammas")) c.gammas = j.at("gammas").get<std::vector<double>>();
    c.samples = j.value("samples", std::size_t{100});
    c.length = j.value("length", std::size_t{190});
    c.steps = j.value("steps", std::size_t{505});
    if (j.contains("p_values")) c.p_values = j.at("p_values").get<std::vector<int>>();
    if (j.contains("r_values")) c.r_values = j.at("r_values").get<std::vector<int>>();
    c.p_max = j.value("p_max", 40);
    c.r = j.value("r", 10);
    if (j.contains("n_values")) c.n_values = j.at("n_values").get<std::vector<std::size_t>>();
    c.n = j.value("n", std::size_t{256});
    if (j.contains("k_values")) c.k_values = j.at("k_values").get<std::vector<int>>();
    c.horizon = j.value("horizon", std::uint64_t{2000});
    c.epsilon = j.value("epsilon", 0.8);
    c.n0 = j.value("n0", std::uint64_t{1});
    if (j.contains("shapes")) {
        for (const Json& s : j.at("shapes")) {
            if (!s.is_array() || s.size() != 2)
                throw ConfigError("shapes: each entry is a [u, v] pair");
            c.shapes.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
        }
    }
    c.positional_gamma = j.value("positional_gamma", 0.1);
    if (j.contains("spec")) {
        c.spec = parse_seqspec_field(j.at("spec"));
        c.spec_given = true;
    }
    if (j.contains("pairs")) {
        for (const Json& p : j.at("pairs")) {
            check_fields(p, "pairs[]", {"alpha", "beta"});
            c.pairs.emplace_back(p.at("alpha").get<std::string>(), p.at("beta").get<std::string>());
        }
    }
    c.pairs_file = j.value("pairs_file", "");
    if (j.contains("pair_init")) {
        const Json& p = j.at("pair_init");
        check_fields(p, "pair_init", {"dim", "layers", "init_scale", "ssmax_scale"});
        c.pair_init.dim = p.value("dim", 16);
        c.pair_init.num_layers = p.value("layers", 2);
        c.pair_init.init_scale = p.value("init_scale", 1.0);
        c.pair_init.ssmax_scale = p.value("ssmax_scale", 1.0);
    }
    if (j.contains("train")) {
        c.train = train_from_json(j.at("train"));
        c.train_given = true;
    }
    c.model_out = j.value("model_out", "");
    normalize(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    return config_from_json(j);
}

Json effective_json(const ExperimentConfig& c) {
    Json j;
    j["experiment"] = c.experiment;
    if (c.seed) j["seed"] = *c.seed;
    if (c.model) j["model"] = model_to_config_json(*c.model);
    j["gammas"] = c.gammas;
    j["samples"] = c.samples;
    j["length"] = c.length;
    j["steps"] = c.steps;
    j["p_values"] = c.p_values;
    j["r_values"] = c.r_values;
    j["p_max"] = c.p_max;
    j["r"] = c.r;
    j["n_values"] = c.n_values;
    j["n"] = c.n;
    j["k_values"] = c.k_values;
    j["horizon"] = c.horizon;
    j["epsilon"] = c.epsilon;
    j["n0"] = c.n0;
    Json shapes = Json::array();
    for (auto [u, v] : c.shapes) shapes.push_back(Json::array({u, v}));
    j["shapes"] = shapes;
    j["positional_gamma"] = c.positional_gamma;
    j["spec"] = seqspec_to_json(c.spec);
    if (!c.pairs.empty()) {
        Json pairs = Json::array();
        for (const auto& [a, b] : c.pairs) pairs.push_back(Json{{"alpha", a}, {"beta", b}});
        j["pairs"] = pairs;
    }
    if (!c.pairs_file.empty()) j["pairs_file"] = c.pairs_file;
    j["pair_init"] = Json{{"dim", c.pair_init.dim},
                          {"layers", c.pair_init.num_layers},
                          {"init_scale", c.pair_init.init_scale},
                          {"ssmax_scale", c.pair_init.ssmax_scale}};
    if (c.train_given) j["train"] = train_to_json(c.train);
    if (!c.model_out.empty()) j["model_out"] = c.model_out;
    return j;
}

}  // namespace cpelab
