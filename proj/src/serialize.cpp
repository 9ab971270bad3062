#include "cpelab/serialize.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace cpelab {

std::string double_to_hex(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", x);
    return buf;
}

double double_from_hex(const std::string& s) {
    char* end = nullptr;
    double x = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw std::invalid_argument("bad float literal: " + s);
    return x;
}

Json vec_to_json(const Vec& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(double_to_hex(x));
    return a;
}

Vec vec_from_json(const Json& j) {
    Vec v;
    v.reserve(j.size());
    for (const auto& x : j) v.push_back(double_from_hex(x.get<std::string>()));
    return v;
}

Json matrix_to_json(const Matrix& m) {
    return Json{{"rows", m.rows}, {"cols", m.cols}, {"data", vec_to_json(m.data)}};
}

Matrix matrix_from_json(const Json& j) {
    Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
    m.data = vec_from_json(j.at("data"));
    if (m.data.size() != static_cast<std::size_t>(m.rows) * m.cols)
        throw std::invalid_argument("matrix: data size does not match shape");
    return m;
}

namespace {

std::string tokens_to_string(const TokenSeq& t) {
    std::string s;
    for (Token x : t) {
        if (x < 0 || x > 9) throw std::invalid_argument("pattern token outside 0..9");
        s += static_cast<char>('0' + x);
    }
    return s;
}

TokenSeq tokens_from_string(const std::string& s) {
    TokenSeq t;
    for (char c : s) {
        if (c < '0' || c > '9') throw std::invalid_argument("bad pattern character");
        t.push_back(c - '0');
    }
    return t;
}

}  // namespace

Json seqspec_to_json(const SeqSpec& s) {
    switch (s.kind) {
        case SeqSpec::Kind::Constant:
            return Json{{"kind", "constant"}, {"token", s.constant}};
        case SeqSpec::Kind::Periodic:
            return Json{{"kind", "periodic"}, {"pattern", tokens_to_string(s.pattern)}};
        case SeqSpec::Kind::EventuallyPeriodic:
            return Json{{"kind", "eventually-periodic"},
                        {"preamble", tokens_to_string(s.preamble)},
                        {"pattern", tokens_to_string(s.pattern)}};
        case SeqSpec::Kind::IncreasingSpacing:
            return Json{{"kind", "increasing-spacing"}};
        case SeqSpec::Kind::Indicator: {
            const char* set = s.set == IndicatorSet::PowersOfTwo ? "powers-of-two"
                              : s.set == IndicatorSet::Squares   ? "squares"
                                                                 : "primes";
            return Json{{"kind", "indicator"}, {"set", set}};
        }
    }
    throw std::logic_error("seqspec_to_json: unreachable");
}

SeqSpec seqspec_from_json(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return SeqSpec::constant_of(j.at("token").get<Token>());
    if (kind == "periodic")
        return SeqSpec::periodic(tokens_from_string(j.at("pattern").get<std::string>()));
    if (kind == "eventually-periodic")
        return SeqSpec::eventually_periodic(
            tokens_from_string(j.at("preamble").get<std::string>()),
            tokens_from_string(j.at("pattern").get<std::string>()));
    if (kind == "increasing-spacing") return SeqSpec::increasing_spacing();
    if (kind == "indicator") {
        const std::string set = j.at("set").get<std::string>();
        if (set == "powers-of-two") return SeqSpec::indicator(IndicatorSet::PowersOfTwo);
        if (set == "squares") return SeqSpec::indicator(IndicatorSet::Squares);
        if (set == "primes") return SeqSpec::indicator(IndicatorSet::Primes);
        throw std::invalid_argument("unknown indicator set: " + set);
    }
    throw std::invalid_argument("unknown sequence kind: " + kind);
}

namespace {

const char* pe_kind_name(PeKind k) {
    switch (k) {
        case PeKind::Sinusoidal: return "sinusoidal";
        case PeKind::RotaryRelative: return "rotary-relative";
        case PeKind::TableBounded: return "table-bounded";
        case PeKind::ConstantZero: return "constant-zero";
    }
    return "?";
}

PeKind pe_kind_from(const std::string& s) {
    if (s == "sinusoidal") return PeKind::Sinusoidal;
    if (s == "rotary-relative") return PeKind::RotaryRelative;
    if (s == "table-bounded") return PeKind::TableBounded;
    if (s == "constant-zero") return PeKind::ConstantZero;
    throw std::invalid_argument("unknown positional encoding kind: " + s);
}

const char* weight_kind_name(WeightKind k) {
    switch (k) {
        case WeightKind::ConstantOne: return "constant-one";
        case WeightKind::DotProductExp: return "dot-product-exp";
        case WeightKind::DotProductExpRotary: return "dot-product-exp-rotary";
        case WeightKind::SsmaxScaled: return "ssmax-scaled";
        case WeightKind::OffsetExp: return "offset-exp";
    }
    return "?";
}

WeightKind weight_kind_from(const std::string& s) {
    if (s == "constant-one") return WeightKind::ConstantOne;
    if (s == "dot-product-exp") return WeightKind::DotProductExp;
    if (s == "dot-product-exp-rotary") return WeightKind::DotProductExpRotary;
    if (s == "ssmax-scaled") return WeightKind::SsmaxScaled;
    if (s == "offset-exp") return WeightKind::OffsetExp;
    throw std::invalid_argument("unknown weight kind: " + s);
}

const char* act_kind_name(ActKind k) {
    switch (k) {
        case ActKind::PassThrough: return "pass-through";
        case ActKind::Residual: return "residual";
        case ActKind::ResidualMlp: return "residual-mlp";
        case ActKind::FetchCompare: return "fetch-compare";
        case ActKind::FamilySelect: return "family-select";
    }
    return "?";
}

ActKind act_kind_from(const std::string& s) {
    if (s == "pass-through") return ActKind::PassThrough;
    if (s == "residual") return ActKind::Residual;
    if (s == "residual-mlp") return ActKind::ResidualMlp;
    if (s == "fetch-compare") return ActKind::FetchCompare;
    if (s == "family-select") return ActKind::FamilySelect;
    throw std::invalid_argument("unknown activation kind: " + s);
}

Json pe_to_json(const PositionalEncoding& pe) {
    Json j{{"kind", pe_kind_name(pe.kind)},
           {"dim", pe.dim},
           {"declared_bound", double_to_hex(pe.declared_bound)},
           {"clip", pe.clip}};
    if (pe.kind == PeKind::TableBounded) {
        Json t = Json::array();
        for (const Vec& v : pe.table) t.push_back(vec_to_json(v));
        j["table"] = t;
    }
    return j;
}

PositionalEncoding pe_from_json(const Json& j) {
    PositionalEncoding pe;
    pe.kind = pe_kind_from(j.at("kind").get<std::string>());
    pe.dim = j.at("dim").get<int>();
    pe.declared_bound = double_from_hex(j.at("declared_bound").get<std::string>());
    pe.clip = j.at("clip").get<int>();
    if (pe.kind == PeKind::TableBounded)
        for (const auto& v : j.at("table")) pe.table.push_back(vec_from_json(v));
    return pe;
}

Json weight_to_json(const WeightFunction& w) {
    Json j{{"kind", weight_kind_name(w.kind)}};
    if (!w.wq.empty()) j["wq"] = matrix_to_json(w.wq);
    if (!w.wk.empty()) j["wk"] = matrix_to_json(w.wk);
    if (w.kind == WeightKind::SsmaxScaled) j["ssmax_scale"] = double_to_hex(w.ssmax_scale);
    if (w.kind == WeightKind::OffsetExp) {
        j["target_offset"] = w.target_offset;
        j["sharpness"] = double_to_hex(w.sharpness);
    }
    return j;
}

WeightFunction weight_from_json(const Json& j) {
    WeightFunction w;
    w.kind = weight_kind_from(j.at("kind").get<std::string>());
    if (j.contains("wq")) w.wq = matrix_from_json(j.at("wq"));
    if (j.contains("wk")) w.wk = matrix_from_json(j.at("wk"));
    if (j.contains("ssmax_scale")) w.ssmax_scale = double_from_hex(j.at("ssmax_scale"));
    if (j.contains("target_offset")) w.target_offset = j.at("target_offset").get<int>();
    if (j.contains("sharpness")) w.sharpness = double_from_hex(j.at("sharpness"));
    return w;
}

Json act_to_json(const Activation& a) {
    Json j{{"kind", act_kind_name(a.kind)}};
    switch (a.kind) {
        case ActKind::PassThrough:
        case ActKind::Residual: break;
        case ActKind::ResidualMlp:
            j["w1"] = matrix_to_json(a.w1);
            j["w2"] = matrix_to_json(a.w2);
            j["b1"] = vec_to_json(a.b1);
            j["b2"] = vec_to_json(a.b2);
            j["layer_norm"] = a.layer_norm;
            break;
        case ActKind::FetchCompare:
            j["token_block"] = a.token_block;
            j["token_dim"] = a.token_dim;
            j["fetch_block"] = a.fetch_block;
            j["mismatch_index"] = a.mismatch_index;
            j["pos_block"] = a.pos_block;
            j["pos_dim"] = a.pos_dim;
            j["valid_lag"] = a.valid_lag;
            break;
        case ActKind::FamilySelect:
            j["token_block"] = a.token_block;
            j["token_dim"] = a.token_dim;
            j["select_sharpness"] = double_to_hex(a.select_sharpness);
            j["rate_indices"] = a.rate_indices;
            j["cand_blocks"] = a.cand_blocks;
            break;
    }
    return j;
}

Activation act_from_json(const Json& j) {
    Activation a;
    a.kind = act_kind_from(j.at("kind").get<std::string>());
    switch (a.kind) {
        case ActKind::PassThrough:
        case ActKind::Residual: break;
        case ActKind::ResidualMlp:
            a.w1 = matrix_from_json(j.at("w1"));
            a.w2 = matrix_from_json(j.at("w2"));
            a.b1 = vec_from_json(j.at("b1"));
            a.b2 = vec_from_json(j.at("b2"));
            a.layer_norm = j.value("layer_norm", false);
            break;
        case ActKind::FetchCompare:
            a.token_block = j.at("token_block").get<int>();
            a.token_dim = j.at("token_dim").get<int>();
            a.fetch_block = j.at("fetch_block").get<int>();
            a.mismatch_index = j.at("mismatch_index").get<int>();
            a.pos_block = j.at("pos_block").get<int>();
            a.pos_dim = j.at("pos_dim").get<int>();
            a.valid_lag = j.at("valid_lag").get<int>();
            break;
        case ActKind::FamilySelect:
            a.token_block = j.at("token_block").get<int>();
            a.token_dim = j.at("token_dim").get<int>();
            a.select_sharpness = double_from_hex(j.at("select_sharpness"));
            a.rate_indices = j.at("rate_indices").get<std::vector<int>>();
            a.cand_blocks = j.at("cand_blocks").get<std::vector<int>>();
            break;
    }
    return a;
}

Json embedding_to_json(const Embedding& e) {
    Json j{{"dim", e.dim}, {"declared_bound", double_to_hex(e.declared_bound)}};
    switch (e.kind) {
        case EmbKind::TokenTable:
            j["kind"] = "token-table";
            j["table"] = matrix_to_json(e.table);
            break;
        case EmbKind::NextSymbolOneHot:
            j["kind"] = "next-symbol-onehot";
            j["target"] = seqspec_to_json(e.target);
            j["token_dim"] = e.token_dim;
            break;
        case EmbKind::FamilyState:
            j["kind"] = "family-state";
            j["token_dim"] = e.token_dim;
            j["pos_block"] = e.pos_block;
            j["pos_dim"] = e.pos_dim;
            break;
    }
    return j;
}

Embedding embedding_from_json(const Json& j) {
    Embedding e;
    e.dim = j.at("dim").get<int>();
    e.declared_bound = double_from_hex(j.at("declared_bound").get<std::string>());
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "token-table") {
        e.kind = EmbKind::TokenTable;
        e.table = matrix_from_json(j.at("table"));
    } else if (kind == "next-symbol-onehot") {
        e.kind = EmbKind::NextSymbolOneHot;
        e.target = seqspec_from_json(j.at("target"));
        e.token_dim = j.at("token_dim").get<int>();
    } else if (kind == "family-state") {
        e.kind = EmbKind::FamilyState;
        e.token_dim = j.at("token_dim").get<int>();
        e.pos_block = j.at("pos_block").get<int>();
        e.pos_dim = j.at("pos_dim").get<int>();
    } else {
        throw std::invalid_argument("unknown embedding kind: " + kind);
    }
    return e;
}

Json readout_to_json(const Readout& r) {
    switch (r.kind) {
        case ReadoutKind::AffineSoftmax:
            return Json{{"kind", "affine-softmax"},
                        {"w", matrix_to_json(r.w)},
                        {"b", vec_to_json(r.b)}};
        case ReadoutKind::ConstantDist:
            return Json{{"kind", "constant"}, {"dist", vec_to_json(r.constant)}};
        case ReadoutKind::Lookup: {
            Json centers = Json::array(), dists = Json::array();
            for (const Vec& c : r.centers) centers.push_back(vec_to_json(c));
            for (const Vec& d : r.dists) dists.push_back(vec_to_json(d));
            return Json{{"kind", "lookup"}, {"centers", centers}, {"dists", dists}};
        }
    }
    throw std::logic_error("readout_to_json: unreachable");
}

Readout readout_from_json(const Json& j) {
    Readout r;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "affine-softmax") {
        r.kind = ReadoutKind::AffineSoftmax;
        r.w = matrix_from_json(j.at("w"));
        r.b = vec_from_json(j.at("b"));
    } else if (kind == "constant") {
        r.kind = ReadoutKind::ConstantDist;
        r.constant = vec_from_json(j.at("dist"));
    } else if (kind == "lookup") {
        r.kind = ReadoutKind::Lookup;
        for (const auto& c : j.at("centers")) r.centers.push_back(vec_from_json(c));
        for (const auto& d : j.at("dists")) r.dists.push_back(vec_from_json(d));
    } else {
        throw std::invalid_argument("unknown readout kind: " + kind);
    }
    return r;
}

}  // namespace

Json model_to_json(const TransformerModel& model) {
    Json layers = Json::array();
    for (const AttentionLayer& layer : model.layers) {
        layers.push_back(Json{{"pe", pe_to_json(layer.pe)},
                              {"weight", weight_to_json(layer.weight)},
                              {"value",
                               Json{{"m", matrix_to_json(layer.value.m)},
                                    {"bias", vec_to_json(layer.value.bias)}}},
                              {"act", act_to_json(layer.act)}});
    }
    return Json{{"format", "cpelab-model-v1"},
                {"alphabet", model.alphabet.labels()},
                {"dim", model.dim},
                {"embedding", embedding_to_json(model.embedding)},
                {"layers", layers},
                {"readout", readout_to_json(model.readout)}};
}

TransformerModel model_from_json(const Json& j) {
    if (j.value("format", "") != "cpelab-model-v1")
        throw std::invalid_argument("not a cpelab model document");
    TransformerModel model;
    model.alphabet = Alphabet(j.at("alphabet").get<std::vector<std::string>>());
    model.dim = j.at("dim").get<int>();
    model.embedding = embedding_from_json(j.at("embedding"));
    for (const auto& lj : j.at("layers")) {
        AttentionLayer layer;
        layer.pe = pe_from_json(lj.at("pe"));
        layer.weight = weight_from_json(lj.at("weight"));
        layer.value.m = matrix_from_json(lj.at("value").at("m"));
        layer.value.bias = vec_from_json(lj.at("value").at("bias"));
        layer.act = act_from_json(lj.at("act"));
        model.layers.push_back(std::move(layer));
    }
    model.readout = readout_from_json(j.at("readout"));
    return model;
}

void save_model(const TransformerModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << model_to_json(model).dump(1) << "\n";
}

TransformerModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    Json j = Json::parse(in);
    return model_from_json(j);
}

}  // namespace cpelab
