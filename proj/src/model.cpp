#include "cpelab/model.hpp"

#include <algorithm>
#include <cmath>

#include "cpelab/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cpelab {

Vec matvec(const Matrix& m, const Vec& x) {
    if (static_cast<std::size_t>(m.cols) != x.size())
        throw std::invalid_argument("matvec: dimension mismatch");
    Vec y(static_cast<std::size_t>(m.rows), 0.0);
    for (int r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        const double* row = m.data.data() + static_cast<std::size_t>(r) * m.cols;
        for (int c = 0; c < m.cols; ++c) acc += row[c] * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = acc;
    }
    return y;
}

namespace {

double dot(const Vec& a, const Vec& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double clamp_score(double s) { return std::min(kScoreClamp, std::max(-kScoreClamp, s)); }

}  // namespace

// ---------------------------------------------------------------------------

Vec PositionalEncoding::at(std::uint64_t i, std::uint64_t j) const {
    if (i == 0 || j < i) throw std::invalid_argument("PositionalEncoding: need 1 <= i <= j");
    Vec p(static_cast<std::size_t>(dim), 0.0);
    switch (kind) {
        case PeKind::ConstantZero: return p;
        case PeKind::Sinusoidal: {
            auto pos = static_cast<double>(i);
            for (int t = 0; 2 * t < dim; ++t) {
                double freq = std::pow(10000.0, -2.0 * t / dim);
                p[static_cast<std::size_t>(2 * t)] = std::sin(pos * freq);
                if (2 * t + 1 < dim) p[static_cast<std::size_t>(2 * t + 1)] = std::cos(pos * freq);
            }
            return p;
        }
        case PeKind::RotaryRelative: {
            std::uint64_t delta = std::min<std::uint64_t>(j - i, static_cast<std::uint64_t>(clip));
            auto off = static_cast<double>(delta);
            for (int t = 0; 2 * t < dim; ++t) {
                double freq = std::pow(10000.0, -2.0 * t / dim);
                p[static_cast<std::size_t>(2 * t)] = std::sin(off * freq);
                if (2 * t + 1 < dim) p[static_cast<std::size_t>(2 * t + 1)] = std::cos(off * freq);
            }
            return p;
        }
        case PeKind::TableBounded: {
            std::uint64_t delta =
                std::min<std::uint64_t>(j - i, static_cast<std::uint64_t>(clip) + 1);
            const Vec& entry = table.at(static_cast<std::size_t>(delta));
            return entry;
        }
    }
    throw std::logic_error("PositionalEncoding: unreachable");
}

PositionalEncoding PositionalEncoding::sinusoidal(int dim) {
    PositionalEncoding pe;
    pe.kind = PeKind::Sinusoidal;
    pe.dim = dim;
    pe.declared_bound = 1.0;
    return pe;
}

PositionalEncoding PositionalEncoding::rotary_relative(int dim, int clip) {
    PositionalEncoding pe;
    pe.kind = PeKind::RotaryRelative;
    pe.dim = dim;
    pe.declared_bound = 1.0;
    pe.clip = clip;
    return pe;
}

PositionalEncoding PositionalEncoding::table_one_hot_offset(int clip) {
    PositionalEncoding pe;
    pe.kind = PeKind::TableBounded;
    pe.dim = clip + 2;
    pe.declared_bound = 1.0;
    pe.clip = clip;
    pe.table.resize(static_cast<std::size_t>(clip) + 2);
    for (int d = 0; d <= clip + 1; ++d) {
        Vec v(static_cast<std::size_t>(clip) + 2, 0.0);
        v[static_cast<std::size_t>(d)] = 1.0;
        pe.table[static_cast<std::size_t>(d)] = std::move(v);
    }
    return pe;
}

PositionalEncoding PositionalEncoding::constant_zero(int dim) {
    PositionalEncoding pe;
    pe.kind = PeKind::ConstantZero;
    pe.dim = dim;
    pe.declared_bound = 0.0;
    return pe;
}

// ---------------------------------------------------------------------------

double WeightFunction::score_from_qk(const Vec& q, const Vec& k, const Vec& p,
                                     std::uint64_t query_pos) const {
    const auto d = static_cast<int>(q.size());
    switch (kind) {
        case WeightKind::ConstantOne: return 0.0;
        case WeightKind::DotProductExp:
            return (dot(q, k) + dot(q, p)) / std::sqrt(static_cast<double>(d));
        case WeightKind::SsmaxScaled: {
            double base = (dot(q, k) + dot(q, p)) / std::sqrt(static_cast<double>(d));
            return ssmax_scale * std::log(static_cast<double>(query_pos)) * base;
        }
        case WeightKind::DotProductExpRotary: {
            // p carries interleaved (sin, cos) of the clipped relative offset;
            // the pair rotation reproduces rotary attention's relative form.
            double acc = 0.0;
            int t = 0;
            for (; 2 * t + 1 < d; ++t) {
                double s = p[static_cast<std::size_t>(2 * t)];
                double c = p[static_cast<std::size_t>(2 * t + 1)];
                double q0 = q[static_cast<std::size_t>(2 * t)];
                double q1 = q[static_cast<std::size_t>(2 * t + 1)];
                double k0 = k[static_cast<std::size_t>(2 * t)];
                double k1 = k[static_cast<std::size_t>(2 * t + 1)];
                acc += c * (q0 * k0 + q1 * k1) + s * (q0 * k1 - q1 * k0);
            }
            if (2 * t < d) acc += q[static_cast<std::size_t>(2 * t)] * k[static_cast<std::size_t>(2 * t)];
            return acc / std::sqrt(static_cast<double>(d));
        }
        case WeightKind::OffsetExp:
            return sharpness * p.at(static_cast<std::size_t>(target_offset));
    }
    throw std::logic_error("WeightFunction: unreachable");
}

double WeightFunction::eval(const Vec& key_x, const Vec& query_x, const Vec& p,
                            std::uint64_t query_pos) const {
    if (kind == WeightKind::ConstantOne) return 1.0;
    if (kind == WeightKind::OffsetExp)
        return std::exp(clamp_score(sharpness * p.at(static_cast<std::size_t>(target_offset))));
    Vec q = matvec(wq, query_x);
    Vec k = matvec(wk, key_x);
    return std::exp(clamp_score(score_from_qk(q, k, p, query_pos)));
}

// ---------------------------------------------------------------------------

Vec ValueFn::apply(const Vec& x) const {
    Vec v = matvec(m, x);
    if (!bias.empty()) {
        if (bias.size() != v.size()) throw std::invalid_argument("ValueFn: bias dimension");
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += bias[i];
    }
    return v;
}

namespace {

Vec layer_norm_vec(const Vec& h) {
    double mean = 0.0;
    for (double x : h) mean += x;
    mean /= static_cast<double>(h.size());
    double var = 0.0;
    for (double x : h) var += (x - mean) * (x - mean);
    var /= static_cast<double>(h.size());
    double inv = 1.0 / std::sqrt(var + 1e-5);
    Vec out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) out[i] = (h[i] - mean) * inv;
    return out;
}

}  // namespace

Vec Activation::apply(const Vec& a, const Vec& x) const {
    switch (kind) {
        case ActKind::PassThrough: return a;
        case ActKind::Residual: {
            if (a.size() != x.size()) throw std::invalid_argument("Activation: dimension mismatch");
            Vec y(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = a[i] + x[i];
            return y;
        }
        case ActKind::ResidualMlp: {
            if (a.size() != x.size()) throw std::invalid_argument("Activation: dimension mismatch");
            Vec h(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) h[i] = a[i] + x[i];
            Vec hn = layer_norm ? layer_norm_vec(h) : h;
            Vec u = matvec(w1, hn);
            for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::tanh(u[i] + b1[i]);
            Vec z = matvec(w2, u);
            Vec y(h.size());
            for (std::size_t i = 0; i < h.size(); ++i) y[i] = h[i] + z[i] + b2[i];
            return y;
        }
        case ActKind::FetchCompare: {
            // .at() so malformed block layouts from a hand-edited model
            // document fail loudly instead of reading out of range
            Vec y = x;
            if (fetch_block >= 0)
                for (int c = 0; c < token_dim; ++c)
                    y.at(static_cast<std::size_t>(fetch_block + c)) =
                        a.at(static_cast<std::size_t>(token_block + c));
            if (mismatch_index >= 0) {
                double validity = 0.0;
                for (int idx = valid_lag + 1; idx < pos_dim; ++idx)
                    validity += x.at(static_cast<std::size_t>(pos_block + idx));
                double agree = 0.0;
                for (int c = 0; c < token_dim; ++c)
                    agree += a[static_cast<std::size_t>(token_block + c)] *
                             x[static_cast<std::size_t>(token_block + c)];
                y.at(static_cast<std::size_t>(mismatch_index)) = validity * (1.0 - agree);
            }
            return y;
        }
        case ActKind::FamilySelect: {
            Vec neg_scores(rate_indices.size());
            for (std::size_t t = 0; t < rate_indices.size(); ++t)
                neg_scores[t] =
                    -select_sharpness * a.at(static_cast<std::size_t>(rate_indices[t]));
            Dist lambda = softmax(neg_scores);
            Vec y = x;
            for (int c = 0; c < token_dim; ++c) {
                double q = 0.0;
                for (std::size_t t = 0; t < cand_blocks.size(); ++t)
                    q += lambda[t] * x.at(static_cast<std::size_t>(cand_blocks[t] + c));
                y.at(static_cast<std::size_t>(token_block + c)) = q;
            }
            return y;
        }
    }
    throw std::logic_error("Activation: unreachable");
}

// ---------------------------------------------------------------------------

Vec Embedding::at(Token t, std::uint64_t pos) const {
    switch (kind) {
        case EmbKind::TokenTable: {
            Vec v(static_cast<std::size_t>(dim));
            for (int c = 0; c < dim; ++c) v[static_cast<std::size_t>(c)] = table(t, c);
            return v;
        }
        case EmbKind::NextSymbolOneHot: {
            // content-independent: only the upcoming target symbol is stored
            Vec v(static_cast<std::size_t>(dim), 0.0);
            Token next = symbol_at(target, pos + 1);
            v[static_cast<std::size_t>(next)] = 1.0;
            return v;
        }
        case EmbKind::FamilyState: {
            Vec v(static_cast<std::size_t>(dim), 0.0);
            v[static_cast<std::size_t>(t)] = 1.0;
            auto idx = static_cast<int>(std::min<std::uint64_t>(
                pos, static_cast<std::uint64_t>(pos_dim) - 1));
            v[static_cast<std::size_t>(pos_block + idx)] = 1.0;
            return v;
        }
    }
    throw std::logic_error("Embedding: unreachable");
}

// ---------------------------------------------------------------------------

Vec Readout::logits(const Vec& y) const {
    if (kind != ReadoutKind::AffineSoftmax)
        throw std::logic_error("Readout::logits: not an affine-softmax readout");
    Vec l = matvec(w, y);
    for (std::size_t i = 0; i < l.size(); ++i) l[i] += b[i];
    return l;
}

Dist Readout::apply(const Vec& y) const {
    switch (kind) {
        case ReadoutKind::AffineSoftmax: return softmax(logits(y));
        case ReadoutKind::ConstantDist: return Dist(constant);
        case ReadoutKind::Lookup: {
            std::size_t best = 0;
            double best_d = linf_distance(y, centers.at(0));
            for (std::size_t c = 1; c < centers.size(); ++c) {
                double dist = linf_distance(y, centers[c]);
                if (dist < best_d) {
                    best_d = dist;
                    best = c;
                }
            }
            return Dist(dists.at(best));
        }
    }
    throw std::logic_error("Readout: unreachable");
}

// ---------------------------------------------------------------------------

namespace {

// Per-call cache of p(i, j) vectors so the inner attention loop avoids
// reallocating; usable because every supported kind depends on i alone or on
// the clipped offset alone.
class PeCache {
public:
    PeCache(const PositionalEncoding& pe, std::size_t n) : pe_(&pe) {
        switch (pe.kind) {
            case PeKind::ConstantZero:
                zero_.assign(static_cast<std::size_t>(pe.dim), 0.0);
                break;
            case PeKind::Sinusoidal:
                by_i_.resize(n);
                for (std::size_t i = 0; i < n; ++i) by_i_[i] = pe.at(i + 1, i + 1);
                break;
            case PeKind::RotaryRelative:
            case PeKind::TableBounded: {
                std::size_t max_delta =
                    std::min(n > 0 ? n - 1 : 0, static_cast<std::size_t>(pe.clip) + 1);
                by_offset_.resize(max_delta + 1);
                for (std::size_t d = 0; d <= max_delta; ++d) by_offset_[d] = pe.at(1, 1 + d);
                break;
            }
        }
    }

    // 1-based positions.
    const Vec& at(std::size_t i, std::size_t j) const {
        switch (pe_->kind) {
            case PeKind::ConstantZero: return zero_;
            case PeKind::Sinusoidal: return by_i_[i - 1];
            default: {
                std::size_t delta =
                    std::min(j - i, static_cast<std::size_t>(pe_->clip) + 1);
                return by_offset_[std::min(delta, by_offset_.size() - 1)];
            }
        }
    }

private:
    const PositionalEncoding* pe_;
    Vec zero_;
    std::vector<Vec> by_i_;
    std::vector<Vec> by_offset_;
};

bool needs_qk(WeightKind k) {
    return k == WeightKind::DotProductExp || k == WeightKind::DotProductExpRotary ||
           k == WeightKind::SsmaxScaled;
}

// Attention vector at query position j (1-based) over precomputed keys/values.
Vec attention_at(const AttentionLayer& layer, const PeCache& pe, const Vec& query_x,
                 const std::vector<Vec>& keys, const std::vector<Vec>& values, std::size_t j,
                 long* clamp_hits) {
    const std::size_t d = values[0].size();
    Vec q;
    if (needs_qk(layer.weight.kind)) q = matvec(layer.weight.wq, query_x);
    Vec num(d, 0.0);
    double den = 0.0;
    static const Vec kEmpty;
    for (std::size_t i = 1; i <= j; ++i) {
        double w;
        if (layer.weight.kind == WeightKind::ConstantOne) {
            w = 1.0;
        } else {
            const Vec& k = needs_qk(layer.weight.kind) ? keys[i - 1] : kEmpty;
            double s = layer.weight.score_from_qk(q, k, pe.at(i, j), j);
            double sc = clamp_score(s);
            if (clamp_hits && sc != s) ++(*clamp_hits);
            w = std::exp(sc);
        }
        den += w;
        const Vec& v = values[i - 1];
        for (std::size_t c = 0; c < d; ++c) num[c] += w * v[c];
    }
    for (std::size_t c = 0; c < d; ++c) num[c] /= den;
    return num;
}

}  // namespace

std::vector<Vec> layer_forward(const AttentionLayer& layer, const std::vector<Vec>& xs,
                               ForwardStats* stats) {
    if (xs.empty()) throw std::invalid_argument("layer_forward: empty input");
    const std::size_t n = xs.size();
    const std::size_t d = xs[0].size();
    for (const Vec& x : xs)
        if (x.size() != d) throw std::invalid_argument("layer_forward: ragged input");

    if (needs_qk(layer.weight.kind) &&
        (static_cast<std::size_t>(layer.weight.wq.cols) != d ||
         static_cast<std::size_t>(layer.weight.wk.cols) != d))
        throw std::invalid_argument("layer_forward: weight matrices do not match input dim");
    if (layer.weight.kind == WeightKind::OffsetExp && layer.weight.target_offset >= layer.pe.dim)
        throw std::invalid_argument("layer_forward: offset weight probes outside the encoding");

    std::vector<Vec> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = layer.value.apply(xs[i]);

    std::vector<Vec> keys;
    if (needs_qk(layer.weight.kind)) {
        keys.resize(n);
        for (std::size_t i = 0; i < n; ++i) keys[i] = matvec(layer.weight.wk, xs[i]);
    }

    PeCache pe(layer.pe, n);
    std::vector<Vec> ys(n);
    long clamp_hits = 0;
    ParallelGuard guard;

#pragma omp parallel for schedule(dynamic, 8) reduction(+ : clamp_hits) if (n >= 32)
    for (long long jj = 0; jj < static_cast<long long>(n); ++jj) {
        long local_hits = 0;
        guard.run([&, jj] {
            auto j = static_cast<std::size_t>(jj);
            Vec a = attention_at(layer, pe, xs[j], keys, values, j + 1, &local_hits);
            ys[j] = layer.act.apply(a, xs[j]);
        });
        clamp_hits += local_hits;
    }
    guard.rethrow();

    for (const Vec& y : ys)
        if (!all_finite(y))
            throw std::runtime_error("layer_forward: non-finite output (invalid weight function?)");
    if (stats) stats->clamp_hits += clamp_hits;
    return ys;
}

std::vector<Vec> embed_all(const TransformerModel& model, const TokenSeq& tokens) {
    std::vector<Vec> xs;
    xs.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!model.alphabet.contains(tokens[i]))
            throw std::invalid_argument("token outside alphabet");
        xs.push_back(model.embedding.at(tokens[i], i + 1));
    }
    return xs;
}

Dist transformer_forward(const TransformerModel& model, const TokenSeq& tokens) {
    if (tokens.empty()) throw std::invalid_argument("transformer_forward: empty prompt");
    std::vector<Vec> xs = embed_all(model, tokens);
    for (const AttentionLayer& layer : model.layers) xs = layer_forward(layer, xs);
    return model.readout.apply(xs.back());
}

std::vector<Dist> transformer_all_dists(const TransformerModel& model, const TokenSeq& tokens) {
    if (tokens.empty()) throw std::invalid_argument("transformer_all_dists: empty prompt");
    std::vector<Vec> xs = embed_all(model, tokens);
    for (const AttentionLayer& layer : model.layers) xs = layer_forward(layer, xs);
    std::vector<Dist> out;
    out.reserve(xs.size());
    for (const Vec& y : xs) out.push_back(model.readout.apply(y));
    return out;
}

// ---------------------------------------------------------------------------

DecodeState::DecodeState(const TransformerModel& model, const TokenSeq& prompt)
    : model_(&model),
      states_(model.layers.size() + 1),
      keys_(model.layers.size()),
      values_(model.layers.size()) {
    if (prompt.empty()) throw std::invalid_argument("DecodeState: empty prompt");
    for (Token t : prompt) push(t);
}

void DecodeState::push(Token t) {
    if (!model_->alphabet.contains(t)) throw std::invalid_argument("token outside alphabet");
    append_column(t);
    ++length_;
}

void DecodeState::append_column(Token t) {
    std::size_t pos = length_ + 1;
    Vec cur = model_->embedding.at(t, pos);
    states_[0].push_back(cur);
    for (std::size_t l = 0; l < model_->layers.size(); ++l) {
        const AttentionLayer& layer = model_->layers[l];
        values_[l].push_back(layer.value.apply(cur));
        if (needs_qk(layer.weight.kind))
            keys_[l].push_back(matvec(layer.weight.wk, cur));
        PeCache pe(layer.pe, pos);
        Vec a = attention_at(layer, pe, cur, keys_[l], values_[l], pos, nullptr);
        Vec y = layer.act.apply(a, cur);
        if (!all_finite(y)) throw std::runtime_error("DecodeState: non-finite state");
        states_[l + 1].push_back(std::move(y));
        cur = states_[l + 1].back();
    }
}

const Vec& DecodeState::last_state() const { return states_.back().back(); }

Dist DecodeState::last_dist() const { return model_->readout.apply(last_state()); }

TokenSeq decode_autoregressive(const TransformerModel& model, const TokenSeq& prompt,
                               std::size_t steps, DecodeMode mode) {
    TokenSeq generated;
    if (steps == 0) return generated;
    DecodeState state(model, prompt);
    for (std::size_t s = 0; s < steps; ++s) {
        Dist d = state.last_dist();
        Token next;
        if (mode.greedy) {
            next = static_cast<Token>(argmax_with_margin(d).index);
        } else {
            // temperature reshaping: p_i^{1/tau}, renormalized
            Vec logits(d.size());
            for (std::size_t i = 0; i < d.size(); ++i)
                logits[i] = std::log(std::max(d[i], 1e-300)) / mode.temperature;
            Dist shaped = softmax(logits);
            double x = mode.rng.next_double();
            double acc = 0.0;
            std::size_t pick = shaped.size() - 1;
            for (std::size_t i = 0; i < shaped.size(); ++i) {
                acc += shaped[i];
                if (x < acc) {
                    pick = i;
                    break;
                }
            }
            next = static_cast<Token>(pick);
        }
        generated.push_back(next);
        state.push(next);
    }
    return generated;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::uint64_t> sample_positions_for_compactness(std::uint64_t horizon) {
    std::vector<std::uint64_t> ps;
    for (std::uint64_t i = 1; i <= std::min<std::uint64_t>(horizon, 64); ++i) ps.push_back(i);
    for (std::uint64_t i = 64; i < horizon; i *= 2) ps.push_back(i);
    for (std::uint64_t frac = 2; frac <= 5; ++frac)
        if (horizon / frac >= 1) ps.push_back(horizon / frac);
    ps.push_back(horizon);
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    return ps;
}

}  // namespace

CompactnessReport check_compactness(const TransformerModel& model, std::uint64_t horizon) {
    if (horizon < 1) throw std::invalid_argument("check_compactness: horizon must be >= 1");
    CompactnessReport rep;
    rep.embedding_bound = model.embedding.declared_bound;
    auto positions = sample_positions_for_compactness(horizon);
    for (std::uint64_t i : positions)
        for (std::size_t t = 0; t < model.alphabet.size(); ++t)
            rep.max_embedding_norm = std::max(
                rep.max_embedding_norm, linf_norm(model.embedding.at(static_cast<Token>(t), i)));
    bool pe_ok = true;
    rep.pe_bound = 0.0;
    for (const AttentionLayer& layer : model.layers) {
        rep.pe_bound = std::max(rep.pe_bound, layer.pe.declared_bound);
        double layer_max = 0.0;
        for (std::uint64_t i : positions)
            for (std::uint64_t j : positions) {
                if (j < i) continue;
                layer_max = std::max(layer_max, linf_norm(layer.pe.at(i, j)));
            }
        rep.max_pe_norm = std::max(rep.max_pe_norm, layer_max);
        if (layer_max > layer.pe.declared_bound + 1e-12) pe_ok = false;
    }
    rep.pass = pe_ok && rep.max_embedding_norm <= rep.embedding_bound + 1e-12;
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

Matrix random_matrix(int rows, int cols, double scale, RngStream& rng) {
    Matrix m(rows, cols);
    for (double& x : m.data) x = rng.uniform(-scale, scale);
    return m;
}

}  // namespace

TransformerModel make_random_model(const RandomModelOptions& opts, RngStream& rng) {
    if (opts.pe == PeKind::TableBounded)
        throw std::invalid_argument("make_random_model: table PE is for constructed models");
    TransformerModel model;
    std::vector<std::string> labels;
    for (std::size_t t = 0; t < opts.alphabet_size; ++t) labels.push_back(std::to_string(t));
    model.alphabet = Alphabet(labels);
    model.dim = opts.dim;

    double scale = opts.init_scale / std::sqrt(static_cast<double>(opts.dim));
    model.embedding.kind = EmbKind::TokenTable;
    model.embedding.dim = opts.dim;
    model.embedding.table = random_matrix(static_cast<int>(opts.alphabet_size), opts.dim, scale, rng);
    model.embedding.declared_bound = linf_norm(model.embedding.table.data);

    for (int l = 0; l < opts.num_layers; ++l) {
        AttentionLayer layer;
        switch (opts.pe) {
            case PeKind::Sinusoidal: layer.pe = PositionalEncoding::sinusoidal(opts.dim); break;
            case PeKind::RotaryRelative:
                layer.pe = PositionalEncoding::rotary_relative(opts.dim, opts.clip);
                break;
            default: layer.pe = PositionalEncoding::constant_zero(opts.dim); break;
        }
        layer.weight.kind = opts.weight;
        layer.weight.ssmax_scale = opts.ssmax_scale;
        if (needs_qk(opts.weight)) {
            layer.weight.wq = random_matrix(opts.dim, opts.dim, scale, rng);
            layer.weight.wk = random_matrix(opts.dim, opts.dim, scale, rng);
        }
        layer.value.m = random_matrix(opts.dim, opts.dim, scale, rng);
        layer.value.bias = Vec(static_cast<std::size_t>(opts.dim), 0.0);
        layer.act.kind = opts.act;
        if (opts.act == ActKind::ResidualMlp) {
            int hidden = 2 * opts.dim;
            layer.act.w1 = random_matrix(hidden, opts.dim, scale, rng);
            layer.act.w2 = random_matrix(opts.dim, hidden,
                                         opts.init_scale / std::sqrt(static_cast<double>(hidden)), rng);
            layer.act.b1 = Vec(static_cast<std::size_t>(hidden), 0.0);
            layer.act.b2 = Vec(static_cast<std::size_t>(opts.dim), 0.0);
        }
        model.layers.push_back(std::move(layer));
    }

    model.readout.kind = ReadoutKind::AffineSoftmax;
    model.readout.w = random_matrix(static_cast<int>(opts.alphabet_size), opts.dim, scale, rng);
    model.readout.b = Vec(opts.alphabet_size, 0.0);
    return model;
}

}  // namespace cpelab
