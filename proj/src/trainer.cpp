#include "cpelab/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "cpelab/parallel.hpp"

namespace cpelab {

namespace {

enum TrainerStream : std::uint64_t { kInit = 101, kData = 102 };

WeightKind weight_kind_for(PeKind pe) {
    return pe == PeKind::RotaryRelative ? WeightKind::DotProductExpRotary
                                        : WeightKind::DotProductExp;
}

}  // namespace

Batch make_batch(const TrainableConfig& config, std::uint64_t step, RngStream root) {
    if (config.mixture.empty()) throw std::invalid_argument("make_batch: empty mixture");
    if (config.context < 2) throw std::invalid_argument("make_batch: context must be >= 2");
    double total = 0.0;
    for (const auto& [spec, w] : config.mixture) {
        if (w < 0.0) throw std::invalid_argument("make_batch: negative mixture weight");
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("make_batch: mixture weights sum to 0");

    Batch batch;
    RngStream step_stream = root.fork(step);
    for (int e = 0; e < config.batch; ++e) {
        RngStream rs = step_stream.fork(static_cast<std::uint64_t>(e));
        double pick = rs.next_double() * total;
        std::size_t chosen = 0;
        double acc = 0.0;
        for (std::size_t i = 0; i < config.mixture.size(); ++i) {
            acc += config.mixture[i].second;
            if (pick < acc) {
                chosen = i;
                break;
            }
            chosen = i;
        }
        std::uint64_t offset = rs.uniform_int(config.window_horizon);
        TokenSeq ex;
        ex.reserve(static_cast<std::size_t>(config.context));
        for (int j = 1; j <= config.context; ++j)
            ex.push_back(symbol_at(config.mixture[chosen].first, offset + static_cast<std::uint64_t>(j)));
        batch.examples.push_back(std::move(ex));
    }
    return batch;
}

TransformerModel init_trainable_model(const TrainableConfig& config) {
    RandomModelOptions opts;
    opts.dim = config.dim;
    opts.num_layers = config.num_layers;
    opts.alphabet_size = 2;
    opts.pe = config.pe;
    opts.weight = weight_kind_for(config.pe);
    opts.act = ActKind::ResidualMlp;
    opts.init_scale = config.init_scale;
    opts.clip = config.rotary_clip;
    RngStream rng = RngStream(config.seed, kInit);
    return make_random_model(opts, rng);
}

std::vector<ParamRef> trainable_params(TransformerModel& model) {
    std::vector<ParamRef> refs;
    auto add = [&refs](const std::string& name, Vec& v) {
        if (!v.empty()) refs.push_back({name, v.data(), v.size()});
    };
    if (model.embedding.kind != EmbKind::TokenTable)
        throw std::invalid_argument("trainable_params: embedding is not a token table");
    add("embedding", model.embedding.table.data);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        AttentionLayer& layer = model.layers[l];
        std::string p = "layer" + std::to_string(l) + ".";
        add(p + "wq", layer.weight.wq.data);
        add(p + "wk", layer.weight.wk.data);
        add(p + "value.m", layer.value.m.data);
        add(p + "value.bias", layer.value.bias);
        if (layer.act.kind == ActKind::ResidualMlp) {
            add(p + "mlp.w1", layer.act.w1.data);
            add(p + "mlp.b1", layer.act.b1);
            add(p + "mlp.w2", layer.act.w2.data);
            add(p + "mlp.b2", layer.act.b2);
        }
    }
    if (model.readout.kind != ReadoutKind::AffineSoftmax)
        throw std::invalid_argument("trainable_params: readout is not affine-softmax");
    add("readout.w", model.readout.w.data);
    add("readout.b", model.readout.b);
    return refs;
}

namespace {

// --- forward cache for one example ------------------------------------------

struct LayerCache {
    std::vector<Vec> x;      // layer input
    std::vector<Vec> q, k, v;
    std::vector<Vec> probs;  // probs[j][i] = normalized attention weight, i <= j
    std::vector<std::vector<bool>> clamped;
    std::vector<Vec> a;      // attention vectors
    std::vector<Vec> h;      // a + x
    std::vector<Vec> hn;     // layer-normalized h (when enabled)
    std::vector<Vec> z;      // tanh activations
    double ln_eps = 1e-5;
};

struct ExampleCache {
    std::vector<LayerCache> layers;
    std::vector<Vec> final_states;
};

const Vec& pe_vec(const PositionalEncoding& pe, std::vector<Vec>& cache, std::size_t i,
                  std::size_t j) {
    // cache by clipped offset (rotary) or zero (constant); sinusoidal by i
    switch (pe.kind) {
        case PeKind::ConstantZero:
            if (cache.empty()) cache.push_back(Vec(static_cast<std::size_t>(pe.dim), 0.0));
            return cache[0];
        case PeKind::Sinusoidal: {
            while (cache.size() < i) cache.push_back(pe.at(cache.size() + 1, cache.size() + 1));
            return cache[i - 1];
        }
        default: {
            std::size_t delta = std::min(j - i, static_cast<std::size_t>(pe.clip) + 1);
            while (cache.size() <= delta) cache.push_back(pe.at(1, 1 + cache.size()));
            return cache[delta];
        }
    }
}

double score_and_cache(const WeightFunction& w, const Vec& q, const Vec& k, const Vec& p,
                       std::size_t j) {
    return w.score_from_qk(q, k, p, j);
}

ExampleCache forward_example(const TransformerModel& model, const TokenSeq& tokens,
                             long* clamp_hits) {
    const std::size_t n = tokens.size();
    ExampleCache cache;
    cache.layers.resize(model.layers.size());

    std::vector<Vec> xs = embed_all(model, tokens);
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const AttentionLayer& layer = model.layers[li];
        LayerCache& lc = cache.layers[li];
        lc.x = xs;
        lc.q.resize(n);
        lc.k.resize(n);
        lc.v.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            lc.q[i] = matvec(layer.weight.wq, xs[i]);
            lc.k[i] = matvec(layer.weight.wk, xs[i]);
            lc.v[i] = layer.value.apply(xs[i]);
        }
        lc.probs.resize(n);
        lc.clamped.resize(n);
        lc.a.resize(n);
        std::vector<Vec> pe_cache;
        const std::size_t d = xs[0].size();
        for (std::size_t j = 0; j < n; ++j) {
            Vec scores(j + 1);
            lc.clamped[j].assign(j + 1, false);
            for (std::size_t i = 0; i <= j; ++i) {
                double s = score_and_cache(layer.weight, lc.q[j], lc.k[i],
                                           pe_vec(layer.pe, pe_cache, i + 1, j + 1), j + 1);
                if (s > kScoreClamp || s < -kScoreClamp) {
                    lc.clamped[j][i] = true;
                    if (clamp_hits) ++(*clamp_hits);
                    s = std::clamp(s, -kScoreClamp, kScoreClamp);
                }
                scores[i] = s;
            }
            // softmax over i <= j
            double mx = *std::max_element(scores.begin(), scores.end());
            double sum = 0.0;
            Vec pr(j + 1);
            for (std::size_t i = 0; i <= j; ++i) {
                pr[i] = std::exp(scores[i] - mx);
                sum += pr[i];
            }
            for (double& x : pr) x /= sum;
            Vec a(d, 0.0);
            for (std::size_t i = 0; i <= j; ++i)
                for (std::size_t c = 0; c < d; ++c) a[c] += pr[i] * lc.v[i][c];
            lc.probs[j] = std::move(pr);
            lc.a[j] = std::move(a);
        }

        // activation
        std::vector<Vec> ys(n);
        lc.h.resize(n);
        lc.z.resize(n);
        if (layer.act.layer_norm) lc.hn.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            Vec h(d);
            for (std::size_t c = 0; c < d; ++c) h[c] = lc.a[j][c] + xs[j][c];
            lc.h[j] = h;
            const Vec* hin = &lc.h[j];
            if (layer.act.layer_norm) {
                double mean = 0.0;
                for (double x : h) mean += x;
                mean /= static_cast<double>(d);
                double var = 0.0;
                for (double x : h) var += (x - mean) * (x - mean);
                var /= static_cast<double>(d);
                double inv = 1.0 / std::sqrt(var + lc.ln_eps);
                Vec hn(d);
                for (std::size_t c = 0; c < d; ++c) hn[c] = (h[c] - mean) * inv;
                lc.hn[j] = std::move(hn);
                hin = &lc.hn[j];
            }
            Vec u = matvec(layer.act.w1, *hin);
            for (std::size_t c = 0; c < u.size(); ++c) u[c] = std::tanh(u[c] + layer.act.b1[c]);
            lc.z[j] = u;
            Vec w2z = matvec(layer.act.w2, u);
            Vec y(d);
            for (std::size_t c = 0; c < d; ++c) y[c] = h[c] + w2z[c] + layer.act.b2[c];
            ys[j] = std::move(y);
        }
        xs = std::move(ys);
    }
    cache.final_states = std::move(xs);
    return cache;
}

// grads aligned with trainable_params order; index bookkeeping below
struct GradSlots {
    std::size_t embedding = 0;
    struct Layer {
        std::size_t wq, wk, vm, vb, w1, b1, w2, b2;
        bool has_mlp = false;
    };
    std::vector<Layer> layers;
    std::size_t readout_w = 0, readout_b = 0;
};

GradSlots layout_slots(const TransformerModel& model) {
    GradSlots s;
    std::size_t idx = 0;
    s.embedding = idx++;
    for (const AttentionLayer& layer : model.layers) {
        GradSlots::Layer L{};
        L.wq = idx++;
        L.wk = idx++;
        L.vm = idx++;
        if (!layer.value.bias.empty()) L.vb = idx++;
        else L.vb = static_cast<std::size_t>(-1);
        if (layer.act.kind == ActKind::ResidualMlp) {
            L.has_mlp = true;
            L.w1 = idx++;
            L.b1 = idx++;
            L.w2 = idx++;
            L.b2 = idx++;
        }
        s.layers.push_back(L);
    }
    s.readout_w = idx++;
    s.readout_b = idx++;
    return s;
}

GradientRecord zero_grads(const TransformerModel& model) {
    GradientRecord g;
    auto& m = const_cast<TransformerModel&>(model);
    for (const ParamRef& p : trainable_params(m)) g.push_back(Vec(p.size, 0.0));
    return g;
}

void add_outer(Vec& grad_matrix, int rows, int cols, const Vec& dy, const Vec& x) {
    for (int r = 0; r < rows; ++r) {
        double g = dy[static_cast<std::size_t>(r)];
        if (g == 0.0) continue;
        for (int c = 0; c < cols; ++c)
            grad_matrix[static_cast<std::size_t>(r) * cols + c] += g * x[static_cast<std::size_t>(c)];
    }
}

Vec matvec_t(const Matrix& m, const Vec& y) {  // m^T y
    Vec out(static_cast<std::size_t>(m.cols), 0.0);
    for (int r = 0; r < m.rows; ++r) {
        double g = y[static_cast<std::size_t>(r)];
        if (g == 0.0) continue;
        for (int c = 0; c < m.cols; ++c)
            out[static_cast<std::size_t>(c)] += m(r, c) * g;
    }
    return out;
}

// loss contribution of one example plus parameter/input gradients
double backward_example(const TransformerModel& model, const TokenSeq& tokens,
                        const ExampleCache& cache, double inv_total_positions,
                        GradientRecord& grads, const GradSlots& slots) {
    const std::size_t n = tokens.size();
    const auto d = static_cast<std::size_t>(model.dim);
    const std::size_t a_size = model.alphabet.size();

    // readout + cross entropy over positions 0..n-2 (targets shifted by one)
    double loss = 0.0;
    std::vector<Vec> dY(n, Vec(d, 0.0));
    for (std::size_t j = 0; j + 1 < n; ++j) {
        Vec logits = model.readout.logits(cache.final_states[j]);
        double mx = *std::max_element(logits.begin(), logits.end());
        double lse = 0.0;
        for (double l : logits) lse += std::exp(l - mx);
        lse = mx + std::log(lse);
        auto target = static_cast<std::size_t>(tokens[j + 1]);
        loss += (lse - logits[target]) * inv_total_positions;

        Vec dlogits(a_size);
        for (std::size_t t = 0; t < a_size; ++t) {
            double p = std::exp(logits[t] - lse);
            dlogits[t] = (p - (t == target ? 1.0 : 0.0)) * inv_total_positions;
        }
        add_outer(grads[slots.readout_w], static_cast<int>(a_size), static_cast<int>(d), dlogits,
                  cache.final_states[j]);
        for (std::size_t t = 0; t < a_size; ++t) grads[slots.readout_b][t] += dlogits[t];
        Vec dy = matvec_t(model.readout.w, dlogits);
        for (std::size_t c = 0; c < d; ++c) dY[j][c] += dy[c];
    }

    // layers in reverse
    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const AttentionLayer& layer = model.layers[li];
        const LayerCache& lc = cache.layers[li];
        const GradSlots::Layer& slot = slots.layers[li];
        std::vector<Vec> dX(n, Vec(d, 0.0));
        std::vector<Vec> dA(n, Vec(d, 0.0));
        std::vector<Vec> pe_cache;

        // activation backward
        for (std::size_t j = 0; j < n; ++j) {
            const Vec& dy = dY[j];
            Vec dh(d, 0.0);
            if (layer.act.kind == ActKind::ResidualMlp) {
                const std::size_t hidden = lc.z[j].size();
                // y = h + W2 z + b2
                Vec dz = matvec_t(layer.act.w2, dy);
                add_outer(grads[slot.w2], static_cast<int>(d), static_cast<int>(hidden), dy,
                          lc.z[j]);
                for (std::size_t c = 0; c < d; ++c) grads[slot.b2][c] += dy[c];
                Vec du(hidden);
                for (std::size_t c = 0; c < hidden; ++c)
                    du[c] = dz[c] * (1.0 - lc.z[j][c] * lc.z[j][c]);
                const Vec& hin = layer.act.layer_norm ? lc.hn[j] : lc.h[j];
                add_outer(grads[slot.w1], static_cast<int>(hidden), static_cast<int>(d), du, hin);
                for (std::size_t c = 0; c < hidden; ++c) grads[slot.b1][c] += du[c];
                Vec dhin = matvec_t(layer.act.w1, du);
                if (layer.act.layer_norm) {
                    // standard layer-norm backward
                    const Vec& h = lc.h[j];
                    double mean = 0.0;
                    for (double x : h) mean += x;
                    mean /= static_cast<double>(d);
                    double var = 0.0;
                    for (double x : h) var += (x - mean) * (x - mean);
                    var /= static_cast<double>(d);
                    double inv = 1.0 / std::sqrt(var + lc.ln_eps);
                    const Vec& hn = lc.hn[j];
                    double mean_dhin = 0.0, mean_dhin_hn = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                        mean_dhin += dhin[c];
                        mean_dhin_hn += dhin[c] * hn[c];
                    }
                    mean_dhin /= static_cast<double>(d);
                    mean_dhin_hn /= static_cast<double>(d);
                    for (std::size_t c = 0; c < d; ++c)
                        dh[c] += inv * (dhin[c] - mean_dhin - hn[c] * mean_dhin_hn);
                } else {
                    for (std::size_t c = 0; c < d; ++c) dh[c] += dhin[c];
                }
                for (std::size_t c = 0; c < d; ++c) dh[c] += dy[c];  // residual path
            } else if (layer.act.kind == ActKind::Residual) {
                dh = dy;
            } else if (layer.act.kind == ActKind::PassThrough) {
                for (std::size_t c = 0; c < d; ++c) dA[j][c] += dy[c];
                continue;
            } else {
                throw std::invalid_argument("grad: non-differentiable activation kind");
            }
            // h = a + x
            for (std::size_t c = 0; c < d; ++c) {
                dA[j][c] += dh[c];
                dX[j][c] += dh[c];
            }
        }

        // attention backward
        std::vector<Vec> dV(n, Vec(d, 0.0));
        std::vector<Vec> dQ(n, Vec(d, 0.0));
        std::vector<Vec> dK(n, Vec(d, 0.0));
        for (std::size_t j = 0; j < n; ++j) {
            const Vec& pr = lc.probs[j];
            Vec dpi(j + 1);
            double dot_pi_dpi = 0.0;
            for (std::size_t i = 0; i <= j; ++i) {
                double acc = 0.0;
                for (std::size_t c = 0; c < d; ++c) acc += dA[j][c] * lc.v[i][c];
                dpi[i] = acc;
                dot_pi_dpi += pr[i] * acc;
                for (std::size_t c = 0; c < d; ++c) dV[i][c] += pr[i] * dA[j][c];
            }
            double scale = 1.0;
            if (layer.weight.kind == WeightKind::SsmaxScaled)
                scale = layer.weight.ssmax_scale * std::log(static_cast<double>(j + 1));
            double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
            for (std::size_t i = 0; i <= j; ++i) {
                if (lc.clamped[j][i]) continue;  // clamp subgradient is 0
                double ds = pr[i] * (dpi[i] - dot_pi_dpi);
                if (ds == 0.0) continue;
                double f = ds * scale * inv_sqrt_d;
                const Vec& p = pe_vec(layer.pe, pe_cache, i + 1, j + 1);
                const Vec& q = lc.q[j];
                const Vec& k = lc.k[i];
                if (layer.weight.kind == WeightKind::DotProductExpRotary) {
                    std::size_t t = 0;
                    for (; 2 * t + 1 < d; ++t) {
                        double sn = p[2 * t], cs = p[2 * t + 1];
                        double q0 = q[2 * t], q1 = q[2 * t + 1];
                        double k0 = k[2 * t], k1 = k[2 * t + 1];
                        dQ[j][2 * t] += f * (cs * k0 + sn * k1);
                        dQ[j][2 * t + 1] += f * (cs * k1 - sn * k0);
                        dK[i][2 * t] += f * (cs * q0 - sn * q1);
                        dK[i][2 * t + 1] += f * (cs * q1 + sn * q0);
                    }
                    if (2 * t < d) {
                        dQ[j][2 * t] += f * k[2 * t];
                        dK[i][2 * t] += f * q[2 * t];
                    }
                } else {
                    // score = (q . (k + p)) / sqrt(d), optionally ssmax-scaled
                    for (std::size_t c = 0; c < d; ++c) {
                        dQ[j][c] += f * (k[c] + p[c]);
                        dK[i][c] += f * q[c];
                    }
                }
            }
        }

        // project q/k/v gradients onto parameters and inputs
        for (std::size_t i = 0; i < n; ++i) {
            add_outer(grads[slot.wq], static_cast<int>(d), static_cast<int>(d), dQ[i], lc.x[i]);
            add_outer(grads[slot.wk], static_cast<int>(d), static_cast<int>(d), dK[i], lc.x[i]);
            add_outer(grads[slot.vm], static_cast<int>(d), static_cast<int>(d), dV[i], lc.x[i]);
            if (slot.vb != static_cast<std::size_t>(-1))
                for (std::size_t c = 0; c < d; ++c) grads[slot.vb][c] += dV[i][c];
            Vec t1 = matvec_t(layer.weight.wq, dQ[i]);
            Vec t2 = matvec_t(layer.weight.wk, dK[i]);
            Vec t3 = matvec_t(layer.value.m, dV[i]);
            for (std::size_t c = 0; c < d; ++c) dX[i][c] += t1[c] + t2[c] + t3[c];
        }
        dY = std::move(dX);
    }

    // embedding rows
    for (std::size_t j = 0; j < n; ++j) {
        auto tok = static_cast<std::size_t>(tokens[j]);
        for (std::size_t c = 0; c < d; ++c)
            grads[slots.embedding][tok * d + c] += dY[j][c];
    }
    return loss;
}

}  // namespace

double loss_next_token(const TransformerModel& model, const Batch& batch) {
    if (batch.examples.empty()) throw std::invalid_argument("loss_next_token: empty batch");
    std::size_t total_positions = 0;
    for (const TokenSeq& ex : batch.examples) {
        if (ex.size() < 2) throw std::invalid_argument("loss_next_token: example too short");
        total_positions += ex.size() - 1;
    }
    double inv = 1.0 / static_cast<double>(total_positions);
    double loss = 0.0;
    for (const TokenSeq& ex : batch.examples) {
        if (model.readout.kind == ReadoutKind::AffineSoftmax) {
            std::vector<Vec> xs = embed_all(model, ex);
            for (const AttentionLayer& layer : model.layers) xs = layer_forward(layer, xs);
            for (std::size_t j = 0; j + 1 < ex.size(); ++j) {
                Vec logits = model.readout.logits(xs[j]);
                double mx = *std::max_element(logits.begin(), logits.end());
                double lse = 0.0;
                for (double l : logits) lse += std::exp(l - mx);
                lse = mx + std::log(lse);
                loss += (lse - logits[static_cast<std::size_t>(ex[j + 1])]) * inv;
            }
        } else {
            std::vector<Dist> dists = transformer_all_dists(model, ex);
            for (std::size_t j = 0; j + 1 < ex.size(); ++j)
                loss -= std::log(std::max(dists[j][static_cast<std::size_t>(ex[j + 1])], 1e-300)) * inv;
        }
    }
    return loss;
}

GradResult grad(const TransformerModel& model, const Batch& batch) {
    if (batch.examples.empty()) throw std::invalid_argument("grad: empty batch");
    for (const AttentionLayer& layer : model.layers) {
        if (layer.weight.kind == WeightKind::ConstantOne ||
            layer.weight.kind == WeightKind::OffsetExp)
            throw std::invalid_argument("grad: weight kind carries no trainable parameters");
        if (layer.act.kind == ActKind::FetchCompare || layer.act.kind == ActKind::FamilySelect)
            throw std::invalid_argument("grad: activation kind is not differentiable here");
    }
    std::size_t total_positions = 0;
    for (const TokenSeq& ex : batch.examples) {
        if (ex.size() < 2) throw std::invalid_argument("grad: example too short");
        total_positions += ex.size() - 1;
    }
    double inv = 1.0 / static_cast<double>(total_positions);
    GradSlots slots = layout_slots(model);

    const std::size_t b = batch.examples.size();
    std::vector<GradientRecord> per_example(b);
    std::vector<double> per_loss(b, 0.0);
    std::vector<long> per_clamp(b, 0);

    ParallelGuard guard;
#pragma omp parallel for schedule(dynamic)
    for (long long e = 0; e < static_cast<long long>(b); ++e) {
        guard.run([&, e] {
            auto idx = static_cast<std::size_t>(e);
            GradientRecord g = zero_grads(model);
            long hits = 0;
            ExampleCache cache = forward_example(model, batch.examples[idx], &hits);
            per_loss[idx] = backward_example(model, batch.examples[idx], cache, inv, g, slots);
            per_example[idx] = std::move(g);
            per_clamp[idx] = hits;
        });
    }
    guard.rethrow();

    GradResult result;
    result.grads = zero_grads(model);
    // fixed example order keeps the reduction bitwise deterministic
    for (std::size_t e = 0; e < b; ++e) {
        result.loss += per_loss[e];
        result.clamp_hits += per_clamp[e];
        for (std::size_t p = 0; p < result.grads.size(); ++p)
            for (std::size_t i = 0; i < result.grads[p].size(); ++i)
                result.grads[p][i] += per_example[e][p][i];
    }
    for (const Vec& g : result.grads)
        for (double x : g)
            if (!std::isfinite(x)) throw std::runtime_error("grad: non-finite gradient");
    return result;
}

TrainOutcome train(const TrainableConfig& config) {
    TrainOutcome out;
    out.model = init_trainable_model(config);
    if (config.steps == 0) return out;
    if (config.optimizer != "adam" && config.optimizer != "sgd")
        throw std::invalid_argument("train: unknown optimizer " + config.optimizer);

    std::vector<ParamRef> params = trainable_params(out.model);
    std::vector<Vec> m_state, v_state;
    if (config.optimizer == "adam") {
        for (const ParamRef& p : params) {
            m_state.push_back(Vec(p.size, 0.0));
            v_state.push_back(Vec(p.size, 0.0));
        }
    }

    RngStream data_root = RngStream(config.seed, kData);
    for (int step = 0; step < config.steps; ++step) {
        Batch batch = make_batch(config, static_cast<std::uint64_t>(step), data_root);
        GradResult g = grad(out.model, batch);
        if (!std::isfinite(g.loss))
            throw TrainDivergence("train: loss diverged at step " + std::to_string(step));
        out.losses.push_back(g.loss);
        out.clamp_hits += g.clamp_hits;

        if (config.optimizer == "adam") {
            double t = static_cast<double>(step) + 1.0;
            double bc1 = 1.0 - std::pow(config.adam_beta1, t);
            double bc2 = 1.0 - std::pow(config.adam_beta2, t);
            for (std::size_t p = 0; p < params.size(); ++p)
                for (std::size_t i = 0; i < params[p].size; ++i) {
                    double gi = g.grads[p][i];
                    m_state[p][i] = config.adam_beta1 * m_state[p][i] + (1.0 - config.adam_beta1) * gi;
                    v_state[p][i] = config.adam_beta2 * v_state[p][i] + (1.0 - config.adam_beta2) * gi * gi;
                    double mh = m_state[p][i] / bc1;
                    double vh = v_state[p][i] / bc2;
                    params[p].data[i] -= config.lr * mh / (std::sqrt(vh) + config.adam_eps);
                }
        } else {
            for (std::size_t p = 0; p < params.size(); ++p)
                for (std::size_t i = 0; i < params[p].size; ++i)
                    params[p].data[i] -= config.lr * g.grads[p][i];
        }
    }
    return out;
}

}  // namespace cpelab
