#include "cpelab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpelab/manifest.hpp"
#include "cpelab/parallel.hpp"
#include "cpelab/serialize.hpp"

namespace cpelab {

namespace {

// distinct stream roots so experiments never share draws
enum StreamRoot : std::uint64_t {
    kNts = 1,
    kNtsPositional = 2,
    kModulus = 3,
    kCollapse = 4,
    kSsmax = 5,
};

std::string join_tokens(const std::vector<Token>& ts, const Alphabet& alphabet) {
    std::string out;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (i) out += '|';
        out += alphabet.label(ts[i]);
    }
    return out;
}

}  // namespace

std::size_t nts_perturb_count(double gamma, std::size_t length) {
    if (length < 2) throw std::invalid_argument("nts_perturb_count: length must be >= 2");
    auto floor_count =
        static_cast<std::size_t>(std::floor(gamma * static_cast<double>(length - 1)));
    return std::max<std::size_t>(1, floor_count);
}

NtsResult nts_zero(NextTokenModel& model, const std::vector<double>& gammas,
                   std::size_t samples, std::size_t length, std::uint64_t seed) {
    if (length < 2) throw std::invalid_argument("nts_zero: length must be >= 2");
    for (double g : gammas)
        if (!(g > 0.0) || g > 0.5)
            throw std::invalid_argument("nts_zero: gamma must lie in (0, 1/2]");

    NtsResult result;
    result.length = length;
    result.seed = seed;

    const TokenSeq base(length, 0);
    const Token base_next = model.next(base).greedy;
    RngStream root = RngStream(seed, kNts);

    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
        NtsRow row;
        row.gamma = gammas[gi];
        row.samples = samples;
        row.base_next = base_next;
        row.perturb_count = nts_perturb_count(gammas[gi], length);
        row.sample_next.assign(samples, 0);
        row.sample_positions.assign(samples, {});
        RngStream gamma_stream = root.fork(gi);
        ParallelGuard guard;

#pragma omp parallel for schedule(dynamic)
        for (long long si = 0; si < static_cast<long long>(samples); ++si) {
            guard.run([&, si] {
                RngStream rs = gamma_stream.fork(static_cast<std::uint64_t>(si));
                auto [perturbed, plan] =
                    perturb(base, row.perturb_count, ReplacementRule::FlipBinary, 2, rs);
                row.sample_next[static_cast<std::size_t>(si)] = model.next(perturbed).greedy;
                row.sample_positions[static_cast<std::size_t>(si)] = plan.positions;
            });
        }
        guard.rethrow();

        for (Token t : row.sample_next)
            if (t != base_next) ++row.nts;
        result.rows.push_back(std::move(row));
    }
    return result;
}

NtsPositionalResult nts_positional(NextTokenModel& model,
                                   const std::vector<std::pair<double, double>>& shapes,
                                   double gamma, std::size_t samples, std::size_t length,
                                   std::uint64_t seed) {
    if (length < 2) throw std::invalid_argument("nts_positional: length must be >= 2");
    if (!(gamma > 0.0) || gamma > 0.5)
        throw std::invalid_argument("nts_positional: gamma must lie in (0, 1/2]");
    for (auto [u, v] : shapes)
        if (!(u > 0.0) || !(v > 0.0))
            throw std::invalid_argument("nts_positional: shape parameters must be positive");

    NtsPositionalResult result;
    result.length = length;
    result.seed = seed;

    const TokenSeq base(length, 0);
    const Token base_next = model.next(base).greedy;
    const std::size_t count = nts_perturb_count(gamma, length);
    RngStream root = RngStream(seed, kNtsPositional);

    for (std::size_t shape_i = 0; shape_i < shapes.size(); ++shape_i) {
        auto [u, v] = shapes[shape_i];
        NtsPositionalRow row;
        row.u = u;
        row.v = v;
        row.nts.gamma = gamma;
        row.nts.samples = samples;
        row.nts.base_next = base_next;
        row.nts.perturb_count = count;
        row.nts.sample_next.assign(samples, 0);
        row.nts.sample_positions.assign(samples, {});
        RngStream shape_stream = root.fork(shape_i);
        ParallelGuard guard;

#pragma omp parallel for schedule(dynamic)
        for (long long si = 0; si < static_cast<long long>(samples); ++si) {
            guard.run([&, si, u, v] {
                RngStream rs = shape_stream.fork(static_cast<std::uint64_t>(si));
                auto positions = sample_positions_betabinomial(count, length - 1, u, v, rs);
                TokenSeq perturbed =
                    apply_perturbation(base, positions, ReplacementRule::FlipBinary, 2, rs);
                row.nts.sample_next[static_cast<std::size_t>(si)] = model.next(perturbed).greedy;
                row.nts.sample_positions[static_cast<std::size_t>(si)] = std::move(positions);
            });
        }
        guard.rethrow();

        for (Token t : row.nts.sample_next)
            if (t != base_next) ++row.nts.nts;
        result.rows.push_back(std::move(row));
    }
    return result;
}

namespace {

PeriodicCell eval_one_period(NextTokenModel& model, int p, int r, std::size_t steps) {
    PeriodicCell cell;
    cell.p = p;
    cell.r = r;
    cell.steps = steps;
    cell.success = true;
    cell.certainty = std::numeric_limits<double>::quiet_NaN();

    const TokenSeq prompt = beta_block(p, r);
    const auto prompt_len = static_cast<std::uint64_t>(prompt.size());
    auto session = model.session(prompt);

    // The first 1 of the continuation is due at generated step p-1; certainty
    // is the margin there, after greedily generating the p-2 steps before it.
    const auto certainty_step = static_cast<std::size_t>(p - 1);
    const std::size_t limit = std::max(steps, certainty_step);

    for (std::size_t t = 1; t <= limit; ++t) {
        NextTokenOutcome out = session->current();
        if (t == certainty_step) cell.certainty = out.margin;
        if (t <= steps && out.greedy != periodic_symbol(p, prompt_len + t) && cell.success) {
            cell.success = false;
            cell.first_mismatch = static_cast<long>(t);
        }
        if (t <= steps) cell.generated.push_back(out.greedy);
        bool need_more = (cell.success && t < steps) || t < certainty_step;
        if (!need_more) break;
        if (!model.pushable(out.greedy)) break;  // e.g. an out-of-alphabet remote token
        session->push(out.greedy);
    }
    return cell;
}

}  // namespace

PeriodicResult periodic_eval(NextTokenModel& model, const std::vector<int>& p_values,
                             const std::vector<int>& r_values, std::size_t steps,
                             std::uint64_t seed) {
    PeriodicResult result;
    result.seed = seed;
    for (int r : r_values) {
        if (r < 1) throw std::invalid_argument("periodic_eval: r must be >= 1");
        for (int p : p_values) {
            if (p < 2) throw std::invalid_argument("periodic_eval: p must be >= 2");
            result.cells.push_back(eval_one_period(model, p, r, steps));
        }
    }
    return result;
}

CriticalPeriodResult critical_period(NextTokenModel& model, int r, int p_max, std::size_t steps,
                                     std::uint64_t seed) {
    if (p_max < 2) throw std::invalid_argument("critical_period: p_max must be >= 2");
    CriticalPeriodResult result;
    result.seed = seed;
    for (int p = 2; p <= p_max; ++p) {
        result.cells.push_back(eval_one_period(model, p, r, steps));
        if (!result.cells.back().success && !result.p_star) result.p_star = p;
    }
    return result;
}

namespace {

// round(gamma * n) keeps the realized relative distance equal across the n
// grid (a floor over n-1 would skew small-n cells); at least one flip for any
// positive gamma.
std::size_t modulus_count(double gamma, std::size_t n) {
    if (gamma == 0.0) return 0;
    auto c = static_cast<std::size_t>(std::llround(gamma * static_cast<double>(n)));
    c = std::max<std::size_t>(1, c);
    return std::min(c, n - 1);
}

}  // namespace

ModulusTable continuity_modulus(NextTokenModel& model, const std::vector<double>& gammas,
                                const std::vector<std::size_t>& ns, std::size_t samples,
                                std::uint64_t seed, const SeqSpec& base_spec) {
    for (double g : gammas)
        if (g < 0.0 || g > 0.5)
            throw std::invalid_argument("continuity_modulus: gamma must lie in [0, 1/2]");
    std::vector<double> sorted_gammas = gammas;
    std::sort(sorted_gammas.begin(), sorted_gammas.end());

    ModulusTable table;
    table.samples = samples;
    table.seed = seed;
    RngStream root = RngStream(seed, kModulus);

    for (std::size_t ni = 0; ni < ns.size(); ++ni) {
        const std::size_t n = ns[ni];
        if (n < 2) throw std::invalid_argument("continuity_modulus: n must be >= 2");
        const TokenSeq base = prefix(base_spec, n);
        const Vec base_probs = model.next(base).dist.probs();
        RngStream n_stream = root.fork(ni);

        std::vector<double> dmax(sorted_gammas.size(), 0.0);
        ParallelGuard guard;
#pragma omp parallel for schedule(dynamic)
        for (long long si = 0; si < static_cast<long long>(samples); ++si) {
            guard.run([&, si] {
                RngStream rs = n_stream.fork(static_cast<std::uint64_t>(si));
                // one permutation per sample; gamma grids take nested prefixes
                auto perm = rs.permutation(n - 1);
                std::vector<double> local(sorted_gammas.size(), 0.0);
                for (std::size_t gi = 0; gi < sorted_gammas.size(); ++gi) {
                    std::size_t count = modulus_count(sorted_gammas[gi], n);
                    if (count == 0) continue;
                    std::vector<std::size_t> positions(perm.begin(),
                                                       perm.begin() + static_cast<long>(count));
                    for (std::size_t& p : positions) ++p;  // 1-based
                    std::sort(positions.begin(), positions.end());
                    TokenSeq perturbed =
                        apply_perturbation(base, positions, ReplacementRule::FlipBinary, 2, rs);
                    Vec probs = model.next(perturbed).dist.probs();
                    local[gi] = linf_distance(base_probs, probs);
                }
#pragma omp critical
                for (std::size_t gi = 0; gi < local.size(); ++gi)
                    dmax[gi] = std::max(dmax[gi], local[gi]);
            });
        }
        guard.rethrow();

        for (std::size_t gi = 0; gi < sorted_gammas.size(); ++gi) {
            ModulusCell cell;
            cell.gamma = sorted_gammas[gi];
            cell.n = n;
            cell.perturb_count = modulus_count(sorted_gammas[gi], n);
            cell.realized_distance =
                static_cast<double>(cell.perturb_count) / static_cast<double>(n);
            cell.d_max = dmax[gi];
            table.cells.push_back(cell);
        }
    }
    return table;
}

double sim_measure(const std::vector<Vec>& xs, const std::vector<Vec>& ys) {
    if (xs.empty() || xs.size() != ys.size())
        throw std::invalid_argument("sim_measure: need equal nonzero lengths");
    const std::size_t n = xs.size();
    Vec d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = linf_distance(xs[i], ys[i]);
    std::sort(d.begin(), d.end());
    // delta_k = max(d_(k), (n-k)/n) with d_(0) = 0; minimize over k
    double best = 1.0;  // k = 0
    for (std::size_t k = 1; k <= n; ++k) {
        double excluded = static_cast<double>(n - k) / static_cast<double>(n);
        best = std::min(best, std::max(d[k - 1], excluded));
    }
    return best;
}

CollapseResult collapse_probe(NextTokenModel& model, const SeqSpec& spec,
                              const std::vector<double>& gammas, std::size_t samples,
                              std::size_t n, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("collapse_probe: n must be >= 2");
    CollapseResult result;
    result.n = n;
    result.seed = seed;

    const TokenSeq base = prefix(spec, n);
    const Token truth = symbol_at(spec, n + 1);
    // surrogate for the verify precondition at this prompt length
    result.precondition_warning = model.next(base).greedy != truth;

    std::vector<double> sorted_gammas = gammas;
    std::sort(sorted_gammas.begin(), sorted_gammas.end());
    RngStream root = RngStream(seed, kCollapse);

    std::vector<std::size_t> agree(sorted_gammas.size(), 0);
    ParallelGuard guard;
#pragma omp parallel for schedule(dynamic)
    for (long long si = 0; si < static_cast<long long>(samples); ++si) {
        guard.run([&, si] {
            RngStream rs = root.fork(static_cast<std::uint64_t>(si));
            auto perm = rs.permutation(n - 1);
            std::vector<std::size_t> local(sorted_gammas.size(), 0);
            for (std::size_t gi = 0; gi < sorted_gammas.size(); ++gi) {
                std::size_t count =
                    sorted_gammas[gi] == 0.0 ? 0 : nts_perturb_count(sorted_gammas[gi], n);
                count = std::min(count, n - 1);
                std::vector<std::size_t> positions(perm.begin(),
                                                   perm.begin() + static_cast<long>(count));
                for (std::size_t& p : positions) ++p;
                std::sort(positions.begin(), positions.end());
                TokenSeq perturbed =
                    apply_perturbation(base, positions, ReplacementRule::FlipBinary, 2, rs);
                if (model.next(perturbed).greedy == truth) local[gi] = 1;
            }
#pragma omp critical
            for (std::size_t gi = 0; gi < local.size(); ++gi) agree[gi] += local[gi];
        });
    }
    guard.rethrow();

    for (std::size_t gi = 0; gi < sorted_gammas.size(); ++gi) {
        CollapseRow row;
        row.gamma = sorted_gammas[gi];
        row.perturb_count =
            sorted_gammas[gi] == 0.0 ? 0 : std::min(nts_perturb_count(sorted_gammas[gi], n), n - 1);
        row.samples = samples;
        row.agreement = static_cast<double>(agree[gi]) / static_cast<double>(samples);
        result.rows.push_back(row);
    }
    return result;
}

IsolationReport isolation_demo(const TransformerModel& model, const std::vector<int>& ks,
                               std::uint64_t horizon, double epsilon, std::uint64_t n0) {
    IsolationReport report;
    report.epsilon = epsilon;
    report.n0 = n0;
    report.horizon = horizon;

    auto all_zero = verify_eventual_learning(model, SeqSpec::constant_of(0), epsilon, n0, horizon);
    report.precondition_ok = all_zero.learned;

    for (int k : ks) {
        if (k < 2) throw std::invalid_argument("isolation_demo: k must be >= 2");
        TokenSeq pattern(static_cast<std::size_t>(k), 0);
        pattern.back() = 1;
        auto wit =
            verify_eventual_learning(model, SeqSpec::periodic(pattern), epsilon, n0, horizon);
        IsolationRow row;
        row.k = k;
        row.refuted = !wit.learned;
        row.first_failing_n = wit.first_failing_n;
        report.rows.push_back(row);
    }
    return report;
}

std::pair<TransformerModel, TransformerModel> make_ssmax_pair(const SsmaxPairOptions& opts) {
    RandomModelOptions ro;
    ro.dim = opts.dim;
    ro.num_layers = opts.num_layers;
    ro.pe = PeKind::Sinusoidal;
    ro.weight = WeightKind::DotProductExp;
    ro.act = ActKind::ResidualMlp;
    ro.init_scale = opts.init_scale;
    RngStream rng(opts.init_seed, 0);
    TransformerModel softmax_model = make_random_model(ro, rng);
    TransformerModel ssmax_model = softmax_model;
    for (AttentionLayer& layer : ssmax_model.layers) {
        layer.weight.kind = WeightKind::SsmaxScaled;
        layer.weight.ssmax_scale = opts.ssmax_scale;
    }
    return {std::move(softmax_model), std::move(ssmax_model)};
}

void validate_ssmax_pair(const TransformerModel& softmax_model,
                         const TransformerModel& ssmax_model) {
    if (softmax_model.layers.size() != ssmax_model.layers.size())
        throw std::invalid_argument("ssmax_compare: layer counts differ");
    Json a = model_to_json(softmax_model);
    Json b = model_to_json(ssmax_model);
    for (std::size_t l = 0; l < softmax_model.layers.size(); ++l) {
        if (softmax_model.layers[l].weight.kind != WeightKind::DotProductExp ||
            ssmax_model.layers[l].weight.kind != WeightKind::SsmaxScaled)
            throw std::invalid_argument(
                "ssmax_compare: weight kinds must pair dot-product-exp with ssmax-scaled");
        auto& wa = a["layers"][l]["weight"];
        auto& wb = b["layers"][l]["weight"];
        if (wa["wq"] != wb["wq"] || wa["wk"] != wb["wk"])
            throw std::invalid_argument("ssmax_compare: weight matrices differ");
        wa.erase("kind");
        wb.erase("kind");
        wb.erase("ssmax_scale");
        if (wa != wb) throw std::invalid_argument("ssmax_compare: weights differ beyond kind");
        a["layers"][l].erase("weight");
        b["layers"][l].erase("weight");
    }
    if (a != b)
        throw std::invalid_argument("ssmax_compare: models differ beyond the weight kind");
}

SsmaxCompareResult ssmax_compare(const TransformerModel& softmax_model,
                                 const TransformerModel& ssmax_model,
                                 const std::vector<double>& gammas, std::size_t samples,
                                 std::size_t length, std::uint64_t seed) {
    validate_ssmax_pair(softmax_model, ssmax_model);
    LocalModel soft(softmax_model);
    LocalModel ss(ssmax_model);
    // identical seed, so both sides see identical perturbations
    NtsResult a = nts_zero(soft, gammas, samples, length, seed);
    NtsResult b = nts_zero(ss, gammas, samples, length, seed);

    SsmaxCompareResult result;
    result.seed = seed;
    double total = 0.0;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        SsmaxCompareRow row;
        row.gamma = a.rows[i].gamma;
        row.perturb_count = a.rows[i].perturb_count;
        row.samples = samples;
        row.nts_softmax = a.rows[i].nts;
        row.nts_ssmax = b.rows[i].nts;
        total += static_cast<double>(row.nts_ssmax) - static_cast<double>(row.nts_softmax);
        result.rows.push_back(row);
    }
    result.mean_diff = gammas.empty() ? 0.0 : total / static_cast<double>(gammas.size());
    return result;
}

// --- CSV ---------------------------------------------------------------------

std::string nts_csv(const NtsResult& r, const Alphabet& alphabet) {
    std::ostringstream out;
    out << "gamma,perturb_count,samples,nts,base_next,next_tokens\n";
    for (const NtsRow& row : r.rows)
        out << fmt_double(row.gamma) << ',' << row.perturb_count << ',' << row.samples << ','
            << row.nts << ',' << alphabet.label(row.base_next) << ','
            << join_tokens(row.sample_next, alphabet) << '\n';
    return out.str();
}

std::string nts_positional_csv(const NtsPositionalResult& r, const Alphabet& alphabet) {
    std::ostringstream out;
    out << "u,v,gamma,perturb_count,samples,nts,base_next,next_tokens\n";
    for (const NtsPositionalRow& row : r.rows)
        out << fmt_double(row.u) << ',' << fmt_double(row.v) << ',' << fmt_double(row.nts.gamma)
            << ',' << row.nts.perturb_count << ',' << row.nts.samples << ',' << row.nts.nts << ','
            << alphabet.label(row.nts.base_next) << ','
            << join_tokens(row.nts.sample_next, alphabet) << '\n';
    return out.str();
}

namespace {

void periodic_cell_csv(std::ostringstream& out, const PeriodicCell& c, const Alphabet& alphabet) {
    out << c.p << ',' << c.r << ',' << c.steps << ',' << (c.success ? 1 : 0) << ','
        << fmt_double(c.certainty) << ',' << c.first_mismatch << ','
        << alphabet.render(c.generated) << '\n';
}

}  // namespace

std::string periodic_csv(const PeriodicResult& r, const Alphabet& alphabet) {
    std::ostringstream out;
    out << "p,r,steps,success,certainty,first_mismatch,generated\n";
    for (const PeriodicCell& c : r.cells) periodic_cell_csv(out, c, alphabet);
    return out.str();
}

std::string critical_period_csv(const CriticalPeriodResult& r, const Alphabet& alphabet) {
    std::ostringstream out;
    out << "p,r,steps,success,certainty,first_mismatch,generated\n";
    for (const PeriodicCell& c : r.cells) periodic_cell_csv(out, c, alphabet);
    return out.str();
}

std::string modulus_csv(const ModulusTable& r) {
    std::ostringstream out;
    out << "gamma,n,perturb_count,realized_distance,samples,D\n";
    for (const ModulusCell& c : r.cells)
        out << fmt_double(c.gamma) << ',' << c.n << ',' << c.perturb_count << ','
            << fmt_double(c.realized_distance) << ',' << r.samples << ',' << fmt_double(c.d_max)
            << '\n';
    return out.str();
}

std::string collapse_csv(const CollapseResult& r) {
    std::ostringstream out;
    out << "gamma,n,perturb_count,samples,agreement\n";
    for (const CollapseRow& row : r.rows)
        out << fmt_double(row.gamma) << ',' << r.n << ',' << row.perturb_count << ','
            << row.samples << ',' << fmt_double(row.agreement) << '\n';
    return out.str();
}

std::string isolation_csv(const IsolationReport& r) {
    std::ostringstream out;
    out << "k,refuted,first_failing_n,epsilon,n0,horizon\n";
    for (const IsolationRow& row : r.rows)
        out << row.k << ',' << (row.refuted ? 1 : 0) << ',' << row.first_failing_n << ','
            << fmt_double(r.epsilon) << ',' << r.n0 << ',' << r.horizon << '\n';
    return out.str();
}

std::string ssmax_compare_csv(const SsmaxCompareResult& r) {
    std::ostringstream out;
    out << "gamma,perturb_count,samples,nts_softmax,nts_ssmax,diff\n";
    for (const SsmaxCompareRow& row : r.rows)
        out << fmt_double(row.gamma) << ',' << row.perturb_count << ',' << row.samples << ','
            << row.nts_softmax << ',' << row.nts_ssmax << ','
            << (static_cast<long long>(row.nts_ssmax) - static_cast<long long>(row.nts_softmax))
            << '\n';
    return out.str();
}

}  // namespace cpelab
