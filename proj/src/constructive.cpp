#include "cpelab/constructive.hpp"

#include <algorithm>
#include <cmath>

namespace cpelab {

BuiltLearner build_single_learner(const SingleLearnerSpec& spec) {
    if (!spec.target.eventually_periodic_kind())
        throw std::invalid_argument("build_single_learner: target must be eventually periodic");
    if (!(spec.eta > 0.0) || !(spec.eta < 0.5))
        throw std::invalid_argument("build_single_learner: eta must lie in (0, 1/2)");
    const auto a_size = static_cast<int>(spec.alphabet.size());
    if (a_size < 2) throw std::invalid_argument("build_single_learner: need at least 2 tokens");

    TransformerModel model;
    model.alphabet = spec.alphabet;
    model.dim = a_size;

    model.embedding.kind = EmbKind::NextSymbolOneHot;
    model.embedding.dim = a_size;
    model.embedding.token_dim = a_size;
    model.embedding.target = spec.target;
    model.embedding.declared_bound = 1.0;

    // zero values + residual activation pass the embedding through untouched
    AttentionLayer layer;
    layer.pe = PositionalEncoding::constant_zero(a_size);
    layer.weight.kind = WeightKind::ConstantOne;
    layer.value.m = Matrix(a_size, a_size);
    layer.act.kind = ActKind::Residual;
    model.layers.push_back(std::move(layer));

    double off = spec.eta / static_cast<double>(a_size - 1);
    model.readout.kind = ReadoutKind::Lookup;
    for (int tok = 0; tok < a_size; ++tok) {
        Vec center(static_cast<std::size_t>(a_size), 0.0);
        center[static_cast<std::size_t>(tok)] = 1.0;
        Vec dist(static_cast<std::size_t>(a_size), off);
        dist[static_cast<std::size_t>(tok)] = 1.0 - spec.eta;
        model.readout.centers.push_back(std::move(center));
        model.readout.dists.push_back(std::move(dist));
    }

    BuiltLearner built;
    built.model = std::move(model);
    built.epsilon = (1.0 - spec.eta) - off;
    built.n0 = 1;
    return built;
}

namespace {

constexpr double kFamilyReadoutScale = 10.0;

}  // namespace

BuiltLearner build_family_learner(const FamilyLearnerSpec& spec) {
    if (spec.periods.empty()) throw std::invalid_argument("build_family_learner: no periods");
    std::vector<int> periods = spec.periods;
    std::sort(periods.begin(), periods.end());
    for (std::size_t t = 0; t < periods.size(); ++t) {
        if (periods[t] < 2)
            throw std::invalid_argument("build_family_learner: periods must be >= 2");
        if (t > 0 && periods[t] == periods[t - 1])
            throw std::invalid_argument("build_family_learner: duplicate period");
    }
    const int max_period = periods.back();
    const int lag = spec.max_lag == 0 ? 4 * max_period : spec.max_lag;
    if (lag < max_period)
        throw std::invalid_argument("build_family_learner: max lag below max period");
    if (!(spec.sharpness > 0.0) || spec.sharpness > kScoreClamp)
        throw std::invalid_argument("build_family_learner: sharpness outside (0, 80]");

    // the family members must sit at positive pairwise distance
    for (std::size_t s = 0; s < periods.size(); ++s)
        for (std::size_t t = s + 1; t < periods.size(); ++t) {
            TokenSeq ps(static_cast<std::size_t>(periods[s]), 0), pt(static_cast<std::size_t>(periods[t]), 0);
            ps.back() = 1;
            pt.back() = 1;
            auto d = dh_asymptotic(SeqSpec::periodic(ps), SeqSpec::periodic(pt));
            if (!d || d->num == 0)
                throw std::invalid_argument("build_family_learner: members not separated");
        }

    const auto a_size = static_cast<int>(spec.alphabet.size());
    const auto m = static_cast<int>(periods.size());
    const int pos_dim = lag + 2;          // one-hot of min(i, lag + 1)
    const int pos_block = a_size;
    const int cand_base = a_size + pos_dim;
    const int per_cand = 2 * a_size + 1;  // match fetch, candidate fetch, mismatch flag
    const int dim = cand_base + m * per_cand;

    TransformerModel model;
    model.alphabet = spec.alphabet;
    model.dim = dim;

    model.embedding.kind = EmbKind::FamilyState;
    model.embedding.dim = dim;
    model.embedding.token_dim = a_size;
    model.embedding.pos_block = pos_block;
    model.embedding.pos_dim = pos_dim;
    model.embedding.declared_bound = 1.0;

    Matrix token_selector(dim, dim);
    for (int c = 0; c < a_size; ++c) token_selector(c, c) = 1.0;

    std::vector<int> rate_indices, cand_blocks;
    for (int t = 0; t < m; ++t) {
        const int match_block = cand_base + t * per_cand;
        const int cand_block = match_block + a_size;
        const int mm_index = match_block + 2 * a_size;
        rate_indices.push_back(mm_index);
        cand_blocks.push_back(cand_block);

        AttentionLayer fetch_match;
        fetch_match.pe = PositionalEncoding::table_one_hot_offset(lag);
        fetch_match.weight.kind = WeightKind::OffsetExp;
        fetch_match.weight.target_offset = periods[t];
        fetch_match.weight.sharpness = spec.sharpness;
        fetch_match.value.m = token_selector;
        fetch_match.act.kind = ActKind::FetchCompare;
        fetch_match.act.token_block = 0;
        fetch_match.act.token_dim = a_size;
        fetch_match.act.fetch_block = match_block;
        fetch_match.act.mismatch_index = mm_index;
        fetch_match.act.pos_block = pos_block;
        fetch_match.act.pos_dim = pos_dim;
        fetch_match.act.valid_lag = periods[t];
        model.layers.push_back(std::move(fetch_match));

        AttentionLayer fetch_cand;
        fetch_cand.pe = PositionalEncoding::table_one_hot_offset(lag);
        fetch_cand.weight.kind = WeightKind::OffsetExp;
        fetch_cand.weight.target_offset = periods[t] - 1;
        fetch_cand.weight.sharpness = spec.sharpness;
        fetch_cand.value.m = token_selector;
        fetch_cand.act.kind = ActKind::FetchCompare;
        fetch_cand.act.token_block = 0;
        fetch_cand.act.token_dim = a_size;
        fetch_cand.act.fetch_block = cand_block;
        fetch_cand.act.mismatch_index = -1;
        fetch_cand.act.pos_block = pos_block;
        fetch_cand.act.pos_dim = pos_dim;
        fetch_cand.act.valid_lag = periods[t] - 1;
        model.layers.push_back(std::move(fetch_cand));
    }

    AttentionLayer select;
    select.pe = PositionalEncoding::constant_zero(dim);
    select.weight.kind = WeightKind::ConstantOne;
    select.value.m = Matrix(dim, dim);
    for (int idx : rate_indices) select.value.m(idx, idx) = 1.0;
    select.act.kind = ActKind::FamilySelect;
    select.act.token_block = 0;
    select.act.token_dim = a_size;
    select.act.select_sharpness = spec.sharpness;
    select.act.rate_indices = rate_indices;
    select.act.cand_blocks = cand_blocks;
    model.layers.push_back(std::move(select));

    model.readout.kind = ReadoutKind::AffineSoftmax;
    model.readout.w = Matrix(a_size, dim);
    for (int tok = 0; tok < a_size; ++tok) model.readout.w(tok, tok) = kFamilyReadoutScale;
    model.readout.b = Vec(static_cast<std::size_t>(a_size), 0.0);

    BuiltLearner built;
    built.model = std::move(model);
    built.n0 = std::max(16, 4 * max_period);

    // report the margin empirically: min observed margin on the members over a
    // short scan past n0, with a safety factor for longer prompts
    double min_margin = 1.0;
    for (int p : periods) {
        TokenSeq pattern(static_cast<std::size_t>(p), 0);
        pattern.back() = 1;
        SeqSpec member = SeqSpec::periodic(pattern);
        auto w = verify_eventual_learning(built.model, member, 1e-9,
                                          static_cast<std::uint64_t>(built.n0),
                                          static_cast<std::uint64_t>(built.n0) + 128);
        for (double mg : w.margins) min_margin = std::min(min_margin, mg);
    }
    built.epsilon = 0.5 * min_margin;
    return built;
}

LearnabilityWitness verify_eventual_learning(const TransformerModel& model, const SeqSpec& spec,
                                             double epsilon, std::uint64_t n0, std::uint64_t N) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("verify_eventual_learning: epsilon <= 0");
    if (n0 < 1 || N < n0) throw std::invalid_argument("verify_eventual_learning: need 1 <= n0 <= N");

    LearnabilityWitness wit;
    wit.epsilon = epsilon;
    wit.n0 = n0;
    wit.horizon = N;
    wit.learned = true;

    DecodeState state(model, prefix(spec, static_cast<std::size_t>(std::max<std::uint64_t>(n0, 1))));
    for (std::uint64_t n = n0; n <= N; ++n) {
        Dist d = state.last_dist();
        auto truth = static_cast<std::size_t>(symbol_at(spec, n + 1));
        double other = -1.0;
        for (std::size_t s = 0; s < d.size(); ++s)
            if (s != truth) other = std::max(other, d[s]);
        double margin = d[truth] - other;
        wit.margins.push_back(margin);
        if (margin < epsilon) {
            wit.learned = false;
            wit.first_failing_n = n;
            break;
        }
        if (n < N) state.push(symbol_at(spec, n + 1));
    }
    return wit;
}

bool finitely_different(const SeqSpec& a, const SeqSpec& b) {
    if (a == b) return true;
    if (!a.eventually_periodic_kind() || !b.eventually_periodic_kind()) return false;
    auto pattern_len = [](const SeqSpec& s) -> std::uint64_t {
        return s.kind == SeqSpec::Kind::Constant ? 1 : s.pattern.size();
    };
    std::uint64_t la = pattern_len(a), lb = pattern_len(b);
    std::uint64_t window = std::lcm(la, lb);
    std::uint64_t burn = std::max(a.preamble.size(), b.preamble.size()) + window;
    for (std::uint64_t i = 1; i <= window; ++i)
        if (symbol_at(a, burn + i) != symbol_at(b, burn + i)) return false;
    return true;
}

FiniteModReport finite_modification_check(const TransformerModel& model, const SeqSpec& spec_a,
                               const SeqSpec& spec_b, double epsilon, std::uint64_t n0,
                               std::uint64_t N) {
    if (!finitely_different(spec_a, spec_b))
        throw std::invalid_argument("finite_modification_check: specs differ at infinitely many positions");
    FiniteModReport rep;
    rep.a = verify_eventual_learning(model, spec_a, epsilon, n0, N);
    rep.b = verify_eventual_learning(model, spec_b, epsilon, n0, N);
    rep.verdicts_agree = rep.a.learned == rep.b.learned;
    return rep;
}

}  // namespace cpelab
