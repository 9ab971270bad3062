#include "cpelab/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace cpelab {

Alphabet::Alphabet(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty()) throw std::invalid_argument("Alphabet: empty token list");
    for (std::size_t i = 0; i < tokens_.size(); ++i)
        for (std::size_t j = i + 1; j < tokens_.size(); ++j)
            if (tokens_[i] == tokens_[j])
                throw std::invalid_argument("Alphabet: duplicate token '" + tokens_[i] + "'");
}

Token Alphabet::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i)
        if (tokens_[i] == label) return static_cast<Token>(i);
    throw std::invalid_argument("Alphabet: unknown token '" + label + "'");
}

TokenSeq Alphabet::parse(const std::string& chars) const {
    TokenSeq out;
    out.reserve(chars.size());
    for (char c : chars) out.push_back(index_of(std::string(1, c)));
    return out;
}

std::string Alphabet::render(const TokenSeq& seq) const {
    std::string out;
    for (Token t : seq) out += label(t);
    return out;
}

SeqSpec SeqSpec::constant_of(Token t) {
    SeqSpec s;
    s.kind = Kind::Constant;
    s.constant = t;
    return s;
}

SeqSpec SeqSpec::periodic(TokenSeq pattern) {
    if (pattern.empty()) throw std::invalid_argument("SeqSpec: empty periodic pattern");
    SeqSpec s;
    s.kind = Kind::Periodic;
    s.pattern = std::move(pattern);
    return s;
}

SeqSpec SeqSpec::eventually_periodic(TokenSeq preamble, TokenSeq pattern) {
    if (pattern.empty()) throw std::invalid_argument("SeqSpec: empty periodic pattern");
    SeqSpec s;
    s.kind = Kind::EventuallyPeriodic;
    s.preamble = std::move(preamble);
    s.pattern = std::move(pattern);
    return s;
}

SeqSpec SeqSpec::increasing_spacing() {
    SeqSpec s;
    s.kind = Kind::IncreasingSpacing;
    return s;
}

SeqSpec SeqSpec::indicator(IndicatorSet set) {
    SeqSpec s;
    s.kind = Kind::Indicator;
    s.set = set;
    return s;
}

bool SeqSpec::operator==(const SeqSpec& other) const {
    if (kind != other.kind) return false;
    switch (kind) {
        case Kind::Constant: return constant == other.constant;
        case Kind::Periodic: return pattern == other.pattern;
        case Kind::EventuallyPeriodic:
            return preamble == other.preamble && pattern == other.pattern;
        case Kind::IncreasingSpacing: return true;
        case Kind::Indicator: return set == other.set;
    }
    return false;
}

namespace {

bool is_power_of_two(std::uint64_t n) { return n != 0 && (n & (n - 1)) == 0; }

bool is_square(std::uint64_t n) {
    auto r = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(n))));
    for (std::uint64_t c = (r > 0 ? r - 1 : 0); c <= r + 1; ++c)
        if (c * c == n) return true;
    return false;
}

bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    if (n < 4) return true;
    if (n % 2 == 0) return false;
    for (std::uint64_t d = 3; d * d <= n; d += 2)
        if (n % d == 0) return false;
    return true;
}

// 1s sit at the triangular numbers 1, 3, 6, 10, ... (each gap one longer).
bool is_triangular(std::uint64_t n) {
    auto k = static_cast<std::uint64_t>(
        std::llround((std::sqrt(8.0 * static_cast<double>(n) + 1.0) - 1.0) / 2.0));
    for (std::uint64_t c = (k > 0 ? k - 1 : 0); c <= k + 1; ++c)
        if (c * (c + 1) / 2 == n) return true;
    return false;
}

}  // namespace

Token symbol_at(const SeqSpec& spec, std::uint64_t pos) {
    if (pos == 0) throw std::invalid_argument("symbol_at: positions are 1-based");
    switch (spec.kind) {
        case SeqSpec::Kind::Constant: return spec.constant;
        case SeqSpec::Kind::Periodic:
            return spec.pattern[(pos - 1) % spec.pattern.size()];
        case SeqSpec::Kind::EventuallyPeriodic:
            if (pos <= spec.preamble.size()) return spec.preamble[pos - 1];
            return spec.pattern[(pos - 1 - spec.preamble.size()) % spec.pattern.size()];
        case SeqSpec::Kind::IncreasingSpacing: return is_triangular(pos) ? 1 : 0;
        case SeqSpec::Kind::Indicator:
            switch (spec.set) {
                case IndicatorSet::PowersOfTwo: return is_power_of_two(pos) ? 1 : 0;
                case IndicatorSet::Squares: return is_square(pos) ? 1 : 0;
                case IndicatorSet::Primes: return is_prime(pos) ? 1 : 0;
            }
    }
    throw std::logic_error("symbol_at: unreachable");
}

TokenSeq prefix(const SeqSpec& spec, std::size_t n) {
    TokenSeq out;
    out.reserve(n);
    if (spec.kind == SeqSpec::Kind::Indicator && spec.set == IndicatorSet::Primes) {
        // sieve instead of per-position trial division
        std::vector<bool> composite(n + 1, false);
        for (std::size_t p = 2; p * p <= n; ++p)
            if (!composite[p])
                for (std::size_t q = p * p; q <= n; q += p) composite[q] = true;
        for (std::size_t i = 1; i <= n; ++i)
            out.push_back((i >= 2 && !composite[i]) ? 1 : 0);
        return out;
    }
    for (std::size_t i = 1; i <= n; ++i) out.push_back(symbol_at(spec, i));
    return out;
}

TokenSeq beta_block(int p, int r) {
    if (p < 2) throw std::invalid_argument("beta_block: p must be >= 2");
    if (r < 1) throw std::invalid_argument("beta_block: r must be >= 1");
    TokenSeq out;
    out.reserve(static_cast<std::size_t>(p) * r + 1);
    for (int block = 0; block < r; ++block) {
        for (int z = 0; z < p - 1; ++z) out.push_back(0);
        out.push_back(1);
    }
    out.push_back(0);
    return out;
}

Token periodic_symbol(int p, std::uint64_t pos) {
    if (p < 2) throw std::invalid_argument("periodic_symbol: p must be >= 2");
    if (pos == 0) throw std::invalid_argument("periodic_symbol: positions are 1-based");
    return pos % static_cast<std::uint64_t>(p) == 0 ? 1 : 0;
}

Fraction::Fraction(std::int64_t n, std::int64_t d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("Fraction: zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

Fraction hamming_rel(const TokenSeq& a, const TokenSeq& b) {
    if (a.empty()) throw std::invalid_argument("hamming_rel: empty sequences");
    if (a.size() != b.size()) throw std::invalid_argument("hamming_rel: length mismatch");
    std::int64_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) ++diff;
    return Fraction(diff, static_cast<std::int64_t>(a.size()));
}

namespace {

struct Tail {
    TokenSeq preamble;
    TokenSeq pattern;
};

Tail canonical_tail(const SeqSpec& s) {
    switch (s.kind) {
        case SeqSpec::Kind::Constant: return {{}, {s.constant}};
        case SeqSpec::Kind::Periodic: return {{}, s.pattern};
        case SeqSpec::Kind::EventuallyPeriodic: return {s.preamble, s.pattern};
        default: throw std::logic_error("canonical_tail: not eventually periodic");
    }
}

}  // namespace

std::optional<Fraction> dh_asymptotic(const SeqSpec& a, const SeqSpec& b) {
    if (a == b) return Fraction(0, 1);
    if (a.eventually_periodic_kind() && b.eventually_periodic_kind()) {
        // mean disagreement over one lcm window after both preambles; preamble
        // differences are finite and do not move the liminf
        Tail ta = canonical_tail(a), tb = canonical_tail(b);
        auto la = static_cast<std::int64_t>(ta.pattern.size());
        auto lb = static_cast<std::int64_t>(tb.pattern.size());
        std::int64_t window = std::lcm(la, lb);
        auto start = static_cast<std::uint64_t>(
            std::max(ta.preamble.size(), tb.preamble.size()));
        std::uint64_t base = start + static_cast<std::uint64_t>(window);  // align both tails
        std::int64_t diff = 0;
        for (std::int64_t i = 0; i < window; ++i) {
            std::uint64_t pos = base + static_cast<std::uint64_t>(i) + 1;
            if (symbol_at(a, pos) != symbol_at(b, pos)) ++diff;
        }
        return Fraction(diff, window);
    }
    // Indicator and increasing-spacing sequences have density-zero 1s: against a
    // constant they agree (constant 0) or disagree (any other symbol) at a
    // full-density set of positions. Two sparse sequences differ on a
    // density-zero set.
    auto sparse_vs_constant = [](const SeqSpec& sparse, const SeqSpec& cst)
        -> std::optional<Fraction> {
        if (!sparse.sparse_ones_kind() || cst.kind != SeqSpec::Kind::Constant)
            return std::nullopt;
        return cst.constant == 0 ? Fraction(0, 1) : Fraction(1, 1);
    };
    if (auto r = sparse_vs_constant(a, b)) return r;
    if (auto r = sparse_vs_constant(b, a)) return r;
    if (a.sparse_ones_kind() && b.sparse_ones_kind()) return Fraction(0, 1);
    return std::nullopt;
}

TokenSeq apply_perturbation(const TokenSeq& seq, const std::vector<std::size_t>& positions,
                            ReplacementRule rule, std::size_t alphabet_size, RngStream& rng) {
    TokenSeq out = seq;
    for (std::size_t pos : positions) {
        if (pos < 1 || pos > seq.size())
            throw std::invalid_argument("apply_perturbation: position out of bounds");
        Token& t = out[pos - 1];
        if (rule == ReplacementRule::FlipBinary) {
            if (alphabet_size != 2)
                throw std::invalid_argument("apply_perturbation: flip rule needs |alphabet| = 2");
            t = 1 - t;
        } else {
            auto r = static_cast<Token>(rng.uniform_int(alphabet_size - 1));
            t = r >= t ? r + 1 : r;  // uniform over the other symbols
        }
    }
    return out;
}

std::pair<TokenSeq, PerturbationPlan> perturb(const TokenSeq& seq, std::size_t count,
                                              ReplacementRule rule, std::size_t alphabet_size,
                                              RngStream& rng) {
    if (seq.empty()) throw std::invalid_argument("perturb: empty sequence");
    if (count > seq.size() - 1)
        throw std::invalid_argument("perturb: count exceeds length - 1");
    PerturbationPlan plan;
    plan.rule = rule;
    plan.protect_last = true;
    for (std::size_t idx : rng.sample_without_replacement(count, seq.size() - 1))
        plan.positions.push_back(idx + 1);
    TokenSeq out = apply_perturbation(seq, plan.positions, rule, alphabet_size, rng);
    return {std::move(out), std::move(plan)};
}

namespace {

double lbeta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double lchoose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

double betabinom_pmf(int k, int n, double u, double v) {
    if (n < 0 || k < 0 || k > n) throw std::invalid_argument("betabinom_pmf: need 0 <= k <= n");
    if (!(u > 0.0) || !(v > 0.0)) throw std::invalid_argument("betabinom_pmf: need u, v > 0");
    // linear-space products avoid the cancellation of differenced log-gammas;
    // pmf(0) = prod_i (v+i)/(u+v+i), then the standard ratio recurrence
    double p = 1.0;
    for (int i = 0; i < n; ++i) p *= (v + i) / (u + v + i);
    for (int j = 1; j <= k; ++j) {
        double num = static_cast<double>(n - j + 1) * (u + j - 1);
        double den = static_cast<double>(j) * (n - j + v);
        p *= num / den;
        if (p < 1e-280) {  // fall back to log space for extreme tails
            return std::exp(lchoose(n, k) + lbeta(k + u, n - k + v) - lbeta(u, v));
        }
    }
    return p;
}

std::vector<std::size_t> sample_positions_betabinomial(std::size_t count, std::size_t n,
                                                       double u, double v, RngStream& rng) {
    if (count > n)
        throw std::invalid_argument("sample_positions_betabinomial: count exceeds n");
    if (n == 0) return {};
    if (count == n) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{1});
        return all;
    }
    // pmf over k in {0..n-1}; drawn k maps to position k+1
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        acc += betabinom_pmf(static_cast<int>(k), static_cast<int>(n) - 1, u, v);
        cdf[k] = acc;
    }
    std::vector<bool> taken(n, false);
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
        double x = rng.next_double() * acc;
        auto it = std::lower_bound(cdf.begin(), cdf.end(), x);
        std::size_t k = it == cdf.end() ? n - 1 : static_cast<std::size_t>(it - cdf.begin());
        if (taken[k]) continue;
        taken[k] = true;
        out.push_back(k + 1);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace cpelab
