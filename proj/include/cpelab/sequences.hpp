#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpelab/rng.hpp"

namespace cpelab {

using Token = int;
using TokenSeq = std::vector<Token>;

// Ordered token set; tokens are addressed by their index.
class Alphabet {
public:
    Alphabet() : Alphabet({"0", "1"}) {}
    explicit Alphabet(std::vector<std::string> tokens);

    static Alphabet binary() { return Alphabet(); }

    std::size_t size() const { return tokens_.size(); }
    const std::string& label(Token t) const { return tokens_.at(static_cast<std::size_t>(t)); }
    const std::vector<std::string>& labels() const { return tokens_; }
    Token index_of(const std::string& label) const;
    bool contains(Token t) const { return t >= 0 && static_cast<std::size_t>(t) < tokens_.size(); }

    // One token per character, e.g. "0101" over the binary alphabet.
    TokenSeq parse(const std::string& chars) const;
    std::string render(const TokenSeq& seq) const;

    bool operator==(const Alphabet& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
};

enum class IndicatorSet { PowersOfTwo, Squares, Primes };

// Finitely-described infinite binary-alphabet sequence.
struct SeqSpec {
    enum class Kind { Constant, Periodic, EventuallyPeriodic, IncreasingSpacing, Indicator };

    Kind kind = Kind::Constant;
    Token constant = 0;
    TokenSeq preamble;             // EventuallyPeriodic
    TokenSeq pattern;              // Periodic / EventuallyPeriodic
    IndicatorSet set = IndicatorSet::PowersOfTwo;

    static SeqSpec constant_of(Token t);
    static SeqSpec periodic(TokenSeq pattern);
    static SeqSpec eventually_periodic(TokenSeq preamble, TokenSeq pattern);
    static SeqSpec increasing_spacing();
    static SeqSpec indicator(IndicatorSet set);

    bool eventually_periodic_kind() const {
        return kind == Kind::Constant || kind == Kind::Periodic ||
               kind == Kind::EventuallyPeriodic;
    }
    // The 1s of these sequences have vanishing asymptotic frequency.
    bool sparse_ones_kind() const {
        return kind == Kind::IncreasingSpacing || kind == Kind::Indicator;
    }

    bool operator==(const SeqSpec& other) const;
};

// Symbol at 1-based position; O(1) except Indicator(Primes), which tests primality.
Token symbol_at(const SeqSpec& spec, std::uint64_t pos);

// First n symbols. prefix(spec, n) is always a prefix of prefix(spec, m) for n <= m.
TokenSeq prefix(const SeqSpec& spec, std::size_t n);

// (0^{p-1} 1)^r 0 : r blocks of p-1 zeros then a one, followed by a single zero.
TokenSeq beta_block(int p, int r);

// True continuation symbol of the (0^{p-1} 1)-periodic sequence at 1-based position pos.
Token periodic_symbol(int p, std::uint64_t pos);

struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Fraction() = default;
    Fraction(std::int64_t n, std::int64_t d);
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }
};

// Relative Hamming distance between equal-length sequences, as an exact fraction.
Fraction hamming_rel(const TokenSeq& a, const TokenSeq& b);

// liminf of prefix Hamming distances. Exact for eventually periodic pairs and for
// constant-vs-sparse pairs; not computable (nullopt) otherwise.
std::optional<Fraction> dh_asymptotic(const SeqSpec& a, const SeqSpec& b);

enum class ReplacementRule { FlipBinary, UniformDifferent };

struct PerturbationPlan {
    std::vector<std::size_t> positions;  // 1-based, ascending; never includes the last
    ReplacementRule rule = ReplacementRule::FlipBinary;
    bool protect_last = true;
};

// Replaces exactly `count` symbols at distinct positions drawn uniformly from
// {1, ..., len-1}; the final symbol is always left unchanged.
std::pair<TokenSeq, PerturbationPlan> perturb(const TokenSeq& seq, std::size_t count,
                                              ReplacementRule rule, std::size_t alphabet_size,
                                              RngStream& rng);

// Same replacement semantics with caller-chosen positions (1-based, distinct).
TokenSeq apply_perturbation(const TokenSeq& seq, const std::vector<std::size_t>& positions,
                            ReplacementRule rule, std::size_t alphabet_size, RngStream& rng);

// Beta-Binomial pmf: C(n,k) B(k+u, n-k+v) / B(u,v), evaluated via log-gamma.
double betabinom_pmf(int k, int n, double u, double v);

// `count` distinct 1-based positions in {1..n}; each draw is inverse-CDF over the
// Beta-Binomial table on {0..n-1} mapped to position k+1; duplicates are redrawn.
std::vector<std::size_t> sample_positions_betabinomial(std::size_t count, std::size_t n,
                                                       double u, double v, RngStream& rng);

}  // namespace cpelab
