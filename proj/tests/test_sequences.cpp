#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cpelab/sequences.hpp"

using namespace cpelab;

namespace {

const Alphabet kBinary = Alphabet::binary();

std::string render(const TokenSeq& t) { return kBinary.render(t); }

}  // namespace

TEST_CASE("increasing spacing prefix matches the canonical string") {
    CHECK(render(prefix(SeqSpec::increasing_spacing(), 26)) == "10100100010000100000100000");
}

TEST_CASE("periodic and indicator prefixes") {
    CHECK(render(prefix(SeqSpec::periodic(kBinary.parse("01")), 5)) == "01010");
    CHECK(render(prefix(SeqSpec::indicator(IndicatorSet::PowersOfTwo), 8)) == "11010001");
    CHECK(render(prefix(SeqSpec::indicator(IndicatorSet::Squares), 10)) == "1001000010");
    // primes: 2,3,5,7 within 1..10
    CHECK(render(prefix(SeqSpec::indicator(IndicatorSet::Primes), 10)) == "0110101000");
    CHECK(render(prefix(SeqSpec::eventually_periodic(kBinary.parse("111"), kBinary.parse("0")), 6)) ==
          "111000");
}

TEST_CASE("prefix consistency: prefix(n) is a prefix of prefix(2n)") {
    std::vector<SeqSpec> specs = {
        SeqSpec::constant_of(0),
        SeqSpec::periodic(kBinary.parse("001")),
        SeqSpec::eventually_periodic(kBinary.parse("11"), kBinary.parse("010")),
        SeqSpec::increasing_spacing(),
        SeqSpec::indicator(IndicatorSet::PowersOfTwo),
        SeqSpec::indicator(IndicatorSet::Squares),
        SeqSpec::indicator(IndicatorSet::Primes),
    };
    for (const SeqSpec& spec : specs) {
        for (std::size_t n : {1, 7, 63, 1000, 10000}) {
            TokenSeq small = prefix(spec, n);
            TokenSeq big = prefix(spec, 2 * n);
            CHECK(std::equal(small.begin(), small.end(), big.begin()));
        }
    }
}

TEST_CASE("beta_block") {
    CHECK(render(beta_block(3, 2)) == "0010010");
    CHECK(render(beta_block(2, 1)) == "010");
    TokenSeq long_block = beta_block(5, 10);
    CHECK(long_block.size() == 51);
    int ones = 0;
    for (Token t : long_block) ones += t;
    CHECK(ones == 10);
    CHECK_THROWS_AS(beta_block(1, 1), std::invalid_argument);
    CHECK_THROWS_AS(beta_block(3, 0), std::invalid_argument);
}

TEST_CASE("periodic_symbol continues beta blocks") {
    // (0^{p-1}1)^w has its ones exactly at multiples of p
    for (int p : {2, 3, 7}) {
        TokenSeq block = beta_block(p, 3);
        for (std::size_t i = 0; i < block.size(); ++i)
            CHECK(block[i] == periodic_symbol(p, i + 1));
    }
}

TEST_CASE("hamming_rel exact fractions") {
    CHECK(hamming_rel(kBinary.parse("0101"), kBinary.parse("0101")) == Fraction(0, 1));
    CHECK(hamming_rel(kBinary.parse("00"), kBinary.parse("01")) == Fraction(1, 2));
    // all-zero vs (0^31)^w over 7 full periods: one mismatch per period
    const int k = 4;
    TokenSeq pat(k, 0);
    pat.back() = 1;
    TokenSeq a = prefix(SeqSpec::constant_of(0), 7 * k);
    TokenSeq b = prefix(SeqSpec::periodic(pat), 7 * k);
    CHECK(hamming_rel(a, b) == Fraction(1, 4));
    CHECK_THROWS_AS(hamming_rel(kBinary.parse("0"), kBinary.parse("01")), std::invalid_argument);
    CHECK_THROWS_AS(hamming_rel({}, {}), std::invalid_argument);
}

TEST_CASE("hamming_rel is a metric on fixed-length sequences") {
    RngStream rng(3, 0);
    for (int trial = 0; trial < 2000; ++trial) {
        TokenSeq a(12), b(12), c(12);
        for (int i = 0; i < 12; ++i) {
            a[i] = static_cast<Token>(rng.uniform_int(2));
            b[i] = static_cast<Token>(rng.uniform_int(2));
            c[i] = static_cast<Token>(rng.uniform_int(2));
        }
        Fraction ab = hamming_rel(a, b);
        CHECK(hamming_rel(b, a) == ab);
        CHECK(hamming_rel(a, a) == Fraction(0, 1));
        CHECK(ab.value() <= hamming_rel(a, c).value() + hamming_rel(c, b).value() + 1e-15);
    }
}

TEST_CASE("dh_asymptotic exact values") {
    TokenSeq pat5(5, 0);
    pat5.back() = 1;
    auto d = dh_asymptotic(SeqSpec::constant_of(0), SeqSpec::periodic(pat5));
    REQUIRE(d.has_value());
    CHECK(*d == Fraction(1, 5));

    auto zero = dh_asymptotic(SeqSpec::constant_of(0), SeqSpec::indicator(IndicatorSet::PowersOfTwo));
    REQUIRE(zero.has_value());
    CHECK(*zero == Fraction(0, 1));

    auto self = dh_asymptotic(SeqSpec::increasing_spacing(), SeqSpec::increasing_spacing());
    REQUIRE(self.has_value());
    CHECK(*self == Fraction(0, 1));

    // all-one constant disagrees with a sparse sequence almost everywhere
    auto one = dh_asymptotic(SeqSpec::constant_of(1), SeqSpec::indicator(IndicatorSet::Squares));
    REQUIRE(one.has_value());
    CHECK(*one == Fraction(1, 1));

    // two sparse sequences sit at distance zero
    auto sparse = dh_asymptotic(SeqSpec::indicator(IndicatorSet::PowersOfTwo),
                                SeqSpec::increasing_spacing());
    REQUIRE(sparse.has_value());
    CHECK(*sparse == Fraction(0, 1));

    // periodic vs a non-constant indicator is out of scope
    CHECK_FALSE(dh_asymptotic(SeqSpec::periodic(kBinary.parse("01")),
                              SeqSpec::indicator(IndicatorSet::Primes))
                    .has_value());
}

TEST_CASE("dh_asymptotic handles phase-shifted eventually periodic pairs") {
    // 0101... vs 1(10)* agree from position 2 on
    auto d = dh_asymptotic(SeqSpec::periodic(kBinary.parse("01")),
                           SeqSpec::eventually_periodic(kBinary.parse("1"), kBinary.parse("10")));
    REQUIRE(d.has_value());
    CHECK(*d == Fraction(0, 1));
}

TEST_CASE("windowed hamming converges to dh_asymptotic for eventually periodic pairs") {
    SeqSpec a = SeqSpec::periodic(kBinary.parse("0010"));
    SeqSpec b = SeqSpec::eventually_periodic(kBinary.parse("1"), kBinary.parse("000001"));
    auto lim = dh_asymptotic(a, b);
    REQUIRE(lim.has_value());
    const double window = 12.0;  // lcm(4, 6)
    for (std::size_t m : {240, 1200, 6000}) {
        Fraction fm = hamming_rel(prefix(a, m), prefix(b, m));
        CHECK(std::abs(fm.value() - lim->value()) <= 2.0 * window / static_cast<double>(m));
    }
}

TEST_CASE("perturb count zero returns the input") {
    RngStream rng(1, 0);
    TokenSeq seq = kBinary.parse("0110");
    auto [out, plan] = perturb(seq, 0, ReplacementRule::FlipBinary, 2, rng);
    CHECK(out == seq);
    CHECK(plan.positions.empty());
}

TEST_CASE("perturb never touches the last position") {
    RngStream rng(2, 0);
    for (int trial = 0; trial < 500; ++trial) {
        TokenSeq seq(4, 0);
        auto [out, plan] = perturb(seq, 1, ReplacementRule::FlipBinary, 2, rng);
        CHECK(out.back() == 0);
        CHECK(plan.positions.size() == 1);
        CHECK(plan.positions[0] <= 3);
        int flips = 0;
        for (std::size_t i = 0; i < seq.size(); ++i) flips += out[i] != seq[i];
        CHECK(flips == 1);
    }
}

TEST_CASE("perturb changes exactly count positions; hamming matches exactly") {
    RngStream rng(8, 0);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t len = 20 + rng.uniform_int(50);
        std::size_t count = rng.uniform_int(len - 1);
        TokenSeq seq(len, 0);
        auto [out, plan] = perturb(seq, count, ReplacementRule::FlipBinary, 2, rng);
        CHECK(plan.positions.size() == count);
        if (count > 0)
            CHECK(hamming_rel(seq, out) ==
                  Fraction(static_cast<std::int64_t>(count), static_cast<std::int64_t>(len)));
    }
    TokenSeq seq(10, 0);
    CHECK_THROWS_AS(perturb(seq, 10, ReplacementRule::FlipBinary, 2, rng), std::invalid_argument);
}

TEST_CASE("gamma=0.01 over 190 symbols flips exactly one") {
    // max(1, floor(0.01 * 189)) = 1
    CHECK(static_cast<std::size_t>(std::floor(0.01 * 189)) == 1);
}

TEST_CASE("uniform-different replacement leaves no token equal to its original") {
    RngStream rng(4, 0);
    for (int trial = 0; trial < 300; ++trial) {
        TokenSeq seq(8, 2);  // alphabet of 4 symbols
        auto [out, plan] = perturb(seq, 5, ReplacementRule::UniformDifferent, 4, rng);
        for (std::size_t pos : plan.positions) {
            CHECK(out[pos - 1] != 2);
            CHECK(out[pos - 1] >= 0);
            CHECK(out[pos - 1] < 4);
        }
    }
}

TEST_CASE("betabinom_pmf uniform case and small closed forms") {
    for (int n : {1, 5, 30}) {
        for (int k = 0; k <= n; ++k)
            CHECK(std::abs(betabinom_pmf(k, n, 1.0, 1.0) - 1.0 / (n + 1)) < 1e-15);
    }
    CHECK(betabinom_pmf(0, 1, 1, 1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(betabinom_pmf(1, 1, 1, 1) == doctest::Approx(0.5).epsilon(1e-14));

    // n=2, u=2, v=1: direct Beta-function evaluation gives 1/6, 1/3, 1/2
    CHECK(betabinom_pmf(0, 2, 2, 1) == doctest::Approx(1.0 / 6).epsilon(1e-13));
    CHECK(betabinom_pmf(1, 2, 2, 1) == doctest::Approx(1.0 / 3).epsilon(1e-13));
    CHECK(betabinom_pmf(2, 2, 2, 1) == doctest::Approx(1.0 / 2).epsilon(1e-13));

    CHECK_THROWS_AS(betabinom_pmf(3, 2, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(betabinom_pmf(0, 2, 0.0, 1), std::invalid_argument);
}

TEST_CASE("betabinom_pmf sums to one for every default shape at n=189") {
    for (auto [u, v] : std::vector<std::pair<double, double>>{
             {1, 1}, {2, 2}, {5, 5}, {0.5, 0.5}, {1, 3}, {1, 8}, {3, 1}, {8, 1}}) {
        double sum = 0.0;
        for (int k = 0; k <= 189; ++k) sum += betabinom_pmf(k, 189, u, v);
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("sample_positions_betabinomial: count = n returns every position") {
    RngStream rng(6, 0);
    auto all = sample_positions_betabinomial(9, 9, 2.0, 5.0, rng);
    CHECK(all.size() == 9);
    for (std::size_t i = 0; i < 9; ++i) CHECK(all[i] == i + 1);
}

TEST_CASE("sample_positions_betabinomial uniform shape passes a chi-square check") {
    RngStream rng(10, 0);
    const std::size_t n = 9;
    std::vector<long> counts(n, 0);
    const long draws = 100000;
    for (long i = 0; i < draws; ++i) {
        auto pos = sample_positions_betabinomial(1, n, 1.0, 1.0, rng);
        ++counts[pos[0] - 1];
    }
    double expected = static_cast<double>(draws) / n;
    double stat = 0.0;
    for (long c : counts) stat += (c - expected) * (c - expected) / expected;
    // chi-square upper 0.001 quantile at 8 degrees of freedom
    CHECK(stat < 26.125);
}

TEST_CASE("sample_positions_betabinomial end bias pushes the mean right") {
    RngStream rng(12, 0);
    const std::size_t n = 189;
    double exact_mean = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        exact_mean += (k + 1) * betabinom_pmf(static_cast<int>(k), static_cast<int>(n) - 1, 8.0, 1.0);
    CHECK(exact_mean > static_cast<double>(n) / 2.0);

    double empirical = 0.0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        auto pos = sample_positions_betabinomial(1, n, 8.0, 1.0, rng);
        empirical += static_cast<double>(pos[0]);
    }
    empirical /= draws;
    CHECK(empirical > static_cast<double>(n) / 2.0);
    CHECK(empirical == doctest::Approx(exact_mean).epsilon(0.02));
}

TEST_CASE("sample_positions_betabinomial rejects duplicates") {
    RngStream rng(13, 0);
    for (int trial = 0; trial < 100; ++trial) {
        auto pos = sample_positions_betabinomial(5, 12, 8.0, 1.0, rng);
        CHECK(pos.size() == 5);
        for (std::size_t i = 0; i + 1 < pos.size(); ++i) CHECK(pos[i] < pos[i + 1]);
    }
    CHECK_THROWS_AS(sample_positions_betabinomial(13, 12, 1.0, 1.0, rng), std::invalid_argument);
}
