#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cpelab/numeric.hpp"
#include "cpelab/rng.hpp"

using namespace cpelab;

TEST_CASE("linf_distance basics") {
    CHECK(linf_distance({1, 2}, {1, 2}) == 0.0);
    CHECK(linf_distance({1, 2}, {1, 4}) == 2.0);
    // max(|0.3 - (-0.2)|, |-1 - 0|) = max(0.5, 1)
    CHECK(linf_distance({0.3, -1.0}, {-0.2, 0.0}) == 1.0);
    CHECK_THROWS_AS(linf_distance({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("linf_distance metric axioms on random triples") {
    RngStream rng(42, 0);
    for (int trial = 0; trial < 10000; ++trial) {
        Vec a(4), b(4), c(4);
        for (int i = 0; i < 4; ++i) {
            a[i] = rng.uniform(-10, 10);
            b[i] = rng.uniform(-10, 10);
            c[i] = rng.uniform(-10, 10);
        }
        double ab = linf_distance(a, b);
        double ba = linf_distance(b, a);
        double ac = linf_distance(a, c);
        double cb = linf_distance(c, b);
        CHECK(ab == ba);
        CHECK(ab >= 0.0);
        CHECK(linf_distance(a, a) == 0.0);
        CHECK(ab <= ac + cb + 1e-15);
    }
}

TEST_CASE("softmax analytic cases") {
    Dist d = softmax({0.0, 0.0});
    CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-15));

    Dist e = softmax({std::log(2.0), 0.0});
    CHECK(e[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(e[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    Dist f = softmax({1000.0, 0.0});
    CHECK(f[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f[1] >= 0.0);
    CHECK(all_finite(f.probs()));
}

TEST_CASE("softmax stays a valid Dist for huge logits") {
    RngStream rng(7, 0);
    for (int trial = 0; trial < 2000; ++trial) {
        Vec logits(5);
        for (double& x : logits) x = rng.uniform(-1e6, 1e6);
        Dist d = softmax(logits);  // Dist construction validates
        double sum = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) sum += d[i];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("argmax_with_margin") {
    auto r = argmax_with_margin(Dist({0.7, 0.2, 0.1}));
    CHECK(r.index == 0);
    CHECK(r.margin == doctest::Approx(0.5).epsilon(1e-15));

    auto tie = argmax_with_margin(Dist({0.5, 0.5}));
    CHECK(tie.index == 0);  // lowest index wins ties
    CHECK(tie.margin == 0.0);

    auto r2 = argmax_with_margin(Dist({0.1, 0.3, 0.6}));
    CHECK(r2.index == 2);
    CHECK(r2.margin == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("argmax margin nonnegative and zero only on ties") {
    RngStream rng(11, 0);
    for (int trial = 0; trial < 5000; ++trial) {
        Vec logits(4);
        for (double& x : logits) x = rng.uniform(-3, 3);
        Dist d = softmax(logits);
        auto r = argmax_with_margin(d);
        CHECK(r.margin >= 0.0);
        double top2 = -1.0;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (i != r.index) top2 = std::max(top2, d[i]);
        CHECK((r.margin == 0.0) == (d[r.index] == top2));
    }
}

TEST_CASE("Dist validation rejects bad vectors") {
    CHECK_THROWS_AS(Dist(Vec{0.5, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(Dist(Vec{}), std::invalid_argument);
    CHECK_THROWS_AS(Dist(Vec{1.5, -0.5}), std::invalid_argument);
}

TEST_CASE("rng reproducibility: same seed, same stream, same draws") {
    RngStream a(123, 5);
    RngStream b(123, 5);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng forks are order-insensitive") {
    RngStream root(9, 0);
    RngStream child3_first = root.fork(3);
    // consuming from the parent must not shift the children
    RngStream root2(9, 0);
    root2.next_u64();
    root2.next_u64();
    RngStream child3_second = root2.fork(3);
    for (int i = 0; i < 100; ++i) CHECK(child3_first.next_u64() == child3_second.next_u64());

    RngStream c1 = RngStream(9, 0).fork(1);
    RngStream c2 = RngStream(9, 0).fork(2);
    CHECK(c1.next_u64() != c2.next_u64());
}

TEST_CASE("uniform_int covers its range without bias artifacts") {
    RngStream rng(77, 0);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 100000; ++i) ++counts[rng.uniform_int(10)];
    for (int c : counts) {
        CHECK(c > 9000);
        CHECK(c < 11000);
    }
}

TEST_CASE("sample_without_replacement yields distinct sorted values") {
    RngStream rng(5, 0);
    for (int trial = 0; trial < 200; ++trial) {
        auto s = rng.sample_without_replacement(7, 20);
        CHECK(s.size() == 7);
        for (std::size_t i = 0; i + 1 < s.size(); ++i) CHECK(s[i] < s[i + 1]);
        for (std::size_t v : s) CHECK(v < 20);
    }
}

TEST_CASE("normal draws have the right first two moments") {
    RngStream rng(31, 0);
    double sum = 0.0, sumsq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}
