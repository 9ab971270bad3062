#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace cpelab {

// Counter-based generator: each draw is a hash of (key, counter), where the
// key is derived from (seed, stream). Draw sequences are therefore identical
// across platforms and thread schedules, and forked child streams are
// independent of the parent's position.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream), key_(derive_key(seed, stream)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    // Child stream identified by (seed, hash(stream, child)); counter starts at 0.
    RngStream fork(std::uint64_t child) const {
        RngStream r;
        r.seed_ = seed_;
        r.stream_ = mix64(stream_ ^ (child * 0xd2b74407b1ce6e93ULL + 0x9e3779b97f4a7c15ULL));
        r.key_ = derive_key(r.seed_, r.stream_);
        return r;
    }

    std::uint64_t next_u64() {
        std::uint64_t h = key_ + counter_ * 0x9e3779b97f4a7c15ULL;
        ++counter_;
        return mix64(h);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe for logs.
    double next_double_open() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound). bound must be positive.
    std::uint64_t uniform_int(std::uint64_t bound) {
        // rejection sampling to avoid modulo bias
        std::uint64_t threshold = (0ULL - bound) % bound;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; consumes two draws per pair, caches the spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double_open();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // k distinct values from {0, ..., m-1} via partial Fisher-Yates, sorted ascending.
    std::vector<std::size_t> sample_without_replacement(std::size_t k, std::size_t m) {
        std::vector<std::size_t> pool(m);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t t = 0; t < k; ++t) {
            std::size_t pick = t + static_cast<std::size_t>(uniform_int(m - t));
            std::swap(pool[t], pool[pick]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    // Random permutation of {0, ..., m-1}.
    std::vector<std::size_t> permutation(std::size_t m) {
        std::vector<std::size_t> pool(m);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t t = 0; t + 1 < m; ++t) {
            std::size_t pick = t + static_cast<std::size_t>(uniform_int(m - t));
            std::swap(pool[t], pool[pick]);
        }
        return pool;
    }

private:
    static std::uint64_t mix64(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
        return mix64(mix64(seed ^ 0x6a09e667f3bcc908ULL) ^ (stream + 0xbb67ae8584caa73bULL));
    }

    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace cpelab
