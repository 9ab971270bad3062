#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpelab {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// l-infinity distance; the norm used everywhere in this project.
inline double linf_distance(const Vec& u, const Vec& v) {
    if (u.size() != v.size())
        throw std::invalid_argument("linf_distance: dimension mismatch (" +
                                    std::to_string(u.size()) + " vs " +
                                    std::to_string(v.size()) + ")");
    double m = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) m = std::max(m, std::abs(u[i] - v[i]));
    return m;
}

inline double linf_norm(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Probability vector over an alphabet. Entries in [0,1], sum within 1e-9 of 1.
class Dist {
public:
    Dist() = default;
    explicit Dist(Vec probs) : p_(std::move(probs)) { validate(); }

    static Dist uniform(std::size_t n) { return Dist(Vec(n, 1.0 / static_cast<double>(n))); }

    const Vec& probs() const { return p_; }
    double operator[](std::size_t i) const { return p_[i]; }
    std::size_t size() const { return p_.size(); }

private:
    void validate() const {
        if (p_.empty()) throw std::invalid_argument("Dist: empty probability vector");
        double sum = 0.0;
        for (double x : p_) {
            if (!std::isfinite(x) || x < -1e-12 || x > 1.0 + 1e-9)
                throw std::invalid_argument("Dist: entry outside [0,1]");
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("Dist: probabilities sum to " + std::to_string(sum));
    }

    Vec p_;
};

// Max-subtraction stabilized softmax; finite output for any finite logits.
inline Dist softmax(const Vec& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    double m = logits[0];
    for (double x : logits) m = std::max(m, x);
    Vec e(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        e[i] = std::exp(logits[i] - m);
        sum += e[i];
    }
    for (double& x : e) x /= sum;
    return Dist(std::move(e));
}

struct ArgmaxResult {
    std::size_t index;  // ties broken toward the lowest token index
    double margin;      // top-1 minus top-2 probability; 0 iff the top two are equal
};

inline ArgmaxResult argmax_with_margin(const Dist& d) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < d.size(); ++i)
        if (d[i] > d[best]) best = i;
    double second = -1.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (i != best) second = std::max(second, d[i]);
    return {best, d.size() == 1 ? d[0] : d[best] - second};
}

inline ArgmaxResult argmax_with_margin(const Vec& probs) {
    return argmax_with_margin(Dist(probs));
}

}  // namespace cpelab
