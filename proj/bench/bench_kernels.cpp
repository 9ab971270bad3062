// Timing comparison: OpenMP attention kernels vs the serial reference, and
// incremental decoding vs full recomputation.

#include <chrono>
#include <cstdio>

#include "cpelab/model.hpp"
#include "cpelab/reference.hpp"

using namespace cpelab;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

TokenSeq random_tokens(std::size_t n, RngStream& rng) {
    TokenSeq t(n);
    for (Token& x : t) x = static_cast<Token>(rng.uniform_int(2));
    return t;
}

}  // namespace

int main() {
    RngStream rng(12345, 0);
    RandomModelOptions opts;
    opts.dim = 32;
    opts.num_layers = 2;
    TransformerModel model = make_random_model(opts, rng);

    std::printf("%-34s %10s %10s %8s\n", "kernel", "omp(ms)", "serial(ms)", "speedup");

    for (std::size_t n : {128, 512, 1024}) {
        TokenSeq tokens = random_tokens(n, rng);
        std::vector<Vec> xs = embed_all(model, tokens);

        auto t0 = Clock::now();
        std::vector<Vec> fast;
        for (int rep = 0; rep < 3; ++rep) fast = layer_forward(model.layers[0], xs);
        double fast_ms = ms_since(t0) / 3.0;

        t0 = Clock::now();
        std::vector<Vec> slow;
        for (int rep = 0; rep < 3; ++rep) slow = reference::layer_forward(model.layers[0], xs);
        double slow_ms = ms_since(t0) / 3.0;

        double worst = 0.0;
        for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, linf_distance(fast[j], slow[j]));
        char label[64];
        std::snprintf(label, sizeof label, "layer_forward n=%zu (max|d|=%.1e)", n, worst);
        std::printf("%-34s %10.2f %10.2f %7.1fx\n", label, fast_ms, slow_ms, slow_ms / fast_ms);
    }

    {
        TokenSeq prompt = random_tokens(16, rng);
        const std::size_t steps = 64;
        auto t0 = Clock::now();
        TokenSeq inc = decode_autoregressive(model, prompt, steps);
        double inc_ms = ms_since(t0);
        t0 = Clock::now();
        TokenSeq full = reference::decode_full_recompute(model, prompt, steps);
        double full_ms = ms_since(t0);
        char label[64];
        std::snprintf(label, sizeof label, "decode %zu steps (equal=%s)", steps,
                      inc == full ? "yes" : "NO");
        std::printf("%-34s %10.2f %10.2f %7.1fx\n", label, inc_ms, full_ms, full_ms / inc_ms);
    }
    return 0;
}
