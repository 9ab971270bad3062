#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cpelab/model.hpp"
#include "cpelab/sequences.hpp"

namespace cpelab {

struct TrainableConfig {
    int dim = 32;
    int num_layers = 2;
    PeKind pe = PeKind::RotaryRelative;  // rotary pairs with the rotary weight kind
    int rotary_clip = 64;
    int context = 96;   // window length; loss runs over the context-1 shifted targets
    int batch = 12;
    int steps = 3000;
    double lr = 3e-4;
    std::string optimizer = "adam";  // "adam" | "sgd"
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double init_scale = 1.0;
    std::uint64_t seed = 1;
    std::uint64_t window_horizon = 4096;  // sampled window offsets live in [0, horizon)
    std::vector<std::pair<SeqSpec, double>> mixture;
};

// One token matrix; column j+1 is the training target for column j.
struct Batch {
    std::vector<TokenSeq> examples;
};

Batch make_batch(const TrainableConfig& config, std::uint64_t step, RngStream root);

TransformerModel init_trainable_model(const TrainableConfig& config);

// Named views into every trainable tensor, in a fixed order.
struct ParamRef {
    std::string name;
    double* data;
    std::size_t size;
};

std::vector<ParamRef> trainable_params(TransformerModel& model);

// Flat per-parameter gradients, aligned with trainable_params order.
using GradientRecord = std::vector<Vec>;

double loss_next_token(const TransformerModel& model, const Batch& batch);

struct GradResult {
    GradientRecord grads;
    double loss = 0.0;
    long clamp_hits = 0;  // score clamp activations (their subgradient is 0)
};

GradResult grad(const TransformerModel& model, const Batch& batch);

struct TrainOutcome {
    TransformerModel model;
    std::vector<double> losses;  // pre-update loss per step
    long clamp_hits = 0;
};

class TrainDivergence : public std::runtime_error {
public:
    explicit TrainDivergence(const std::string& what) : std::runtime_error(what) {}
};

// Seeded minibatch descent over windows sampled from the mixture; bitwise
// reproducible for a fixed (seed, config) on the same build.
TrainOutcome train(const TrainableConfig& config);

}  // namespace cpelab
