#pragma once

#include "cpelab/model.hpp"

namespace cpelab::reference {

// Serial re-derivations of the forward pass, written directly from the layer
// equations with no precomputation, no caching and no parallelism. They exist
// as the oracle the fast kernels are tested against and as the baseline the
// benchmark compares.

std::vector<Vec> layer_forward(const AttentionLayer& layer, const std::vector<Vec>& xs);

Dist transformer_forward(const TransformerModel& model, const TokenSeq& tokens);

// Greedy decode that re-runs the full forward pass on the growing prompt at
// every step.
TokenSeq decode_full_recompute(const TransformerModel& model, const TokenSeq& prompt,
                               std::size_t steps);

}  // namespace cpelab::reference
