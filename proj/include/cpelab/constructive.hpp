#pragma once

#include "cpelab/model.hpp"
#include "cpelab/sequences.hpp"

namespace cpelab {

struct SingleLearnerSpec {
    SeqSpec target;                           // must be eventually periodic
    double eta = 0.1;                         // probability mass leaked off the stored symbol
    Alphabet alphabet = Alphabet::binary();
};

struct FamilyLearnerSpec {
    std::vector<int> periods;                 // distinct, each >= 2
    double sharpness = 20.0;                  // attention and soft-min sharpness
    int max_lag = 0;                          // 0 means 4 * max period
    Alphabet alphabet = Alphabet::binary();
};

struct BuiltLearner {
    TransformerModel model;
    double epsilon = 0.0;  // margin the construction guarantees (or reports)
    int n0 = 1;
};

// One-layer model whose embedding stores the target's next symbol; the output
// is content-independent with an exact margin of (1-eta) - eta/(|alphabet|-1).
BuiltLearner build_single_learner(const SingleLearnerSpec& spec);

// Per candidate period P: one layer fetches the token P back and scores the
// match against the current token, one layer fetches the candidate next token
// at lag P-1; a final uniform-attention layer averages the mismatch flags and
// soft-min selects the candidate whose fetched token feeds the readout. All
// positional information is a one-hot of the clipped relative offset.
BuiltLearner build_family_learner(const FamilyLearnerSpec& spec);

struct LearnabilityWitness {
    bool learned = false;
    double epsilon = 0.0;
    std::uint64_t n0 = 1;
    std::uint64_t horizon = 0;          // N actually scanned
    std::uint64_t first_failing_n = 0;  // valid when refuted
    std::vector<double> margins;        // margin at n0, n0+1, ... (up to failure)
};

// Checks margin(prefix(spec, n)) >= epsilon for every n in [n0, N]; stops at
// the first violation. Finite-horizon surrogate; the horizon is recorded.
LearnabilityWitness verify_eventual_learning(const TransformerModel& model, const SeqSpec& spec,
                                             double epsilon, std::uint64_t n0, std::uint64_t N);

struct FiniteModReport {
    LearnabilityWitness a;
    LearnabilityWitness b;
    bool verdicts_agree = false;
};

// Both specs must differ in finitely many positions (checked symbolically);
// eventual-learnability verdicts must then agree.
FiniteModReport finite_modification_check(const TransformerModel& model, const SeqSpec& spec_a,
                               const SeqSpec& spec_b, double epsilon, std::uint64_t n0,
                               std::uint64_t N);

// True when the two eventually periodic specs have identical tails.
bool finitely_different(const SeqSpec& a, const SeqSpec& b);

}  // namespace cpelab
