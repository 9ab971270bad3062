#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpelab/constructive.hpp"
#include "cpelab/nexttoken.hpp"
#include "cpelab/sequences.hpp"

namespace cpelab {

// Number of perturbed positions at perturbation fraction gamma over a prompt
// of the given length (the final position is never perturbed).
std::size_t nts_perturb_count(double gamma, std::size_t length);

struct NtsRow {
    double gamma = 0.0;
    std::size_t perturb_count = 0;
    std::size_t samples = 0;
    std::size_t nts = 0;  // samples whose greedy next token differs from the base's
    Token base_next = 0;
    std::vector<Token> sample_next;
    std::vector<std::vector<std::size_t>> sample_positions;  // 1-based, per sample
};

struct NtsResult {
    std::vector<NtsRow> rows;
    std::size_t length = 0;
    std::uint64_t seed = 0;
};

// Next-token sensitivity around the all-zero prompt: perturb count positions
// uniformly at random (never the last), count diverging greedy predictions.
NtsResult nts_zero(NextTokenModel& model, const std::vector<double>& gammas,
                   std::size_t samples, std::size_t length, std::uint64_t seed);

struct NtsPositionalRow {
    double u = 1.0, v = 1.0;
    NtsRow nts;
};

struct NtsPositionalResult {
    std::vector<NtsPositionalRow> rows;
    std::size_t length = 0;
    std::uint64_t seed = 0;
};

inline std::vector<std::pair<double, double>> default_betabinomial_shapes() {
    return {{1, 1}, {2, 2}, {5, 5}, {0.5, 0.5}, {1, 3}, {1, 8}, {3, 1}, {8, 1}};
}

// Same protocol with perturbed positions drawn from a Beta-Binomial over the
// non-final positions, biasing them toward the start, middle or end.
NtsPositionalResult nts_positional(NextTokenModel& model,
                                   const std::vector<std::pair<double, double>>& shapes,
                                   double gamma, std::size_t samples, std::size_t length,
                                   std::uint64_t seed);

struct PeriodicCell {
    int p = 0;
    int r = 0;
    std::size_t steps = 0;
    bool success = false;
    double certainty = 0.0;   // top-1 minus top-2 margin where the first 1 is due
    long first_mismatch = -1; // 1-based generated step; -1 when none
    TokenSeq generated;
};

struct PeriodicResult {
    std::vector<PeriodicCell> cells;
    std::uint64_t seed = 0;
};

// Greedy continuation of (0^{p-1}1)^r 0 checked against the exact periodic
// continuation for `steps` autoregressive steps.
PeriodicResult periodic_eval(NextTokenModel& model, const std::vector<int>& p_values,
                             const std::vector<int>& r_values, std::size_t steps,
                             std::uint64_t seed);

struct CriticalPeriodResult {
    std::optional<int> p_star;  // smallest failing period, if any
    std::vector<PeriodicCell> cells;
    std::uint64_t seed = 0;
};

CriticalPeriodResult critical_period(NextTokenModel& model, int r, int p_max, std::size_t steps,
                                     std::uint64_t seed);

struct ModulusCell {
    double gamma = 0.0;
    std::size_t n = 0;
    std::size_t perturb_count = 0;
    double realized_distance = 0.0;
    double d_max = 0.0;  // max over samples of the l-inf output distance
};

struct ModulusTable {
    std::vector<ModulusCell> cells;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
};

// D(gamma, n) = max over same-last-token pairs at relative distance ~gamma of
// the output distance. Perturbation sets are nested across gammas per sample,
// making rows non-decreasing per seed in practice.
ModulusTable continuity_modulus(NextTokenModel& model, const std::vector<double>& gammas,
                                const std::vector<std::size_t>& ns, std::size_t samples,
                                std::uint64_t seed,
                                const SeqSpec& base = SeqSpec::constant_of(0));

// Minimal delta such that ||xs[i] - ys[i]|| <= delta for at least (1-delta)n
// positions; closed form over sorted per-position distances.
double sim_measure(const std::vector<Vec>& xs, const std::vector<Vec>& ys);

struct CollapseRow {
    double gamma = 0.0;
    std::size_t perturb_count = 0;
    std::size_t samples = 0;
    double agreement = 0.0;  // fraction of perturbed prompts predicting the true next symbol
};

struct CollapseResult {
    std::vector<CollapseRow> rows;
    std::size_t n = 0;
    bool precondition_warning = false;  // model did not verify as learning the spec
    std::uint64_t seed = 0;
};

CollapseResult collapse_probe(NextTokenModel& model, const SeqSpec& spec,
                              const std::vector<double>& gammas, std::size_t samples,
                              std::size_t n, std::uint64_t seed);

struct IsolationRow {
    int k = 0;
    bool refuted = false;
    std::uint64_t first_failing_n = 0;
};

struct IsolationReport {
    bool precondition_ok = false;  // the model verifies as learning the all-0 sequence
    std::vector<IsolationRow> rows;
    double epsilon = 0.0;
    std::uint64_t n0 = 1;
    std::uint64_t horizon = 0;
};

// A model that learns the all-0 sequence is checked against (0^{k-1}1)^w for
// each k; every in-ball k must be refuted at a finite index.
IsolationReport isolation_demo(const TransformerModel& model, const std::vector<int>& ks,
                               std::uint64_t horizon, double epsilon, std::uint64_t n0);

struct SsmaxCompareRow {
    double gamma = 0.0;
    std::size_t perturb_count = 0;
    std::size_t samples = 0;
    std::size_t nts_softmax = 0;
    std::size_t nts_ssmax = 0;
};

struct SsmaxCompareResult {
    std::vector<SsmaxCompareRow> rows;
    double mean_diff = 0.0;  // mean over gammas of nts_ssmax - nts_softmax
    std::uint64_t seed = 0;
};

struct SsmaxPairOptions {
    int dim = 16;
    int num_layers = 2;
    double ssmax_scale = 1.0;
    double init_scale = 1.0;
    std::uint64_t init_seed = 1;
};

// Two models identical except for the weight-function kind.
std::pair<TransformerModel, TransformerModel> make_ssmax_pair(const SsmaxPairOptions& opts);

// Throws unless the models differ only in the weight-function kind
// (dot-product-exp vs ssmax-scaled with identical matrices).
void validate_ssmax_pair(const TransformerModel& softmax_model,
                         const TransformerModel& ssmax_model);

SsmaxCompareResult ssmax_compare(const TransformerModel& softmax_model,
                                 const TransformerModel& ssmax_model,
                                 const std::vector<double>& gammas, std::size_t samples,
                                 std::size_t length, std::uint64_t seed);

// --- CSV renderings (one fixed schema per experiment) ----------------------

std::string nts_csv(const NtsResult& r, const Alphabet& alphabet);
std::string nts_positional_csv(const NtsPositionalResult& r, const Alphabet& alphabet);
std::string periodic_csv(const PeriodicResult& r, const Alphabet& alphabet);
std::string critical_period_csv(const CriticalPeriodResult& r, const Alphabet& alphabet);
std::string modulus_csv(const ModulusTable& r);
std::string collapse_csv(const CollapseResult& r);
std::string isolation_csv(const IsolationReport& r);
std::string ssmax_compare_csv(const SsmaxCompareResult& r);

}  // namespace cpelab
