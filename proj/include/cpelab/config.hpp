#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cpelab/constructive.hpp"
#include "cpelab/remote.hpp"
#include "cpelab/serialize.hpp"
#include "cpelab/trainer.hpp"

namespace cpelab {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModelSource {
    enum class Kind { ConstructSingle, ConstructFamily, File, Remote };
    Kind kind = Kind::ConstructSingle;
    SingleLearnerSpec single;
    FamilyLearnerSpec family;
    std::string file;
    EndpointConfig remote;
};

// Union of every subcommand's parameters; normalize() fills the documented
// defaults for the chosen experiment.
struct ExperimentConfig {
    std::string experiment;
    std::optional<std::uint64_t> seed;
    std::optional<ModelSource> model;

    std::vector<double> gammas;
    std::size_t samples = 100;
    std::size_t length = 190;
    std::size_t steps = 505;

    std::vector<int> p_values;
    std::vector<int> r_values;
    int p_max = 40;
    int r = 10;

    std::vector<std::size_t> n_values;
    std::size_t n = 256;

    std::vector<int> k_values;
    std::uint64_t horizon = 2000;
    double epsilon = 0.8;
    std::uint64_t n0 = 1;

    std::vector<std::pair<double, double>> shapes;
    double positional_gamma = 0.1;

    SeqSpec spec = SeqSpec::constant_of(0);
    bool spec_given = false;

    std::vector<std::pair<std::string, std::string>> pairs;
    std::string pairs_file;

    struct PairInit {
        int dim = 16;
        int num_layers = 2;
        double init_scale = 1.0;
        double ssmax_scale = 1.0;
    } pair_init;

    TrainableConfig train;
    bool train_given = false;

    std::string model_out;  // construct/train: extra copy of the model document
};

// "constant0", "periodic:001", "evper:111:0", "increasing", "powers2",
// "squares", "primes" — or a full sequence-spec JSON object.
SeqSpec parse_seqspec_shorthand(const std::string& text);
SeqSpec parse_seqspec_field(const Json& j);

ExperimentConfig config_from_json(const Json& j);
ExperimentConfig load_config(const std::string& path);

// Fully-populated document; reloading it yields an identical configuration.
Json effective_json(const ExperimentConfig& config);

extern const std::vector<double> kDefaultGammas;

}  // namespace cpelab
