#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpelab/numeric.hpp"
#include "cpelab/rng.hpp"
#include "cpelab/sequences.hpp"

namespace cpelab {

struct Matrix {
    int rows = 0;
    int cols = 0;
    Vec data;  // row-major

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    bool empty() const { return data.empty(); }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

Vec matvec(const Matrix& m, const Vec& x);

// ---------------------------------------------------------------------------
// positional encodings p(i, j), all with values inside a fixed bounded region

enum class PeKind { Sinusoidal, RotaryRelative, TableBounded, ConstantZero };

struct PositionalEncoding {
    PeKind kind = PeKind::ConstantZero;
    int dim = 0;
    double declared_bound = 0.0;  // l-inf bound on every p(i, j)
    int clip = 512;               // relative offsets beyond this share one value
    std::vector<Vec> table;       // TableBounded: entry per clipped offset

    // 1-based positions, i <= j.
    Vec at(std::uint64_t i, std::uint64_t j) const;

    static PositionalEncoding sinusoidal(int dim);
    static PositionalEncoding rotary_relative(int dim, int clip = 512);
    static PositionalEncoding table_one_hot_offset(int clip);  // dim = clip + 2
    static PositionalEncoding constant_zero(int dim);
};

// ---------------------------------------------------------------------------
// weight functions w(x_i, x_j, p(i,j)) -> (0, inf); x_j holds the query

enum class WeightKind { ConstantOne, DotProductExp, DotProductExpRotary, SsmaxScaled, OffsetExp };

// Scores are clamped to this band before exponentiation so the codomain stays
// inside (0, inf) in finite arithmetic.
inline constexpr double kScoreClamp = 80.0;

struct WeightFunction {
    WeightKind kind = WeightKind::ConstantOne;
    Matrix wq, wk;               // dot-product kinds
    double ssmax_scale = 1.0;    // s in the (s log n) logit scaling
    int target_offset = 0;       // OffsetExp: index probed in the one-hot p
    double sharpness = 20.0;     // OffsetExp: score at the probed offset

    // Length-aware kinds depend on the query position and sit outside the
    // plain attention-layer model.
    bool length_aware() const { return kind == WeightKind::SsmaxScaled; }

    // Pure three-argument form straight from the definition; query_pos is the
    // 1-based position of x_j (used only by length-aware kinds).
    double eval(const Vec& key_x, const Vec& query_x, const Vec& p,
                std::uint64_t query_pos) const;

    // score such that w = exp(clamp(score)); precomputed q = wq*x_j, k = wk*x_i.
    double score_from_qk(const Vec& q, const Vec& k, const Vec& p,
                         std::uint64_t query_pos) const;
};

// ---------------------------------------------------------------------------

struct ValueFn {
    Matrix m;
    Vec bias;  // empty means zero

    Vec apply(const Vec& x) const;
};

// activation F(a, x) -> next state
enum class ActKind {
    PassThrough,    // a
    Residual,       // a + x
    ResidualMlp,    // h = a + x; h + W2 tanh(W1 ln(h) + b1) + b2
    FetchCompare,   // copy a's token block into the state; record a mismatch flag
    FamilySelect,   // soft-min over per-candidate mismatch rates; emit the winner's token
};

struct Activation {
    ActKind kind = ActKind::Residual;

    // ResidualMlp
    Matrix w1, w2;
    Vec b1, b2;
    bool layer_norm = false;  // normalization inside F adds 1e-5 to the denominator

    // FetchCompare / FamilySelect block layout (all offsets into the state vector)
    int token_block = 0;
    int token_dim = 0;
    int fetch_block = -1;     // where the fetched token one-hot lands (or -1)
    int mismatch_index = -1;  // scalar slot for the mismatch flag (or -1)
    int pos_block = -1;       // clipped-position one-hot block
    int pos_dim = 0;
    int valid_lag = 0;        // mismatch forced to 0 at positions <= valid_lag

    // FamilySelect
    double select_sharpness = 20.0;
    std::vector<int> rate_indices;  // mismatch-rate coordinates read from a
    std::vector<int> cand_blocks;   // fetched-candidate blocks read from x

    Vec apply(const Vec& a, const Vec& x) const;
};

struct AttentionLayer {
    PositionalEncoding pe;
    WeightFunction weight;
    ValueFn value;
    Activation act;
};

// ---------------------------------------------------------------------------

enum class EmbKind { TokenTable, NextSymbolOneHot, FamilyState };

struct Embedding {
    EmbKind kind = EmbKind::TokenTable;
    int dim = 0;
    double declared_bound = 1.0;

    Matrix table;  // TokenTable: one row per token

    SeqSpec target;     // NextSymbolOneHot: e(sigma, i) = one-hot of target[i+1]
    int token_dim = 0;  // NextSymbolOneHot / FamilyState

    int pos_block = -1;  // FamilyState: one-hot of min(i, pos_dim - 1)
    int pos_dim = 0;

    Vec at(Token t, std::uint64_t pos) const;
};

enum class ReadoutKind { AffineSoftmax, ConstantDist, Lookup };

struct Readout {
    ReadoutKind kind = ReadoutKind::AffineSoftmax;
    Matrix w;
    Vec b;
    Vec constant;               // ConstantDist probabilities
    std::vector<Vec> centers;   // Lookup: nearest center by l-inf, ties to lowest index
    std::vector<Vec> dists;

    Vec logits(const Vec& y) const;  // AffineSoftmax only
    Dist apply(const Vec& y) const;
};

struct TransformerModel {
    Alphabet alphabet;
    int dim = 0;
    Embedding embedding;
    std::vector<AttentionLayer> layers;
    Readout readout;
};

// ---------------------------------------------------------------------------
// forward passes (OpenMP over positions; bitwise equal to the serial reference)

struct ForwardStats {
    long clamp_hits = 0;
};

std::vector<Vec> layer_forward(const AttentionLayer& layer, const std::vector<Vec>& xs,
                               ForwardStats* stats = nullptr);

std::vector<Vec> embed_all(const TransformerModel& model, const TokenSeq& tokens);

// Output distribution after the final token.
Dist transformer_forward(const TransformerModel& model, const TokenSeq& tokens);

// Readout at every position (position j sees only tokens 1..j).
std::vector<Dist> transformer_all_dists(const TransformerModel& model, const TokenSeq& tokens);

// ---------------------------------------------------------------------------
// incremental decoding; caches per-layer states, recomputes attention weights
// per step (they depend on the query position)

class DecodeState {
public:
    DecodeState(const TransformerModel& model, const TokenSeq& prompt);

    void push(Token t);
    std::size_t length() const { return length_; }
    const Vec& last_state() const;  // final-layer output at the last position
    Dist last_dist() const;

private:
    void append_column(Token t);

    const TransformerModel* model_;
    std::size_t length_ = 0;
    // states_[0] = embeddings; states_[l] = outputs of layer l
    std::vector<std::vector<Vec>> states_;
    // cached keys (wk * x) and values per layer for dot-product kinds
    std::vector<std::vector<Vec>> keys_;
    std::vector<std::vector<Vec>> values_;
};

struct DecodeMode {
    bool greedy = true;
    double temperature = 1.0;
    RngStream rng;

    static DecodeMode greedy_mode() { return {}; }
    static DecodeMode sampled(double temperature, RngStream rng) {
        return {false, temperature, rng};
    }
};

TokenSeq decode_autoregressive(const TransformerModel& model, const TokenSeq& prompt,
                               std::size_t steps, DecodeMode mode = DecodeMode::greedy_mode());

// ---------------------------------------------------------------------------

struct CompactnessReport {
    double max_embedding_norm = 0.0;
    double embedding_bound = 0.0;
    double max_pe_norm = 0.0;
    double pe_bound = 0.0;
    bool pass = false;
};

CompactnessReport check_compactness(const TransformerModel& model, std::uint64_t horizon);

// ---------------------------------------------------------------------------

struct RandomModelOptions {
    int dim = 16;
    int num_layers = 2;
    std::size_t alphabet_size = 2;
    PeKind pe = PeKind::RotaryRelative;
    WeightKind weight = WeightKind::DotProductExpRotary;
    ActKind act = ActKind::ResidualMlp;
    double init_scale = 1.0;
    double ssmax_scale = 1.0;
    int clip = 512;
};

TransformerModel make_random_model(const RandomModelOptions& opts, RngStream& rng);

}  // namespace cpelab
