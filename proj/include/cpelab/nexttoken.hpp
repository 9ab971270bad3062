#pragma once

#include <memory>

#include "cpelab/model.hpp"

namespace cpelab {

struct NextTokenOutcome {
    Dist dist;
    Token greedy = 0;     // ties resolved toward the lowest token index
    double margin = 0.0;  // top-1 minus top-2 probability
};

// Incremental decoding handle; one session per autoregressive run.
class DecodeSession {
public:
    virtual ~DecodeSession() = default;
    virtual NextTokenOutcome current() = 0;
    virtual void push(Token t) = 0;
};

// Prompt -> next-token distribution. Local models return the full distribution;
// adapters over remote endpoints may return a partial one with a catch-all
// bucket. Implementations must be safe to call from multiple threads.
class NextTokenModel {
public:
    virtual ~NextTokenModel() = default;
    virtual const Alphabet& alphabet() const = 0;
    virtual NextTokenOutcome next(const TokenSeq& tokens) = 0;

    // Tokens the session accepts via push(); everything else ends the decode.
    virtual bool pushable(Token t) const { return alphabet().contains(t); }

    virtual std::unique_ptr<DecodeSession> session(const TokenSeq& prompt);
};

class LocalModel : public NextTokenModel {
public:
    explicit LocalModel(TransformerModel model) : model_(std::move(model)) {}

    const Alphabet& alphabet() const override { return model_.alphabet; }
    const TransformerModel& model() const { return model_; }

    NextTokenOutcome next(const TokenSeq& tokens) override;
    std::unique_ptr<DecodeSession> session(const TokenSeq& prompt) override;

private:
    TransformerModel model_;
};

NextTokenOutcome outcome_from_dist(Dist d);

}  // namespace cpelab
