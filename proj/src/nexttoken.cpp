#include "cpelab/nexttoken.hpp"

namespace cpelab {

NextTokenOutcome outcome_from_dist(Dist d) {
    ArgmaxResult am = argmax_with_margin(d);
    return {std::move(d), static_cast<Token>(am.index), am.margin};
}

namespace {

// Fallback session: re-evaluates the full prompt each step.
class RequerySession : public DecodeSession {
public:
    RequerySession(NextTokenModel& model, TokenSeq prompt)
        : model_(&model), tokens_(std::move(prompt)) {}

    NextTokenOutcome current() override { return model_->next(tokens_); }
    void push(Token t) override { tokens_.push_back(t); }

private:
    NextTokenModel* model_;
    TokenSeq tokens_;
};

class LocalSession : public DecodeSession {
public:
    LocalSession(const TransformerModel& model, const TokenSeq& prompt)
        : state_(model, prompt) {}

    NextTokenOutcome current() override { return outcome_from_dist(state_.last_dist()); }
    void push(Token t) override { state_.push(t); }

private:
    DecodeState state_;
};

}  // namespace

std::unique_ptr<DecodeSession> NextTokenModel::session(const TokenSeq& prompt) {
    return std::make_unique<RequerySession>(*this, prompt);
}

NextTokenOutcome LocalModel::next(const TokenSeq& tokens) {
    return outcome_from_dist(transformer_forward(model_, tokens));
}

std::unique_ptr<DecodeSession> LocalModel::session(const TokenSeq& prompt) {
    return std::make_unique<LocalSession>(model_, prompt);
}

}  // namespace cpelab
