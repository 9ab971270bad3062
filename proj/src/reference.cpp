#include "cpelab/reference.hpp"

namespace cpelab::reference {

std::vector<Vec> layer_forward(const AttentionLayer& layer, const std::vector<Vec>& xs) {
    if (xs.empty()) throw std::invalid_argument("reference::layer_forward: empty input");
    const std::size_t n = xs.size();
    std::vector<Vec> ys(n);
    for (std::size_t j = 1; j <= n; ++j) {
        Vec num(xs[0].size(), 0.0);
        double den = 0.0;
        for (std::size_t i = 1; i <= j; ++i) {
            double w = layer.weight.eval(xs[i - 1], xs[j - 1], layer.pe.at(i, j), j);
            Vec v = layer.value.apply(xs[i - 1]);
            den += w;
            for (std::size_t c = 0; c < num.size(); ++c) num[c] += w * v[c];
        }
        for (std::size_t c = 0; c < num.size(); ++c) num[c] /= den;
        ys[j - 1] = layer.act.apply(num, xs[j - 1]);
    }
    return ys;
}

Dist transformer_forward(const TransformerModel& model, const TokenSeq& tokens) {
    if (tokens.empty())
        throw std::invalid_argument("reference::transformer_forward: empty prompt");
    std::vector<Vec> xs;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!model.alphabet.contains(tokens[i]))
            throw std::invalid_argument("token outside alphabet");
        xs.push_back(model.embedding.at(tokens[i], i + 1));
    }
    for (const AttentionLayer& layer : model.layers) xs = reference::layer_forward(layer, xs);
    return model.readout.apply(xs.back());
}

TokenSeq decode_full_recompute(const TransformerModel& model, const TokenSeq& prompt,
                               std::size_t steps) {
    TokenSeq full = prompt;
    TokenSeq generated;
    for (std::size_t s = 0; s < steps; ++s) {
        Dist d = reference::transformer_forward(model, full);
        auto next = static_cast<Token>(argmax_with_margin(d).index);
        generated.push_back(next);
        full.push_back(next);
    }
    return generated;
}

}  // namespace cpelab::reference
