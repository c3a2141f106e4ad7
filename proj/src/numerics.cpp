#include "mixdcnn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mixdcnn/errors.hpp"

namespace mixdcnn {

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    const double shift = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - shift);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    return out;
}

std::size_t argmax_index(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax_index: empty input");
    return static_cast<std::size_t>(
        std::max_element(values.begin(), values.end()) - values.begin());
}

CrossEntropyResult cross_entropy(std::span<const double> logits, std::size_t label) {
    if (logits.empty()) throw std::invalid_argument("cross_entropy: empty logits");
    if (label >= logits.size()) {
        throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                    " out of range for " + std::to_string(logits.size()) +
                                    " classes");
    }
    CrossEntropyResult r;
    const double shift = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    r.probs.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        r.probs[i] = std::exp(logits[i] - shift);
        denom += r.probs[i];
    }
    for (double& v : r.probs) v /= denom;
    // loss = log sum exp(z) - z[label], evaluated with the same shift
    r.loss = std::log(denom) + shift - logits[label];
    r.grad = r.probs;
    r.grad[label] -= 1.0;
    return r;
}

void sgd_step(Parameter& param, double learning_rate) {
    if (learning_rate <= 0.0) throw std::invalid_argument("sgd_step: learning rate must be positive");
    if (!param.grad.all_finite()) {
        throw DivergenceError("sgd_step: non-finite gradient in parameter '" + param.name + "'");
    }
    auto& v = param.value.values();
    auto& g = param.grad.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * g[i];
    param.zero_grad();
}

void sgd_step(std::span<Parameter* const> params, double learning_rate) {
    for (Parameter* p : params) sgd_step(*p, learning_rate);
}

} // namespace mixdcnn
