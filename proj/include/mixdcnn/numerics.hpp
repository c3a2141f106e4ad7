#ifndef MIXDCNN_NUMERICS_HPP
#define MIXDCNN_NUMERICS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "mixdcnn/tensor.hpp"

namespace mixdcnn {

/// Max-shifted softmax: exp(z_i - max z) / sum_j exp(z_j - max z).
/// Entries land in (0,1] and sum to 1 within 1e-12 for finite input.
std::vector<double> softmax(std::span<const double> logits);

/// Index of the largest entry; lowest index wins ties.
std::size_t argmax_index(std::span<const double> values);

struct CrossEntropyResult {
    double loss = 0.0;                // -log softmax(logits)[label], via log-sum-exp
    std::vector<double> grad;         // softmax(logits) - one_hot(label)
    std::vector<double> probs;        // softmax(logits), reused by callers
};

/// Cross-entropy of softmax(logits) against an integer label in [0, N).
CrossEntropyResult cross_entropy(std::span<const double> logits, std::size_t label);

/// value <- value - lr * grad, then grad <- 0. Throws DivergenceError naming
/// the parameter if any gradient entry is non-finite. Gradients are expected
/// to already be averaged over the mini-batch.
///
/// Note: two consecutive steps equal one step with summed gradients only when
/// the values are frozen between steps; once the second gradient is evaluated
/// at the updated values this linearity no longer holds.
void sgd_step(Parameter& param, double learning_rate);
void sgd_step(std::span<Parameter* const> params, double learning_rate);

} // namespace mixdcnn

#endif
