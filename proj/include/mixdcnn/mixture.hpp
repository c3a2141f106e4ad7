#ifndef MIXDCNN_MIXTURE_HPP
#define MIXDCNN_MIXTURE_HPP

#include <iosfwd>
#include <span>
#include <vector>

#include "mixdcnn/network.hpp"
#include "mixdcnn/tensor.hpp"

namespace mixdcnn {

/// K expert networks with identical output arity. Expert order is stable;
/// expert k corresponds to subset index k+1 in partition files.
struct ExpertBank {
    std::vector<Network> experts;

    std::size_t size() const { return experts.size(); }
    std::size_t output_dim() const { return experts.empty() ? 0 : experts.front().output_dim(); }
};

ExpertBank make_expert_bank(std::vector<Network> experts);

/// Per-sample record of the full mixing computation: per-expert logits,
/// confidences C_k = max_n z_{k,n}, occupation weights alpha = softmax(C),
/// mixed logits z_n = sum_k alpha_k z_{k,n}, and class_probs = softmax(z).
struct MixtureTrace {
    std::vector<std::vector<double>> per_expert_logits;  // K x N
    std::vector<double> confidences;                     // K
    std::vector<std::size_t> argmax_index;               // K, 0-based class index
    std::vector<double> occupation;                      // K
    std::vector<double> mixed_logits;                    // N
    std::vector<double> class_probs;                     // N

    std::size_t num_experts() const { return per_expert_logits.size(); }
    std::size_t num_classes() const { return mixed_logits.size(); }
};

/// Gate network producing K routing logits; softmax of its output is the
/// occupation distribution used by the gated combiner.
struct GateNetwork {
    Network network;
};

GateNetwork make_gate_network(Network network, std::size_t num_experts);

/// Most-confident-expert label per training sample, 1-based in 1..K.
struct SubsetLabelVector {
    std::vector<int> labels;
    std::size_t count() const { return labels.size(); }
};

/// (C, argmax): the maximum logit and the smallest 0-based index attaining it.
struct ExpertConfidence {
    double confidence = 0.0;
    std::size_t argmax = 0;
};

ExpertConfidence expert_confidence(std::span<const double> logits);

/// Occupation probabilities: max-shifted softmax over the K confidences.
std::vector<double> occupation_weights(std::span<const double> confidences);

/// mixed[n] = sum_k alpha[k] * logits[k][n].
std::vector<double> mix_logits(const std::vector<std::vector<double>>& per_expert_logits,
                               std::span<const double> alpha);

/// Builds the full trace from per-expert logits. When `forced_alpha` is
/// non-empty it replaces the confidence-derived occupation weights
/// (diagnostic mode; confidences and argmaxes are still recorded).
MixtureTrace make_mixture_trace(std::vector<std::vector<double>> per_expert_logits,
                                std::span<const double> forced_alpha = {});

/// Runs every expert on `sample` and mixes the resulting logits.
MixtureTrace mixture_forward(const ExpertBank& bank, const Tensor& sample);

enum class AlphaGradientMode {
    full,      // gradient flows through alpha into the confidences
    stopped,   // alpha treated as a constant
};

/// d loss / d z_{k,n} for cross-entropy on the mixed prediction. With
/// g_n = class_probs[n] - one_hot(label):
///   full:    alpha_k * g_n + [n == argmax_k] * dL/dC_k,
///            dL/dalpha_j = sum_n g_n z_{j,n},
///            dL/dC_k = sum_j dL/dalpha_j * alpha_j * (delta_jk - alpha_k)
///   stopped: alpha_k * g_n only.
/// The max in C_k routes its subgradient entirely to the argmax entry.
std::vector<std::vector<double>> mixture_backward(const MixtureTrace& trace, std::size_t label,
                                                  AlphaGradientMode mode = AlphaGradientMode::full);

/// Gated combination: c[n] = sum_k per_expert_probs[k][n] * gate_alpha[k].
std::vector<double> gated_combine(const std::vector<std::vector<double>>& per_expert_probs,
                                  std::span<const double> gate_alpha);

/// Equal-weight combination; identical to gated_combine with uniform 1/K.
std::vector<double> ensemble_combine(const std::vector<std::vector<double>>& per_expert_probs);

/// Assigns each sample to its most confident expert (1-based; lowest index
/// wins ties).
SubsetLabelVector assign_subset_labels(const ExpertBank& bank, std::span<const Tensor> samples);

/// One diagnostic record per line: confidence vector, occupation vector,
/// mixed logits, predicted class.
void write_trace_line(std::ostream& os, const MixtureTrace& trace);

} // namespace mixdcnn

#endif
