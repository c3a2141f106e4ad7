#include "mixdcnn/mixture.hpp"

#include <limits>
#include <ostream>
#include <stdexcept>

#include "mixdcnn/numerics.hpp"

namespace mixdcnn {

ExpertBank make_expert_bank(std::vector<Network> experts) {
    if (experts.empty()) throw std::invalid_argument("ExpertBank: need at least one expert");
    const std::size_t n = experts.front().output_dim();
    for (const Network& e : experts) {
        if (e.output_dim() != n) {
            throw std::invalid_argument("ExpertBank: experts disagree on output dimension");
        }
    }
    return ExpertBank{std::move(experts)};
}

GateNetwork make_gate_network(Network network, std::size_t num_experts) {
    if (network.output_dim() != num_experts) {
        throw std::invalid_argument("GateNetwork: output dim " +
                                    std::to_string(network.output_dim()) + " != K = " +
                                    std::to_string(num_experts));
    }
    return GateNetwork{std::move(network)};
}

ExpertConfidence expert_confidence(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("expert_confidence: empty logits");
    ExpertConfidence r;
    r.argmax = argmax_index(logits);
    r.confidence = logits[r.argmax];
    return r;
}

std::vector<double> occupation_weights(std::span<const double> confidences) {
    return softmax(confidences);
}

std::vector<double> mix_logits(const std::vector<std::vector<double>>& per_expert_logits,
                               std::span<const double> alpha) {
    if (per_expert_logits.empty()) throw std::invalid_argument("mix_logits: no experts");
    if (per_expert_logits.size() != alpha.size()) {
        throw std::invalid_argument("mix_logits: K mismatch between logits and alpha");
    }
    const std::size_t n = per_expert_logits.front().size();
    std::vector<double> mixed(n, 0.0);
    for (std::size_t k = 0; k < per_expert_logits.size(); ++k) {
        if (per_expert_logits[k].size() != n) {
            throw std::invalid_argument("mix_logits: ragged per-expert logits");
        }
        const double a = alpha[k];
        for (std::size_t j = 0; j < n; ++j) mixed[j] += a * per_expert_logits[k][j];
    }
    return mixed;
}

MixtureTrace make_mixture_trace(std::vector<std::vector<double>> per_expert_logits,
                                std::span<const double> forced_alpha) {
    if (per_expert_logits.empty()) throw std::invalid_argument("make_mixture_trace: no experts");
    MixtureTrace trace;
    trace.per_expert_logits = std::move(per_expert_logits);
    const std::size_t k_count = trace.per_expert_logits.size();
    trace.confidences.resize(k_count);
    trace.argmax_index.resize(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        const auto conf = expert_confidence(trace.per_expert_logits[k]);
        trace.confidences[k] = conf.confidence;
        trace.argmax_index[k] = conf.argmax;
    }
    if (forced_alpha.empty()) {
        trace.occupation = occupation_weights(trace.confidences);
    } else {
        if (forced_alpha.size() != k_count) {
            throw std::invalid_argument("make_mixture_trace: forced alpha length != K");
        }
        trace.occupation.assign(forced_alpha.begin(), forced_alpha.end());
    }
    trace.mixed_logits = mix_logits(trace.per_expert_logits, trace.occupation);
    trace.class_probs = softmax(trace.mixed_logits);
    return trace;
}

MixtureTrace mixture_forward(const ExpertBank& bank, const Tensor& sample) {
    std::vector<std::vector<double>> logits;
    logits.reserve(bank.size());
    for (const Network& expert : bank.experts) {
        logits.push_back(expert.forward(sample).values());
    }
    return make_mixture_trace(std::move(logits));
}

std::vector<std::vector<double>> mixture_backward(const MixtureTrace& trace, std::size_t label,
                                                  AlphaGradientMode mode) {
    const std::size_t k_count = trace.num_experts();
    const std::size_t n = trace.num_classes();
    if (label >= n) {
        throw std::invalid_argument("mixture_backward: label " + std::to_string(label) +
                                    " out of range for " + std::to_string(n) + " classes");
    }
    // g_n = d loss / d mixed_logits
    std::vector<double> g = trace.class_probs;
    g[label] -= 1.0;

    std::vector<std::vector<double>> dz(k_count, std::vector<double>(n, 0.0));
    for (std::size_t k = 0; k < k_count; ++k) {
        const double a = trace.occupation[k];
        for (std::size_t j = 0; j < n; ++j) dz[k][j] = a * g[j];
    }
    if (mode == AlphaGradientMode::full) {
        std::vector<double> dalpha(k_count, 0.0);
        for (std::size_t k = 0; k < k_count; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[j] * trace.per_expert_logits[k][j];
            dalpha[k] = acc;
        }
        // softmax Jacobian: dC_k picks up sum_j dalpha_j * alpha_j (delta_jk - alpha_k)
        double weighted = 0.0;
        for (std::size_t j = 0; j < k_count; ++j) weighted += dalpha[j] * trace.occupation[j];
        for (std::size_t k = 0; k < k_count; ++k) {
            const double dC = trace.occupation[k] * (dalpha[k] - weighted);
            dz[k][trace.argmax_index[k]] += dC;
        }
    }
    return dz;
}

std::vector<double> gated_combine(const std::vector<std::vector<double>>& per_expert_probs,
                                  std::span<const double> gate_alpha) {
    if (per_expert_probs.empty()) throw std::invalid_argument("gated_combine: no experts");
    if (per_expert_probs.size() != gate_alpha.size()) {
        throw std::invalid_argument("gated_combine: K mismatch between probs and alpha");
    }
    const std::size_t n = per_expert_probs.front().size();
    std::vector<double> combined(n, 0.0);
    for (std::size_t k = 0; k < per_expert_probs.size(); ++k) {
        if (per_expert_probs[k].size() != n) {
            throw std::invalid_argument("gated_combine: ragged per-expert probabilities");
        }
        const double a = gate_alpha[k];
        for (std::size_t j = 0; j < n; ++j) combined[j] += per_expert_probs[k][j] * a;
    }
    return combined;
}

std::vector<double> ensemble_combine(const std::vector<std::vector<double>>& per_expert_probs) {
    if (per_expert_probs.empty()) throw std::invalid_argument("ensemble_combine: no experts");
    const std::vector<double> uniform(per_expert_probs.size(),
                                      1.0 / static_cast<double>(per_expert_probs.size()));
    return gated_combine(per_expert_probs, uniform);
}

SubsetLabelVector assign_subset_labels(const ExpertBank& bank, std::span<const Tensor> samples) {
    SubsetLabelVector out;
    out.labels.reserve(samples.size());
    for (const Tensor& sample : samples) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_k = 0;
        for (std::size_t k = 0; k < bank.size(); ++k) {
            const auto conf = expert_confidence(bank.experts[k].forward(sample).values());
            if (conf.confidence > best) {
                best = conf.confidence;
                best_k = k;
            }
        }
        out.labels.push_back(static_cast<int>(best_k) + 1);
    }
    return out;
}

void write_trace_line(std::ostream& os, const MixtureTrace& trace) {
    const auto old_precision = os.precision(17);
    os << "C=";
    for (double c : trace.confidences) os << ' ' << c;
    os << " | alpha=";
    for (double a : trace.occupation) os << ' ' << a;
    os << " | mixed=";
    for (double z : trace.mixed_logits) os << ' ' << z;
    os << " | pred= " << argmax_index(trace.class_probs) << '\n';
    os.precision(old_precision);
}

} // namespace mixdcnn
