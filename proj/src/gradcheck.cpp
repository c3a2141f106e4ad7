#include "mixdcnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "mixdcnn/numerics.hpp"

namespace mixdcnn {

namespace {

// Loss after perturbing one per-expert logit entry. In full mode the
// confidences and alpha are recomputed from the perturbed logits; in stopped
// mode alpha is frozen at the base point.
double mixture_loss(const std::vector<std::vector<double>>& logits, std::size_t label,
                    AlphaGradientMode mode, std::span<const double> frozen_alpha) {
    MixtureTrace trace = mode == AlphaGradientMode::full
                             ? make_mixture_trace(logits)
                             : make_mixture_trace(logits, frozen_alpha);
    return cross_entropy(trace.mixed_logits, label).loss;
}

bool has_argmax_tie(const std::vector<std::vector<double>>& logits, double margin) {
    for (const auto& row : logits) {
        if (row.size() < 2) continue;
        std::vector<double> sorted = row;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        if (sorted[0] - sorted[1] <= margin) return true;
    }
    return false;
}

} // namespace

GradcheckResult run_gradcheck(const GradcheckOptions& options) {
    std::mt19937_64 rng(options.seed);

    GradcheckResult result;
    std::size_t done = 0;
    while (done < options.trials) {
        // random small bank on a random sample; the finite differences below
        // perturb the resulting per-expert logits
        std::uniform_int_distribution<std::size_t> k_dist(1, options.max_experts);
        std::uniform_int_distribution<std::size_t> n_dist(2, options.max_classes);
        const std::size_t k_count = k_dist(rng);
        const std::size_t n = n_dist(rng);
        const std::size_t input_dim = 4;
        std::vector<Network> experts;
        experts.reserve(k_count);
        for (std::size_t k = 0; k < k_count; ++k) {
            experts.push_back(build_mlp(input_dim, {6}, n, rng()));
        }
        const ExpertBank bank = make_expert_bank(std::move(experts));
        std::uniform_real_distribution<double> coord(-2.0, 2.0);
        std::vector<double> x(input_dim);
        for (double& v : x) v = coord(rng);
        const Tensor sample = Tensor::vector(std::move(x));
        std::vector<std::vector<double>> logits;
        logits.reserve(k_count);
        for (const Network& expert : bank.experts) {
            logits.push_back(expert.forward(sample).values());
        }
        std::uniform_int_distribution<std::size_t> label_dist(0, n - 1);
        const std::size_t label = label_dist(rng);

        if (has_argmax_tie(logits, options.tie_margin)) {
            result.ties_resampled++;
            continue;
        }
        ++done;

        const MixtureTrace trace = make_mixture_trace(logits);
        for (const AlphaGradientMode mode :
             {AlphaGradientMode::full, AlphaGradientMode::stopped}) {
            if (mode == AlphaGradientMode::full && !options.check_full) continue;
            if (mode == AlphaGradientMode::stopped && !options.check_stopped) continue;

            auto analytic = mixture_backward(trace, label, mode);
            if (options.corrupt_by != 0.0) analytic[0][0] += options.corrupt_by;

            double& max_err = mode == AlphaGradientMode::full ? result.max_rel_error_full
                                                              : result.max_rel_error_stopped;
            for (std::size_t k = 0; k < k_count; ++k) {
                for (std::size_t j = 0; j < n; ++j) {
                    auto perturbed = logits;
                    perturbed[k][j] = logits[k][j] + options.step;
                    const double up = mixture_loss(perturbed, label, mode, trace.occupation);
                    perturbed[k][j] = logits[k][j] - options.step;
                    const double down = mixture_loss(perturbed, label, mode, trace.occupation);
                    const double numeric = (up - down) / (2.0 * options.step);
                    const double denom =
                        std::max({std::abs(analytic[k][j]), std::abs(numeric), 1e-3});
                    max_err = std::max(max_err, std::abs(analytic[k][j] - numeric) / denom);
                }
            }
        }
    }
    result.passed = (!options.check_full || result.max_rel_error_full <= options.tolerance) &&
                    (!options.check_stopped || result.max_rel_error_stopped <= options.tolerance);
    return result;
}

void print_gradcheck_result(std::ostream& os, const GradcheckOptions& options,
                            const GradcheckResult& result) {
    const auto old_precision = os.precision(6);
    if (options.check_full) {
        os << "mode full: max relative error " << result.max_rel_error_full << " over "
           << options.trials << " triples (tolerance " << options.tolerance << ")\n";
    }
    if (options.check_stopped) {
        os << "mode stopped: max relative error " << result.max_rel_error_stopped << " over "
           << options.trials << " triples (tolerance " << options.tolerance << ")\n";
    }
    os << "argmax ties resampled: " << result.ties_resampled << "\n";
    os << (result.passed ? "gradcheck PASS" : "gradcheck FAIL") << "\n";
    os.precision(old_precision);
}

} // namespace mixdcnn
