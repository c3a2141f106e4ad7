#ifndef MIXDCNN_GRADCHECK_HPP
#define MIXDCNN_GRADCHECK_HPP

#include <cstdint>
#include <iosfwd>

#include "mixdcnn/mixture.hpp"

namespace mixdcnn {

/// Finite-difference verification of mixture_backward on random per-expert
/// logit matrices. Triples whose argmax margin falls below `tie_margin` are
/// resampled and counted, never checked.
struct GradcheckOptions {
    std::uint64_t seed = 7;
    std::size_t trials = 200;          // tie-free triples per mode
    std::size_t max_experts = 5;       // K drawn from 1..max_experts
    std::size_t max_classes = 7;       // N drawn from 2..max_classes
    double step = 1e-5;                // central difference step
    double tolerance = 1e-5;           // max relative error accepted
    double tie_margin = 1e-3;          // required gap between top-two logits per expert
    bool check_full = true;
    bool check_stopped = true;
    double corrupt_by = 0.0;           // test hook: offset added to one analytic entry
};

struct GradcheckResult {
    double max_rel_error_full = 0.0;
    double max_rel_error_stopped = 0.0;
    std::size_t ties_resampled = 0;
    bool passed = false;
};

GradcheckResult run_gradcheck(const GradcheckOptions& options);

/// One summary line per checked mode plus the tie-resample count.
void print_gradcheck_result(std::ostream& os, const GradcheckOptions& options,
                            const GradcheckResult& result);

} // namespace mixdcnn

#endif
