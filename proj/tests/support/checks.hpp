#pragma once

#include "udiff/denoiser.hpp"
#include "udiff/diffusion.hpp"

#include <cstdint>
#include <string>

namespace udiff::testing {

struct GradCheck {
    double worst = 0.0;  ///< largest relative error over the checked entries
    int checked = 0;
    std::string worst_at;
};

/// |a - b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor = 1e-6);

/// Analytic d loss / d logits against central differences on an L x V logit grid
/// with a fixed noisy sequence (and fixed negatives for V1).
GradCheck loss_gradient_check(LossVariant variant, std::uint64_t seed, int length = 3, int vocab = 8);

/// Small double-precision transformer with randomized weights, SDDLM loss on a
/// fixed corrupted batch; compares backward() against central differences on
/// `count` randomly chosen parameters.
GradCheck denoiser_gradient_check(std::uint64_t seed, int count = 16);

/// Tiny model config used throughout the tests.
ModelConfig tiny_model(int vocab_size, int context_length);

}  // namespace udiff::testing
