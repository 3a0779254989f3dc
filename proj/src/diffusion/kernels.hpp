#pragma once

// Per-position loss kernels shared by the single-example losses and the
// batched gradient path.

#include "udiff/diffusion.hpp"

#include <span>

namespace udiff::detail {

/// -log(max(p_target, kLogClamp)); gradient w.r.t. probs written to `grad` if non-empty.
double clamped_nll(std::span<const double> probs, Token target, std::span<double> grad = {});

struct ContrastiveTerms {
    double positive = 0.0;
    double negative = 0.0;
};

/// -log(p_target + eps) + c * log(p_negative + eps) with the configured eps placement.
ContrastiveTerms contrastive(std::span<const double> probs, Token target, Token negative, const LossConfig& config,
                             std::span<double> grad = {});

/// grad_logits = scale * p * (grad_probs - <p, grad_probs>).
void softmax_backward(std::span<const double> probs, std::span<const double> grad_probs, std::span<double> grad_logits,
                      double scale);

}  // namespace udiff::detail
