#include "udiff/diffusion.hpp"
#include "diffusion/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace udiff {

namespace {

void check_inputs(std::span<const Token> x0, const NoisySequence& xt, const CategoricalGrid& grid) {
    if (xt.tokens.size() != x0.size() || xt.corrupted_mask.size() != x0.size())
        throw std::invalid_argument("x0 and x_t lengths differ");
    if (grid.length != static_cast<int>(x0.size())) throw std::invalid_argument("grid length differs from sequence");
    for (std::size_t l = 0; l < x0.size(); ++l) {
        if (x0[l] < 0 || x0[l] >= grid.vocab || xt.tokens[l] < 0 || xt.tokens[l] >= grid.vocab)
            throw std::domain_error("token index out of range");
        if (xt.corrupted_mask[l] != (xt.tokens[l] != x0[l]))
            throw std::invalid_argument("corrupted mask inconsistent with tokens");
    }
    if (!grid.is_normalized()) throw std::invalid_argument("grid rows must be normalized");
}

}  // namespace

namespace detail {

double clamped_nll(std::span<const double> probs, Token target, std::span<double> grad) {
    const double p = probs[target];
    if (!grad.empty()) {
        std::fill(grad.begin(), grad.end(), 0.0);
        if (p > kLogClamp) grad[target] = -1.0 / p;
    }
    return -std::log(std::max(p, kLogClamp));
}

ContrastiveTerms contrastive(std::span<const double> probs, Token target, Token negative, const LossConfig& config,
                             std::span<double> grad) {
    const double eps = config.epsilon;
    const double p_pos = probs[target];
    const double p_neg = probs[negative];
    ContrastiveTerms terms;
    terms.positive = -std::log(p_pos + eps);

    double neg_arg = p_neg;
    bool neg_active = true;
    if (config.epsilon_positive_only) {
        if (p_neg <= kLogClamp) {
            neg_arg = kLogClamp;
            neg_active = false;
        }
    } else {
        neg_arg = p_neg + eps;
    }
    terms.negative = config.negative_coefficient * std::log(neg_arg);

    if (!grad.empty()) {
        std::fill(grad.begin(), grad.end(), 0.0);
        grad[target] += -1.0 / (p_pos + eps);
        if (neg_active) grad[negative] += config.negative_coefficient / neg_arg;
    }
    return terms;
}

void softmax_backward(std::span<const double> probs, std::span<const double> grad_probs, std::span<double> grad_logits,
                      double scale) {
    double dot = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) dot += probs[k] * grad_probs[k];
    for (std::size_t k = 0; k < probs.size(); ++k) grad_logits[k] = scale * probs[k] * (grad_probs[k] - dot);
}

}  // namespace detail

LossReport reconstruction_loss(std::span<const Token> x0, const NoisySequence& xt, const CategoricalGrid& grid) {
    check_inputs(x0, xt, grid);
    LossReport report;
    for (int l = 0; l < grid.length; ++l) report.value += detail::clamped_nll(grid.row(l), x0[l]);
    report.corrupted_count = xt.corrupted_count();
    report.positive_term = report.value;
    return report;
}

LossReport sddlm_loss(std::span<const Token> x0, const NoisySequence& xt, const CategoricalGrid& grid) {
    check_inputs(x0, xt, grid);
    LossReport report;
    for (int l = 0; l < grid.length; ++l) {
        if (!xt.corrupted_mask[l]) continue;
        report.value += detail::clamped_nll(grid.row(l), x0[l]);
        ++report.corrupted_count;
    }
    report.positive_term = report.value;
    return report;
}

std::vector<Token> draw_negatives(std::span<const Token> x0, const NoisySequence& xt, int vocab_size,
                                  const LossConfig& config, Rng& rng) {
    if (vocab_size < 2) throw std::invalid_argument("vocabulary size must be at least 2");
    std::uniform_int_distribution<int> uniform_token(0, vocab_size - 1);
    std::vector<Token> negatives(x0.size(), -1);
    for (std::size_t l = 0; l < x0.size(); ++l) {
        if (!xt.corrupted_mask[l]) continue;
        Token neg = uniform_token(rng);
        while (config.exclude_target_negative && neg == x0[l]) neg = uniform_token(rng);
        negatives[l] = neg;
    }
    return negatives;
}

LossReport sddlm_v1_loss(std::span<const Token> x0, const NoisySequence& xt, const CategoricalGrid& grid,
                         const LossConfig& config, std::span<const Token> negatives) {
    config.validate();
    check_inputs(x0, xt, grid);
    if (negatives.size() != x0.size()) throw std::invalid_argument("one negative slot per position required");
    LossReport report;
    for (int l = 0; l < grid.length; ++l) {
        if (!xt.corrupted_mask[l]) continue;
        if (negatives[l] < 0 || negatives[l] >= grid.vocab) throw std::domain_error("negative token out of range");
        const auto terms = detail::contrastive(grid.row(l), x0[l], negatives[l], config);
        report.positive_term += terms.positive;
        report.negative_term += terms.negative;
        ++report.corrupted_count;
    }
    report.value = report.positive_term + report.negative_term;
    return report;
}

LossReport sddlm_v1_loss(std::span<const Token> x0, const NoisySequence& xt, const CategoricalGrid& grid,
                         const LossConfig& config, Rng& rng) {
    check_inputs(x0, xt, grid);
    const auto negatives = draw_negatives(x0, xt, grid.vocab, config, rng);
    return sddlm_v1_loss(x0, xt, grid, config, negatives);
}

LossReport sddlm_v2_loss(std::span<const Token> x0, const NoisySequence& xt, const CategoricalGrid& grid,
                         const LossConfig& config) {
    return sddlm_v1_loss(x0, xt, grid, config, xt.tokens);
}

void LossConfig::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("loss epsilon must be positive");
    if (time_samples_per_example < 1) throw std::invalid_argument("time_samples_per_example must be >= 1");
}

std::string to_string(LossVariant variant) {
    switch (variant) {
        case LossVariant::nelbo: return "nelbo";
        case LossVariant::rec: return "rec";
        case LossVariant::sddlm: return "sddlm";
        case LossVariant::sddlm_v1: return "sddlm_v1";
        case LossVariant::sddlm_v2: return "sddlm_v2";
    }
    return "unknown";
}

LossVariant parse_loss_variant(std::string_view name) {
    if (name == "nelbo") return LossVariant::nelbo;
    if (name == "rec") return LossVariant::rec;
    if (name == "sddlm") return LossVariant::sddlm;
    if (name == "sddlm_v1") return LossVariant::sddlm_v1;
    if (name == "sddlm_v2") return LossVariant::sddlm_v2;
    throw std::invalid_argument("unknown loss variant: " + std::string(name));
}

std::string to_string(Reduction reduction) {
    return reduction == Reduction::mean_over_corrupted ? "mean_over_corrupted" : "mean_over_all";
}

Reduction parse_reduction(std::string_view name) {
    if (name == "mean_over_corrupted") return Reduction::mean_over_corrupted;
    if (name == "mean_over_all") return Reduction::mean_over_all;
    throw std::invalid_argument("unknown reduction: " + std::string(name));
}

}  // namespace udiff
