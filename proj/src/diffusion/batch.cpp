#include "udiff/diffusion.hpp"
#include "diffusion/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace udiff {

namespace {

void check_batch_shapes(std::size_t n_x0, std::size_t n_xt, std::size_t n_grid, std::span<const TokenSequence> x0) {
    if (n_x0 != n_xt || n_x0 != n_grid) throw std::invalid_argument("batch components have different sizes");
    for (const auto& seq : x0)
        if (seq.size() != x0.front().size()) throw std::invalid_argument("shape error: mixed sequence lengths in batch");
}

bool sddlm_family(LossVariant v) {
    return v == LossVariant::sddlm || v == LossVariant::sddlm_v1 || v == LossVariant::sddlm_v2;
}

/// Summed loss over the batch -> reduced loss.
double divisor(const LossConfig& config, int corrupted, std::size_t positions) {
    if (sddlm_family(config.variant) && config.reduction == Reduction::mean_over_corrupted)
        return static_cast<double>(corrupted);
    return static_cast<double>(positions);
}

void reduce(LossReport& report, double div) {
    if (div <= 0.0) {
        report.value = report.positive_term = report.negative_term = 0.0;
        return;
    }
    report.value /= div;
    report.positive_term /= div;
    report.negative_term /= div;
}

}  // namespace

LossReport batch_loss(std::span<const TokenSequence> x0, std::span<const NoisySequence> xt,
                      std::span<const CategoricalGrid> grids, const LossConfig& config, const Vocab& vocab,
                      const NoiseSchedule& schedule, Rng& rng) {
    config.validate();
    if (x0.empty()) throw std::invalid_argument("empty batch");
    check_batch_shapes(x0.size(), xt.size(), grids.size(), x0);

    LossReport total;
    for (std::size_t b = 0; b < x0.size(); ++b) {
        LossReport r;
        switch (config.variant) {
            case LossVariant::nelbo:
                if (xt[b].tokens.size() != x0[b].size() || grids[b].length != static_cast<int>(x0[b].size()))
                    throw std::invalid_argument("shape error: example components disagree");
                for (int l = 0; l < grids[b].length; ++l)
                    r.value += nelbo_token_loss(x0[b][l], xt[b].tokens[l], xt[b].t, grids[b].row(l), vocab, schedule).value;
                r.positive_term = r.value;
                r.corrupted_count = xt[b].corrupted_count();
                break;
            case LossVariant::rec: r = reconstruction_loss(x0[b], xt[b], grids[b]); break;
            case LossVariant::sddlm: r = sddlm_loss(x0[b], xt[b], grids[b]); break;
            case LossVariant::sddlm_v1: r = sddlm_v1_loss(x0[b], xt[b], grids[b], config, rng); break;
            case LossVariant::sddlm_v2: r = sddlm_v2_loss(x0[b], xt[b], grids[b], config); break;
        }
        total.value += r.value;
        total.positive_term += r.positive_term;
        total.negative_term += r.negative_term;
        total.corrupted_count += r.corrupted_count;
    }
    reduce(total, divisor(config, total.corrupted_count, x0.size() * x0.front().size()));
    return total;
}

BatchLossGrad batch_loss_with_grad(std::span<const TokenSequence> x0, std::span<const NoisySequence> xt,
                                   std::span<const LogitGrid> logits, const LossConfig& config, const Vocab& vocab,
                                   const NoiseSchedule& schedule, Rng& rng) {
    config.validate();
    if (x0.empty()) throw std::invalid_argument("empty batch");
    check_batch_shapes(x0.size(), xt.size(), logits.size(), x0);

    const int v = vocab.size();
    BatchLossGrad out;
    out.grad.reserve(x0.size());
    std::vector<double> probs(static_cast<std::size_t>(v));
    std::vector<double> grad_probs(static_cast<std::size_t>(v));
    LossReport& total = out.report;

    for (std::size_t b = 0; b < x0.size(); ++b) {
        const auto& seq = x0[b];
        const auto& noisy = xt[b];
        const auto& z = logits[b];
        if (noisy.tokens.size() != seq.size() || z.length != static_cast<int>(seq.size()) || z.vocab != v)
            throw std::invalid_argument("shape error: example components disagree");

        std::vector<Token> negatives;
        if (config.variant == LossVariant::sddlm_v1) negatives = draw_negatives(seq, noisy, v, config, rng);
        const AlphaValue a = config.variant == LossVariant::nelbo ? schedule.at(noisy.t) : AlphaValue{1.0, 0.0};

        LogitGrid g(z.length, v, 0.0);
        for (int l = 0; l < z.length; ++l) {
            const bool corrupted = noisy.corrupted_mask[l];
            total.corrupted_count += corrupted ? 1 : 0;
            if (sddlm_family(config.variant) && !corrupted) continue;

            softmax_row(z.row(l), probs);
            switch (config.variant) {
                case LossVariant::nelbo: {
                    const double val = nelbo_from_alphas(seq[l], noisy.tokens[l], a, probs, grad_probs);
                    total.value += val;
                    total.positive_term += val;
                    break;
                }
                case LossVariant::rec:
                case LossVariant::sddlm: {
                    const double val = detail::clamped_nll(probs, seq[l], grad_probs);
                    total.value += val;
                    total.positive_term += val;
                    break;
                }
                case LossVariant::sddlm_v1:
                case LossVariant::sddlm_v2: {
                    const Token neg = config.variant == LossVariant::sddlm_v1 ? negatives[l] : noisy.tokens[l];
                    const auto terms = detail::contrastive(probs, seq[l], neg, config, grad_probs);
                    total.positive_term += terms.positive;
                    total.negative_term += terms.negative;
                    total.value += terms.positive + terms.negative;
                    break;
                }
            }
            detail::softmax_backward(probs, grad_probs, g.row(l), 1.0);
        }
        out.grad.push_back(std::move(g));
    }

    const double div = divisor(config, total.corrupted_count, x0.size() * x0.front().size());
    reduce(total, div);
    const double scale = div > 0.0 ? 1.0 / div : 0.0;
    for (auto& g : out.grad)
        for (double& x : g.values) x *= scale;
    return out;
}

}  // namespace udiff
