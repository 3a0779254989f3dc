#pragma once

// Categorical diffusion with a uniform prior: noise schedule, forward
// corruption, the exact reverse posterior and the per-token training
// objectives (NELBO, reconstruction, SDDLM and its two contrastive variants).
//
// Single-example losses return sums over positions; batch_loss applies the
// configured reduction.

#include "udiff/grid.hpp"

#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace udiff {

using Rng = std::mt19937_64;

class Vocab {
public:
    explicit Vocab(int size);

    int size() const { return size_; }
    /// Uniform prior, every entry exactly 1/V.
    std::vector<double> prior() const;

private:
    int size_;
};

enum class ScheduleKind { linear, geometric };

struct AlphaValue {
    double alpha;        ///< alpha_t in [clamp, 1]
    double alpha_prime;  ///< d alpha_t / dt, never positive
};

/// alpha_t with alpha_0 = 1 and alpha_1 = clamp.
///   linear:    alpha_t = max(1 - t, clamp), alpha'_t = -1
///   geometric: alpha_t = clamp^t,           alpha'_t = ln(clamp) clamp^t
/// A zero clamp is allowed for the linear schedule (pure prior at t = 1).
class NoiseSchedule {
public:
    static constexpr double kDefaultClamp = 1e-6;

    explicit NoiseSchedule(ScheduleKind kind = ScheduleKind::linear, double clamp = kDefaultClamp);

    AlphaValue at(double t) const;
    ScheduleKind kind() const { return kind_; }
    double clamp() const { return clamp_; }

private:
    ScheduleKind kind_;
    double clamp_;
};

AlphaValue alpha_at(const NoiseSchedule& schedule, double t);

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

struct NoisySequence {
    TokenSequence tokens;
    double t = 1.0;
    std::vector<bool> corrupted_mask;

    int corrupted_count() const;
};

/// alpha_t * onehot(x0) + (1 - alpha_t) / V.
std::vector<double> forward_marginal(Token x0_token, double t, const Vocab& vocab, const NoiseSchedule& schedule);

/// Samples x_t ~ q_t(. | x_0) independently per position.
NoisySequence corrupt_sequence(std::span<const Token> x0, double t, const Vocab& vocab, const NoiseSchedule& schedule,
                               Rng& rng);
/// Same as corrupt_sequence with alpha given directly; `t` is only recorded.
NoisySequence corrupt_with_alpha(std::span<const Token> x0, double alpha, double t, const Vocab& vocab, Rng& rng);

/// Stratified draw of n times in (t_min, 1]: one uniform draw per stratum.
std::vector<double> stratified_times(int n, double t_min, Rng& rng);

/// q_{s|t}(. | x_t, x_0) with x_0 replaced by an arbitrary distribution.
std::vector<double> posterior_step(Token xt_token, std::span<const double> x0_dist, double t, double s,
                                   const Vocab& vocab, const NoiseSchedule& schedule);
/// Kernel of posterior_step on precomputed alphas. Requires alpha_s > 0 and alpha_t <= alpha_s.
void posterior_from_alphas(Token xt_token, std::span<const double> x0_dist, double alpha_t, double alpha_s,
                           std::span<double> out);

struct NelboResult {
    double value = 0.0;
    bool renormalized = false;  ///< model_probs did not sum to one and were rescaled
};

/// Continuous-time NELBO integrand for one token.
///
/// With xt~ = V alpha x_0 + (1 - alpha) 1, xtheta~ = V alpha x_theta + (1 - alpha) 1,
/// i = x_t and r_j = xt~_j / xt~_i:
///
///   -alpha' / (V alpha) * [ V/xtheta~_i - V/xt~_i + sum_j r_j log(xtheta~_i xt~_j / (xtheta~_j xt~_i)) ]
///
/// which is non-negative and zero iff xtheta~ = xt~.
NelboResult nelbo_token_loss(Token x0_token, Token xt_token, double t, std::span<const double> model_probs,
                             const Vocab& vocab, const NoiseSchedule& schedule);
/// Kernel on precomputed alpha values; writes d loss / d probs when `grad` is non-empty.
double nelbo_from_alphas(Token x0_token, Token xt_token, AlphaValue a, std::span<const double> probs,
                         std::span<double> grad = {});

enum class LossVariant { nelbo, rec, sddlm, sddlm_v1, sddlm_v2 };
enum class Reduction { mean_over_corrupted, mean_over_all };

std::string to_string(LossVariant variant);
LossVariant parse_loss_variant(std::string_view name);
std::string to_string(Reduction reduction);
Reduction parse_reduction(std::string_view name);

struct LossConfig {
    LossVariant variant = LossVariant::sddlm;
    double epsilon = 1e-4;
    int time_samples_per_example = 1;
    Reduction reduction = Reduction::mean_over_corrupted;
    /// Add epsilon only inside the positive log of V1/V2.
    bool epsilon_positive_only = false;
    /// Redraw V1 negatives that coincide with the clean token.
    bool exclude_target_negative = false;
    /// Scales the contrastive term; 0 turns V1/V2 into SDDLM with an epsilon shift.
    double negative_coefficient = 1.0;

    void validate() const;
    bool operator==(const LossConfig&) const = default;
};

struct LossReport {
    double value = 0.0;
    int corrupted_count = 0;
    double positive_term = 0.0;
    double negative_term = 0.0;
};

/// Lower bound applied to probabilities inside unsmoothed logs.
inline constexpr double kLogClamp = 1e-12;

LossReport reconstruction_loss(std::span<const Token> x0, const NoisySequence& xt, const CategoricalGrid& grid);
LossReport sddlm_loss(std::span<const Token> x0, const NoisySequence& xt, const CategoricalGrid& grid);

/// One uniform negative per corrupted position, -1 elsewhere.
std::vector<Token> draw_negatives(std::span<const Token> x0, const NoisySequence& xt, int vocab_size,
                                  const LossConfig& config, Rng& rng);
LossReport sddlm_v1_loss(std::span<const Token> x0, const NoisySequence& xt, const CategoricalGrid& grid,
                         const LossConfig& config, Rng& rng);
/// Replays V1 with recorded negatives.
LossReport sddlm_v1_loss(std::span<const Token> x0, const NoisySequence& xt, const CategoricalGrid& grid,
                         const LossConfig& config, std::span<const Token> negatives);
LossReport sddlm_v2_loss(std::span<const Token> x0, const NoisySequence& xt, const CategoricalGrid& grid,
                         const LossConfig& config);

/// Reduced loss over a batch. NELBO and REC always average over all positions;
/// the SDDLM family follows config.reduction and yields 0 when nothing is corrupted.
LossReport batch_loss(std::span<const TokenSequence> x0, std::span<const NoisySequence> xt,
                      std::span<const CategoricalGrid> grids, const LossConfig& config, const Vocab& vocab,
                      const NoiseSchedule& schedule, Rng& rng);

struct BatchLossGrad {
    LossReport report;
    std::vector<LogitGrid> grad;  ///< d reduced loss / d logits, one grid per example
};

/// batch_loss on softmax(logits) together with its gradient w.r.t. the logits.
BatchLossGrad batch_loss_with_grad(std::span<const TokenSequence> x0, std::span<const NoisySequence> xt,
                                   std::span<const LogitGrid> logits, const LossConfig& config, const Vocab& vocab,
                                   const NoiseSchedule& schedule, Rng& rng);

}  // namespace udiff
