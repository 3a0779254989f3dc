#pragma once

#include "udiff/denoiser.hpp"
#include "udiff/diffusion.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace udiff {

enum class LrSchedule { linear_decay, constant };

std::string to_string(LrSchedule schedule);
LrSchedule parse_lr_schedule(std::string_view name);

/// Optimization hyperparameters. Defaults are the published AdamW settings
/// with batch size and step count scaled down for a single machine.
struct TrainConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    int warmup_steps = 2500;
    LrSchedule schedule = LrSchedule::linear_decay;
    int batch_size = 32;
    int total_steps = 20000;
    double ema_decay = 0.9999;
    LossConfig loss;
    std::uint64_t seed = 0;
    int eval_every = 1000;
    int checkpoint_every = 5000;
    double grad_clip = 1.0;  ///< global-norm clip, 0 disables
    double t_min = 1e-3;
    ScheduleKind noise_schedule = ScheduleKind::linear;
    double noise_clamp = NoiseSchedule::kDefaultClamp;
    int val_sequences = 64;      ///< validation windows used per evaluation, 0 = all
    int elbo_mc_samples = 8;
    int max_nonfinite_steps = 5;

    void validate() const;
    NoiseSchedule noise() const { return NoiseSchedule(noise_schedule, noise_clamp); }
    bool operator==(const TrainConfig&) const = default;
};

/// Linear warmup 0 -> lr over warmup_steps, then linear decay to 0 at total_steps.
double lr_at(const TrainConfig& config, std::int64_t step);

struct OptimState {
    ParamSet<float> first_moment;
    ParamSet<float> second_moment;
    std::int64_t step = 0;
};

struct EmaState {
    DenoiserParams<float> shadow;
    double decay = 0.9999;
};

/// Everything that evolves during training.
struct TrainState {
    DenoiserParams<float> params;
    OptimState optim;
    EmaState ema;
    std::int64_t step = 0;
    Rng rng;
    int consecutive_nonfinite = 0;
};

TrainState make_train_state(const ModelConfig& model, const TrainConfig& config);

struct StepResult {
    LossReport report;
    double lr = 0.0;
    double grad_norm = 0.0;
    bool skipped = false;  ///< loss was non-finite, no update applied
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One optimization step on a batch of clean windows: draw t, corrupt, forward,
/// loss, backward, clip, AdamW, EMA. Throws TrainingDiverged after
/// max_nonfinite_steps consecutive non-finite losses.
StepResult train_step(TrainState& state, const std::vector<TokenSequence>& batch, const TrainConfig& config);

/// Clips `grads` to the global norm, applies AdamW with step size `lr` and
/// blends the EMA shadow. Returns false, leaving the state untouched, when the
/// gradient norm is not finite.
bool apply_update(TrainState& state, ParamSet<float>& grads, const TrainConfig& config, double lr, double& grad_norm);

/// Uniform draw of batch_size windows with replacement.
std::vector<TokenSequence> sample_batch(std::span<const TokenSequence> windows, int batch_size, Rng& rng);

using Metrics = std::map<std::string, double>;

/// Validation loss (configured variant, fixed seed) and ELBO perplexity. Always has keys {elbo_ppl, loss, step}.
Metrics validate(const DenoiserParams<float>& params, std::span<const TokenSequence> val, const TrainConfig& config,
                 std::int64_t step);
/// Same on the EMA shadow (default) or the raw parameters.
Metrics validate(const TrainState& state, std::span<const TokenSequence> val, const TrainConfig& config,
                 bool use_ema = true);

struct LoopOptions {
    std::filesystem::path output_dir;  ///< checkpoints + metrics.ndjson; empty disables file output
    std::int64_t stop_step = -1;       ///< defaults to total_steps
    std::string metadata_json = "{}";  ///< stored in checkpoint headers (tokenizer etc.)
    std::function<void(const Metrics&)> on_eval;
    std::function<void(std::int64_t, const StepResult&)> on_step;
};

/// Runs train_step until stop_step, validating every eval_every steps with EMA
/// weights and checkpointing every checkpoint_every steps.
void train_loop(TrainState& state, const TrainConfig& config, std::span<const TokenSequence> train,
                std::span<const TokenSequence> val, const LoopOptions& options);

}  // namespace udiff
