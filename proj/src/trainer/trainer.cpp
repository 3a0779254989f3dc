#include "udiff/trainer.hpp"

#include "log.hpp"
#include "udiff/checkpoint.hpp"
#include "udiff/evaluator.hpp"
#include "udiff/logit_model.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace udiff {

namespace {

constexpr std::uint64_t kValidationSeedOffset = 0x9e3779b97f4a7c15ULL;

bool all_finite(const RowMatrix<float>& m) { return m.allFinite(); }

}  // namespace

std::vector<TokenSequence> sample_batch(std::span<const TokenSequence> windows, int batch_size, Rng& rng) {
    if (windows.empty()) throw std::invalid_argument("no training windows");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    std::uniform_int_distribution<std::size_t> pick(0, windows.size() - 1);
    std::vector<TokenSequence> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) batch.push_back(windows[pick(rng)]);
    return batch;
}

StepResult train_step(TrainState& state, const std::vector<TokenSequence>& batch, const TrainConfig& config) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const auto& mc = state.params.config;
    for (const auto& seq : batch)
        if (static_cast<int>(seq.size()) != mc.context_length)
            throw std::invalid_argument("batch sequences must have length context_length");

    const Vocab vocab(mc.vocab_size);
    const NoiseSchedule noise = config.noise();
    const int reps = config.loss.time_samples_per_example;

    std::vector<TokenSequence> x0;
    x0.reserve(batch.size() * static_cast<std::size_t>(reps));
    for (const auto& seq : batch)
        for (int r = 0; r < reps; ++r) x0.push_back(seq);
    const int n = static_cast<int>(x0.size());

    const auto times = stratified_times(n, config.t_min, state.rng);
    std::vector<NoisySequence> xt;
    std::vector<TokenSequence> inputs;
    xt.reserve(x0.size());
    inputs.reserve(x0.size());
    for (int i = 0; i < n; ++i) {
        xt.push_back(corrupt_sequence(x0[i], times[i], vocab, noise, state.rng));
        inputs.push_back(xt.back().tokens);
    }

    const Denoiser<float> model(state.params);
    ActivationCache<float> cache;
    ForwardOptions options;
    options.training = true;
    options.rng = &state.rng;
    const auto logits = model.forward(inputs, times, options, &cache);

    StepResult result;
    result.lr = lr_at(config, state.step);

    auto reject = [&](const char* what) {
        result.skipped = true;
        result.report.value = std::numeric_limits<double>::quiet_NaN();
        state.consecutive_nonfinite += 1;
        log().warn("step {}: {}, update skipped ({} in a row)", state.step, what, state.consecutive_nonfinite);
        if (state.consecutive_nonfinite >= config.max_nonfinite_steps)
            throw TrainingDiverged("training diverged: " + std::to_string(state.consecutive_nonfinite) +
                                   " consecutive non-finite steps at step " + std::to_string(state.step));
        return result;
    };

    if (!all_finite(logits)) return reject("non-finite logits");

    const auto grids = split_logits(logits, n, mc.context_length);
    auto loss = batch_loss_with_grad(x0, xt, grids, config.loss, vocab, noise, state.rng);
    result.report = loss.report;
    if (!std::isfinite(loss.report.value)) return reject("non-finite loss");

    auto grads = state.params.tensors.zeros_like();
    model.backward(cache, stack_grids<float>(loss.grad), grads);
    if (!apply_update(state, grads, config, result.lr, result.grad_norm)) return reject("non-finite gradient");

    state.step += 1;
    state.consecutive_nonfinite = 0;
    return result;
}

Metrics validate(const DenoiserParams<float>& params, std::span<const TokenSequence> val, const TrainConfig& config,
                 std::int64_t step) {
    if (val.empty()) throw std::invalid_argument("validation set is empty");
    std::size_t count = val.size();
    if (config.val_sequences > 0) count = std::min(count, static_cast<std::size_t>(config.val_sequences));
    const auto subset = val.first(count);

    const Vocab vocab(params.config.vocab_size);
    const NoiseSchedule noise = config.noise();
    const DenoiserLogitModel model(params, config.batch_size);
    Rng rng(config.seed ^ kValidationSeedOffset);

    const int n = static_cast<int>(count);
    const auto times = stratified_times(n, config.t_min, rng);
    std::vector<NoisySequence> xt;
    std::vector<TokenSequence> inputs;
    for (int i = 0; i < n; ++i) {
        xt.push_back(corrupt_sequence(subset[i], times[i], vocab, noise, rng));
        inputs.push_back(xt.back().tokens);
    }
    const auto logits = model.logits(inputs, times);
    std::vector<CategoricalGrid> grids;
    grids.reserve(logits.size());
    for (const auto& g : logits) grids.push_back(softmax(g));
    const auto report = batch_loss(subset, xt, grids, config.loss, vocab, noise, rng);

    ElboOptions elbo_options;
    elbo_options.mc_time_samples = config.elbo_mc_samples;
    elbo_options.batch_size = config.batch_size;
    const auto elbo = elbo_ppl(model, subset, noise, elbo_options, rng);

    return {{"loss", report.value},
            {"elbo_ppl", elbo.ppl},
            {"elbo_std_error", elbo.std_error},
            {"step", static_cast<double>(step)}};
}

Metrics validate(const TrainState& state, std::span<const TokenSequence> val, const TrainConfig& config,
                 bool use_ema) {
    return validate(use_ema ? state.ema.shadow : state.params, val, config, state.step);
}

void train_loop(TrainState& state, const TrainConfig& config, std::span<const TokenSequence> train,
                std::span<const TokenSequence> val, const LoopOptions& options) {
    config.validate();
    const std::int64_t stop = options.stop_step < 0 ? config.total_steps : options.stop_step;
    const bool files = !options.output_dir.empty();
    std::ofstream metrics_log;
    if (files) {
        std::filesystem::create_directories(options.output_dir);
        metrics_log.open(options.output_dir / "metrics.ndjson", std::ios::app);
        if (!metrics_log) throw std::runtime_error("cannot open metrics log in " + options.output_dir.string());
    }

    auto checkpoint = [&] {
        const auto ckpt = make_checkpoint(state, config, options.metadata_json);
        save_checkpoint(options.output_dir / ("step_" + std::to_string(state.step) + ".udif"), ckpt);
        save_checkpoint(options.output_dir / "latest.udif", ckpt);
    };

    std::int64_t last_saved = -1;
    while (state.step < stop) {
        const auto batch = sample_batch(train, config.batch_size, state.rng);
        const auto result = train_step(state, batch, config);
        if (result.skipped) continue;
        if (options.on_step) options.on_step(state.step, result);

        nlohmann::json record{{"step", state.step}, {"loss", result.report.value}, {"lr", result.lr}};
        if (config.eval_every > 0 && state.step % config.eval_every == 0) {
            const auto metrics = validate(state, val, config);
            record["elbo_ppl"] = metrics.at("elbo_ppl");
            record["val_loss"] = metrics.at("loss");
            log().info("step {} loss {:.4f} val_loss {:.4f} elbo_ppl {:.3f}", state.step, result.report.value,
                       metrics.at("loss"), metrics.at("elbo_ppl"));
            if (options.on_eval) options.on_eval(metrics);
        } else {
            log().debug("step {} loss {:.4f} lr {:.3g}", state.step, result.report.value, result.lr);
        }
        if (files) metrics_log << record.dump() << '\n' << std::flush;

        if (files && config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0) {
            checkpoint();
            last_saved = state.step;
        }
    }
    if (files && last_saved != state.step) checkpoint();
}

}  // namespace udiff
