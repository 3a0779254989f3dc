#include "udiff/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace udiff {

std::string to_string(LrSchedule schedule) {
    return schedule == LrSchedule::constant ? "constant" : "linear_decay";
}

LrSchedule parse_lr_schedule(std::string_view name) {
    if (name == "linear_decay") return LrSchedule::linear_decay;
    if (name == "constant") return LrSchedule::constant;
    throw std::invalid_argument("unknown lr schedule: " + std::string(name));
}

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be a finite non-negative number");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be positive");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
    if (warmup_steps < 0) throw std::invalid_argument("warmup_steps must be non-negative");
    if (total_steps < 1) throw std::invalid_argument("total_steps must be positive");
    if (warmup_steps >= total_steps) throw std::invalid_argument("warmup_steps must be smaller than total_steps");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw std::invalid_argument("ema_decay must lie in (0, 1)");
    if (eval_every < 0 || checkpoint_every < 0) throw std::invalid_argument("eval_every and checkpoint_every must be >= 0");
    if (!(grad_clip >= 0.0)) throw std::invalid_argument("grad_clip must be non-negative");
    if (!(t_min > 0.0 && t_min < 1.0)) throw std::invalid_argument("t_min must lie in (0, 1)");
    if (val_sequences < 0) throw std::invalid_argument("val_sequences must be non-negative");
    if (elbo_mc_samples < 1) throw std::invalid_argument("elbo_mc_samples must be positive");
    if (max_nonfinite_steps < 1) throw std::invalid_argument("max_nonfinite_steps must be positive");
    loss.validate();
    (void)noise();
}

double lr_at(const TrainConfig& config, std::int64_t step) {
    if (step < 0) throw std::invalid_argument("step must be non-negative");
    if (step < config.warmup_steps) return config.lr * static_cast<double>(step) / config.warmup_steps;
    if (config.schedule == LrSchedule::constant) return config.lr;
    const double remaining = static_cast<double>(config.total_steps - step);
    const double span = static_cast<double>(config.total_steps - config.warmup_steps);
    return config.lr * std::max(0.0, remaining / span);
}

TrainState make_train_state(const ModelConfig& model, const TrainConfig& config) {
    config.validate();
    TrainState state;
    state.params = init_params<float>(model, config.seed);
    state.optim.first_moment = state.params.tensors.zeros_like();
    state.optim.second_moment = state.params.tensors.zeros_like();
    state.ema.shadow = state.params;
    state.ema.decay = config.ema_decay;
    state.rng.seed(config.seed + 1);
    return state;
}

bool apply_update(TrainState& state, ParamSet<float>& grads, const TrainConfig& config, double lr,
                  double& grad_norm) {
    auto& params = state.params.tensors;
    if (!grads.same_layout(params)) throw std::invalid_argument("gradient layout does not match parameters");

    double sq = 0.0;
    for (const auto& g : grads)
        for (float x : g.data) sq += static_cast<double>(x) * x;
    grad_norm = std::sqrt(sq);
    if (!std::isfinite(grad_norm)) return false;

    const double clip = (config.grad_clip > 0.0 && grad_norm > config.grad_clip) ? config.grad_clip / grad_norm : 1.0;

    auto& optim = state.optim;
    optim.step += 1;
    const double b1 = config.beta1, b2 = config.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(optim.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(optim.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].data;
        auto& m = optim.first_moment[i].data;
        auto& v = optim.second_moment[i].data;
        const auto& g = grads[i].data;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = clip * g[k];
            const double mk = b1 * m[k] + (1.0 - b1) * gk;
            const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
            m[k] = static_cast<float>(mk);
            v[k] = static_cast<float>(vk);
            const double update = (mk / bc1) / (std::sqrt(vk / bc2) + config.adam_eps) + config.weight_decay * p[k];
            p[k] = static_cast<float>(p[k] - lr * update);
        }
    }

    const double d = state.ema.decay;
    auto& shadow = state.ema.shadow.tensors;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& s = shadow[i].data;
        const auto& p = params[i].data;
        for (std::size_t k = 0; k < s.size(); ++k) s[k] = static_cast<float>(d * s[k] + (1.0 - d) * p[k]);
    }
    return true;
}

}  // namespace udiff
