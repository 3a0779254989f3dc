#include "checks.hpp"

#include <algorithm>
#include <cmath>

namespace udiff::testing {

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

namespace {

struct Instance {
    TokenSequence x0;
    NoisySequence xt;
    LogitGrid logits;
};

Instance make_instance(std::uint64_t seed, int length, int vocab) {
    Rng rng(seed);
    std::uniform_int_distribution<int> token(0, vocab - 1);
    std::normal_distribution<double> normal(0.0, 1.5);
    Instance in;
    in.x0.resize(length);
    for (auto& x : in.x0) x = token(rng);
    in.xt.t = 0.35 + 0.5 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    in.xt.tokens = in.x0;
    in.xt.corrupted_mask.assign(length, false);
    // Every position but the first is resampled to a different token.
    for (int l = 1; l < length; ++l) {
        in.xt.tokens[l] = (in.x0[l] + 1 + token(rng) % (vocab - 1)) % vocab;
        in.xt.corrupted_mask[l] = true;
    }
    in.logits = LogitGrid(length, vocab);
    for (auto& v : in.logits.values) v = normal(rng);
    return in;
}

}  // namespace

GradCheck loss_gradient_check(LossVariant variant, std::uint64_t seed, int length, int vocab) {
    auto in = make_instance(seed, length, vocab);
    LossConfig config;
    config.variant = variant;
    config.epsilon = 1e-3;
    const Vocab v(vocab);
    const NoiseSchedule schedule;
    const std::vector<TokenSequence> x0{in.x0};
    const std::vector<NoisySequence> xt{in.xt};
    const Rng base(seed ^ 0x5bd1e995ULL);

    auto value = [&](const LogitGrid& logits) {
        Rng rng = base;
        const std::vector<CategoricalGrid> grids{softmax(logits)};
        return batch_loss(x0, xt, grids, config, v, schedule, rng).value;
    };

    Rng rng = base;
    const std::vector<LogitGrid> logits{in.logits};
    const auto analytic = batch_loss_with_grad(x0, xt, logits, config, v, schedule, rng);

    GradCheck out;
    const double h = 1e-5;
    for (std::size_t i = 0; i < in.logits.values.size(); ++i) {
        LogitGrid plus = in.logits, minus = in.logits;
        plus.values[i] += h;
        minus.values[i] -= h;
        const double fd = (value(plus) - value(minus)) / (2.0 * h);
        const double err = relative_error(analytic.grad[0].values[i], fd);
        ++out.checked;
        if (err > out.worst) {
            out.worst = err;
            out.worst_at = "logit " + std::to_string(i);
        }
    }
    return out;
}

ModelConfig tiny_model(int vocab_size, int context_length) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    c.context_length = context_length;
    c.layers = 2;
    c.hidden_dim = 16;
    c.heads = 2;
    c.time_embed_dim = 8;
    c.time_frequency_dim = 8;
    return c;
}

GradCheck denoiser_gradient_check(std::uint64_t seed, int count) {
    const int vocab = 11, length = 8, batch = 3;
    auto params = init_params<double>(tiny_model(vocab, length), seed);
    Rng rng(seed + 17);
    std::normal_distribution<double> normal(0.0, 0.2);
    for (auto& t : params.tensors)
        for (auto& x : t.data) x += normal(rng);

    const Vocab v(vocab);
    const NoiseSchedule schedule;
    std::vector<TokenSequence> x0(batch, TokenSequence(length));
    std::uniform_int_distribution<int> token(0, vocab - 1);
    for (auto& s : x0)
        for (auto& x : s) x = token(rng);
    std::vector<NoisySequence> xt;
    std::vector<TokenSequence> inputs;
    std::vector<double> times;
    for (int b = 0; b < batch; ++b) {
        xt.push_back(corrupt_sequence(x0[b], 0.3 + 0.25 * b, v, schedule, rng));
        inputs.push_back(xt.back().tokens);
        times.push_back(xt.back().t);
    }
    LossConfig config;

    auto loss = [&] {
        const Denoiser<double> model(params);
        const auto logits = split_logits(model.forward(inputs, times), batch, length);
        std::vector<CategoricalGrid> grids;
        for (const auto& g : logits) grids.push_back(softmax(g));
        Rng unused(0);
        return batch_loss(x0, xt, grids, config, v, schedule, unused).value;
    };

    const Denoiser<double> model(params);
    ActivationCache<double> cache;
    const auto logits = split_logits(model.forward(inputs, times, {}, &cache), batch, length);
    Rng unused(0);
    const auto lg = batch_loss_with_grad(x0, xt, logits, config, v, schedule, unused);
    auto grads = params.tensors.zeros_like();
    model.backward(cache, stack_grids<double>(lg.grad), grads);

    GradCheck out;
    std::uniform_int_distribution<std::size_t> which_tensor(0, params.tensors.size() - 1);
    const double h = 1e-6;
    while (out.checked < count) {
        const std::size_t ti = which_tensor(rng);
        auto& tensor = params.tensors[ti];
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, tensor.data.size() - 1)(rng);
        const double original = tensor.data[j];
        tensor.data[j] = original + h;
        const double lp = loss();
        tensor.data[j] = original - h;
        const double lm = loss();
        tensor.data[j] = original;
        const double fd = (lp - lm) / (2.0 * h);
        const double err = relative_error(grads[ti].data[j], fd);
        ++out.checked;
        if (err > out.worst) {
            out.worst = err;
            out.worst_at = tensor.name + "[" + std::to_string(j) + "]";
        }
    }
    return out;
}

}  // namespace udiff::testing
