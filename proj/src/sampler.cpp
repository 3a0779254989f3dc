#include "udiff/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace udiff {

std::string to_string(FinalDecode mode) { return mode == FinalDecode::argmax ? "argmax" : "sample"; }

FinalDecode parse_final_decode(std::string_view name) {
    if (name == "argmax") return FinalDecode::argmax;
    if (name == "sample") return FinalDecode::sample;
    throw std::invalid_argument("unknown final_decode mode: " + std::string(name));
}

void SampleConfig::validate() const {
    if (num_steps < 1) throw std::invalid_argument("num_steps must be at least 1");
    if (num_samples < 1) throw std::invalid_argument("num_samples must be at least 1");
    if (context_length < 1) throw std::invalid_argument("context_length must be positive");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw std::invalid_argument("temperature must be positive");
}

TimeGrid step_grid(int num_steps) {
    if (num_steps < 1) throw std::invalid_argument("num_steps must be at least 1");
    TimeGrid grid;
    grid.reserve(static_cast<std::size_t>(num_steps));
    const double n = num_steps;
    for (int k = num_steps; k >= 1; --k) grid.emplace_back(k / n, (k - 1) / n);
    return grid;
}

namespace {

void check_grid(const TimeGrid& grid) {
    if (grid.empty()) throw std::invalid_argument("time grid is empty");
    if (grid.front().first != 1.0) throw std::invalid_argument("time grid must start at t = 1");
    if (grid.back().second != 0.0) throw std::invalid_argument("time grid must end at s = 0");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(grid[k].second < grid[k].first)) throw std::invalid_argument("time grid must decrease strictly");
        if (k + 1 < grid.size() && grid[k + 1].first != grid[k].second)
            throw std::invalid_argument("time grid steps must chain (s_k = t_{k+1})");
    }
}

Token draw(std::span<const double> probs, Rng& rng) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double u = uniform(rng);
    double cumulative = 0.0;
    int last = 0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (probs[j] <= 0.0) continue;
        cumulative += probs[j];
        last = static_cast<int>(j);
        if (u < cumulative) return last;
    }
    return last;
}

}  // namespace

std::vector<TokenSequence> sample(const LogitModel& model, const SampleConfig& config, const Vocab& vocab,
                                  const NoiseSchedule& schedule, Rng& rng, const TimeGrid& grid) {
    config.validate();
    const int v = vocab.size();
    if (model.vocab_size() != v) throw std::invalid_argument("model and vocabulary sizes differ");
    const TimeGrid steps = grid.empty() ? step_grid(config.num_steps) : grid;
    check_grid(steps);

    std::uniform_int_distribution<Token> prior(0, v - 1);
    std::vector<TokenSequence> x(static_cast<std::size_t>(config.num_samples),
                                 TokenSequence(static_cast<std::size_t>(config.context_length)));
    for (auto& seq : x)
        for (auto& tok : seq) tok = prior(rng);

    std::vector<double> probs(static_cast<std::size_t>(v)), post(static_cast<std::size_t>(v));
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const auto [t, s] = steps[k];
        const std::vector<double> times(x.size(), t);
        const auto logits = model.logits(x, times);
        if (logits.size() != x.size()) throw std::runtime_error("model returned the wrong number of grids");
        const double alpha_t = schedule.at(t).alpha, alpha_s = schedule.at(s).alpha;
        const bool last = k + 1 == steps.size();

        for (std::size_t b = 0; b < x.size(); ++b) {
            const auto& grid_b = logits[b];
            if (grid_b.length != config.context_length || grid_b.vocab != v)
                throw std::runtime_error("model returned a grid of the wrong shape");
            for (int l = 0; l < grid_b.length; ++l) {
                const auto row = grid_b.row(l);
                if (!std::all_of(row.begin(), row.end(), [](double z) { return std::isfinite(z); })) {
                    std::ostringstream msg;
                    msg << "non-finite logits at sampling step " << steps.size() - k << " (t = " << t << ")";
                    throw std::runtime_error(msg.str());
                }
                softmax_row(row, probs, config.temperature);
                auto& tok = x[b][static_cast<std::size_t>(l)];
                if (last && config.final_decode == FinalDecode::argmax) {
                    tok = static_cast<Token>(std::max_element(probs.begin(), probs.end()) - probs.begin());
                } else {
                    posterior_from_alphas(tok, probs, alpha_t, alpha_s, post);
                    tok = draw(post, rng);
                }
            }
        }
    }
    return x;
}

}  // namespace udiff
