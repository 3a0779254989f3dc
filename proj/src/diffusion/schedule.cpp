#include "udiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace udiff {

Vocab::Vocab(int size) : size_(size) {
    if (size < 2) throw std::invalid_argument("vocabulary size must be at least 2");
}

std::vector<double> Vocab::prior() const { return std::vector<double>(static_cast<std::size_t>(size_), 1.0 / size_); }

NoiseSchedule::NoiseSchedule(ScheduleKind kind, double clamp) : kind_(kind), clamp_(clamp) {
    if (!(clamp >= 0.0 && clamp < 1.0)) throw std::invalid_argument("schedule clamp must lie in [0, 1)");
    if (kind == ScheduleKind::geometric && clamp <= 0.0)
        throw std::invalid_argument("geometric schedule needs a positive terminal alpha");
}

AlphaValue NoiseSchedule::at(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("diffusion time must lie in [0, 1]");
    switch (kind_) {
        case ScheduleKind::linear:
            return {std::max(1.0 - t, clamp_), -1.0};
        case ScheduleKind::geometric: {
            const double alpha = std::pow(clamp_, t);
            return {alpha, std::log(clamp_) * alpha};
        }
    }
    throw std::logic_error("unknown schedule kind");
}

AlphaValue alpha_at(const NoiseSchedule& schedule, double t) { return schedule.at(t); }

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::linear ? "linear" : "geometric"; }

ScheduleKind parse_schedule_kind(std::string_view name) {
    if (name == "linear") return ScheduleKind::linear;
    if (name == "geometric") return ScheduleKind::geometric;
    throw std::invalid_argument("unknown schedule: " + std::string(name));
}

int NoisySequence::corrupted_count() const {
    return static_cast<int>(std::count(corrupted_mask.begin(), corrupted_mask.end(), true));
}

std::vector<double> forward_marginal(Token x0_token, double t, const Vocab& vocab, const NoiseSchedule& schedule) {
    if (x0_token < 0 || x0_token >= vocab.size()) throw std::domain_error("token index out of range");
    const double alpha = schedule.at(t).alpha;
    std::vector<double> probs(static_cast<std::size_t>(vocab.size()), (1.0 - alpha) / vocab.size());
    probs[x0_token] += alpha;
    return probs;
}

NoisySequence corrupt_with_alpha(std::span<const Token> x0, double alpha, double t, const Vocab& vocab, Rng& rng) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::domain_error("alpha must lie in [0, 1]");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> uniform_token(0, vocab.size() - 1);
    NoisySequence out;
    out.t = t;
    out.tokens.resize(x0.size());
    out.corrupted_mask.resize(x0.size());
    for (std::size_t l = 0; l < x0.size(); ++l) {
        if (x0[l] < 0 || x0[l] >= vocab.size()) throw std::domain_error("token index out of range");
        // Keep with probability alpha, otherwise resample from the prior.
        const bool keep = unit(rng) < alpha;
        out.tokens[l] = keep ? x0[l] : uniform_token(rng);
        out.corrupted_mask[l] = out.tokens[l] != x0[l];
    }
    return out;
}

NoisySequence corrupt_sequence(std::span<const Token> x0, double t, const Vocab& vocab, const NoiseSchedule& schedule,
                               Rng& rng) {
    if (!(t > 0.0 && t <= 1.0)) throw std::domain_error("corruption time must lie in (0, 1]");
    return corrupt_with_alpha(x0, schedule.at(t).alpha, t, vocab, rng);
}

std::vector<double> stratified_times(int n, double t_min, Rng& rng) {
    if (n < 1) throw std::invalid_argument("need at least one time sample");
    if (!(t_min >= 0.0 && t_min < 1.0)) throw std::invalid_argument("t_min must lie in [0, 1)");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> ts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        // u in (0, 1] so t never reaches t_min itself.
        const double u = (i + 1.0 - unit(rng)) / n;
        ts[i] = t_min + (1.0 - t_min) * u;
    }
    return ts;
}

}  // namespace udiff
