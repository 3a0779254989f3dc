#include "udiff/diffusion.hpp"

#include <stdexcept>

namespace udiff {

void posterior_from_alphas(Token xt_token, std::span<const double> x0_dist, double alpha_t, double alpha_s,
                           std::span<double> out) {
    const auto vocab = static_cast<int>(x0_dist.size());
    if (xt_token < 0 || xt_token >= vocab) throw std::domain_error("token index out of range");
    if (!(alpha_s > 0.0)) throw std::domain_error("alpha_s must be positive");
    if (alpha_t > alpha_s) throw std::domain_error("posterior requires alpha_t <= alpha_s");

    const double alpha_ts = alpha_t / alpha_s;
    const double v_alpha_x = vocab * alpha_t * x0_dist[xt_token];
    const double denom = v_alpha_x + (1.0 - alpha_t);
    const double prior_part = (1.0 - alpha_ts) * (1.0 - alpha_s) / vocab;
    const double x0_weight = alpha_s - alpha_t;

    for (int j = 0; j < vocab; ++j) out[j] = (x0_weight * x0_dist[j] + prior_part) / denom;
    // The x_t-aligned terms only touch entry x_t.
    out[xt_token] = (x0_weight * x0_dist[xt_token] + prior_part + v_alpha_x + (alpha_ts - alpha_t)) / denom;
}

std::vector<double> posterior_step(Token xt_token, std::span<const double> x0_dist, double t, double s,
                                   const Vocab& vocab, const NoiseSchedule& schedule) {
    if (static_cast<int>(x0_dist.size()) != vocab.size()) throw std::invalid_argument("x0 distribution has wrong size");
    if (s > t) throw std::domain_error("posterior requires s <= t");
    const double alpha_t = schedule.at(t).alpha;
    const double alpha_s = schedule.at(s).alpha;
    if (alpha_s == 0.0) throw std::domain_error("alpha_s is zero");
    std::vector<double> out(x0_dist.size());
    posterior_from_alphas(xt_token, x0_dist, alpha_t, alpha_s, out);
    return out;
}

}  // namespace udiff
