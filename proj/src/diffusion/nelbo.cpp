#include "udiff/diffusion.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace udiff {

namespace {

/// z - log(1 + z), series near zero.
double bregman_log(double z) {
    if (std::abs(z) < 0.05) {
        double term = z * z, sum = 0.0;
        for (int n = 2; n < 24; ++n) {
            sum += (n % 2 == 0 ? 1.0 : -1.0) * term / n;
            term *= z;
        }
        return sum;
    }
    return z - std::log1p(z);
}

/// log(1 + z) - z / (1 + z), series near zero.
double bregman_inverse(double z) {
    if (std::abs(z) < 0.05) {
        double term = z * z, sum = 0.0;
        for (int n = 2; n < 24; ++n) {
            sum += (n % 2 == 0 ? 1.0 : -1.0) * (n - 1) * term / n;
            term *= z;
        }
        return sum;
    }
    return std::log1p(z) - z / (1.0 + z);
}

}  // namespace

// With c = V alpha / (1 - alpha), u = 1 + c x0 and w = 1 + c x_theta the
// bracket equals a sum of non-negative terms in z_j = (w_j - u_j) / u_j:
//   sum_{j != i} (u_j / u_i) h(z_j) + ((V + c) / u_i) k(z_i) + h(z_i)
// with h(z) = z - log(1 + z) and k(z) = log(1 + z) - z / (1 + z).
double nelbo_from_alphas(Token x0_token, Token xt_token, AlphaValue a, std::span<const double> probs,
                         std::span<double> grad) {
    const auto vocab = static_cast<int>(probs.size());
    const double alpha = a.alpha;
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("NELBO needs alpha_t strictly inside (0, 1)");

    const double c = vocab * alpha / (1.0 - alpha);
    const double weight = -a.alpha_prime / (vocab * alpha);
    const int i = xt_token;
    const double u_i = x0_token == i ? 1.0 + c : 1.0;

    double bracket = 0.0;
    for (int j = 0; j < vocab; ++j) {
        const double u_j = x0_token == j ? 1.0 + c : 1.0;
        const double z = c * (probs[j] - (x0_token == j ? 1.0 : 0.0)) / u_j;
        if (j == i) bracket += (vocab + c) / u_i * bregman_inverse(z) + bregman_log(z);
        else bracket += u_j / u_i * bregman_log(z);
    }

    if (!grad.empty()) {
        for (int k = 0; k < vocab; ++k) {
            const double w_k = 1.0 + c * probs[k];
            double d = c * (probs[k] - (x0_token == k ? 1.0 : 0.0)) / (u_i * w_k);
            if (k == i) d *= (vocab + c) / w_k + 1.0;
            grad[k] = weight * c * d;
        }
    }
    return weight * bracket;
}

NelboResult nelbo_token_loss(Token x0_token, Token xt_token, double t, std::span<const double> model_probs,
                             const Vocab& vocab, const NoiseSchedule& schedule) {
    const int v = vocab.size();
    if (static_cast<int>(model_probs.size()) != v) throw std::invalid_argument("model distribution has wrong size");
    if (x0_token < 0 || x0_token >= v || xt_token < 0 || xt_token >= v)
        throw std::domain_error("token index out of range");

    const AlphaValue a = schedule.at(t);
    if (a.alpha <= 0.0 || a.alpha >= 1.0) throw std::domain_error("NELBO undefined at alpha_t = 0 or 1");

    NelboResult result;
    const double total = std::accumulate(model_probs.begin(), model_probs.end(), 0.0);
    for (double p : model_probs)
        if (!(p >= 0.0)) throw std::domain_error("model probabilities must be non-negative");
    if (!(total > 0.0)) throw std::domain_error("model probabilities sum to zero");

    if (std::abs(total - 1.0) > 1e-9) {
        std::vector<double> normalized(model_probs.begin(), model_probs.end());
        for (double& p : normalized) p /= total;
        result.value = nelbo_from_alphas(x0_token, xt_token, a, normalized);
        result.renormalized = true;
    } else {
        result.value = nelbo_from_alphas(x0_token, xt_token, a, model_probs);
    }
    return result;
}

}  // namespace udiff
