#include "udiff/evaluator.hpp"

#include <cmath>
#include <stdexcept>

namespace udiff {

ElboEstimate elbo_ppl(const LogitModel& model, std::span<const TokenSequence> val, const NoiseSchedule& schedule,
                      const ElboOptions& options, Rng& rng) {
    if (val.empty()) throw std::invalid_argument("elbo_ppl needs a non-empty validation set");
    if (options.mc_time_samples < 1) throw std::invalid_argument("mc_time_samples must be at least 1");
    if (!(options.t_min >= 0.0 && options.t_min < 1.0)) throw std::invalid_argument("t_min must lie in [0, 1)");
    if (options.batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    const std::size_t length = val.front().size();
    if (length == 0) throw std::invalid_argument("validation sequences are empty");
    for (const auto& seq : val)
        if (seq.size() != length) throw std::invalid_argument("shape error: validation sequences differ in length");

    const Vocab vocab(model.vocab_size());
    const int m = options.mc_time_samples;
    const double width = 1.0 - options.t_min;

    struct Job {
        std::size_t seq;
        NoisySequence xt;
    };
    std::vector<std::vector<double>> per_token(val.size());
    std::vector<Job> pending;

    auto flush = [&] {
        if (pending.empty()) return;
        std::vector<TokenSequence> inputs;
        std::vector<double> times;
        for (const auto& job : pending) {
            inputs.push_back(job.xt.tokens);
            times.push_back(job.xt.t);
        }
        const auto logits = model.logits(inputs, times);
        for (std::size_t i = 0; i < pending.size(); ++i) {
            const auto probs = softmax(logits[i]);
            const auto& x0 = val[pending[i].seq];
            double total = 0.0;
            for (std::size_t l = 0; l < length; ++l)
                total += nelbo_token_loss(x0[l], pending[i].xt.tokens[l], pending[i].xt.t, probs.row(static_cast<int>(l)),
                                          vocab, schedule)
                             .value;
            per_token[pending[i].seq].push_back(width * total / static_cast<double>(length));
        }
        pending.clear();
    };

    for (std::size_t s = 0; s < val.size(); ++s) {
        for (double t : stratified_times(m, options.t_min, rng)) {
            pending.push_back({s, corrupt_sequence(val[s], t, vocab, schedule, rng)});
            if (pending.size() == static_cast<std::size_t>(options.batch_size)) flush();
        }
    }
    flush();

    const double count = static_cast<double>(val.size());
    double sum = 0.0;
    for (const auto& ys : per_token)
        for (double y : ys) sum += y;
    const double mean = sum / (count * m);

    double var_of_mean = 0.0;
    if (m >= 2) {
        for (const auto& ys : per_token) {
            double mu = 0.0;
            for (double y : ys) mu += y;
            mu /= m;
            double ss = 0.0;
            for (double y : ys) ss += (y - mu) * (y - mu);
            var_of_mean += ss / (m - 1) / m;
        }
        var_of_mean /= count * count;
    } else if (val.size() >= 2) {
        double ss = 0.0;
        for (const auto& ys : per_token) ss += (ys[0] - mean) * (ys[0] - mean);
        var_of_mean = ss / (count - 1) / count;
    }

    ElboEstimate out;
    out.mean_nelbo = mean;
    out.ppl = std::exp(mean);
    out.std_error = std::sqrt(var_of_mean);
    out.tokens = val.size() * length;
    out.mc_time_samples = m;
    return out;
}

namespace {

/// Per-token NELBO integrand of the uniform predictor, written out for the two
/// cases x_t = x_0 and x_t != x_0.
double uniform_integrand(int v, const NoiseSchedule& schedule, double t) {
    const auto [alpha, alpha_prime] = schedule.at(t);
    const double vd = v;
    const double a = 1.0 + (vd - 1.0) * alpha;  // V alpha x0 + (1 - alpha) at the clean token
    const double b = 1.0 - alpha;               // same at any other token
    const double p_same = alpha + (1.0 - alpha) / vd;
    const double same = vd - vd / a + (vd - 1.0) * (b / a) * std::log(b / a);
    const double diff = b > 0.0 ? vd - vd / b + (a / b) * std::log(a / b) : 0.0;
    return -alpha_prime / (vd * alpha) * (p_same * same + (1.0 - p_same) * diff);
}

}  // namespace

double uniform_model_nelbo(int vocab_size, const NoiseSchedule& schedule, double t_min) {
    if (vocab_size < 2) throw std::invalid_argument("vocab_size must be at least 2");
    if (!(t_min > 0.0 && t_min < 1.0)) throw std::invalid_argument("t_min must lie in (0, 1)");
    // Gauss-Legendre on panels uniform in log t, which resolves the log(1/t)
    // behaviour of the integrand near t = 0.
    static constexpr double kNodes[] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                        0.9061798459386640};
    static constexpr double kWeights[] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                          0.4786286704993665, 0.2369268850561891};
    const int panels = 4000;
    const double lo = std::log(t_min), hi = 0.0, h = (hi - lo) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = lo + (p + 0.5) * h;
        for (int k = 0; k < 5; ++k) {
            const double u = mid + 0.5 * h * kNodes[k];
            const double t = std::exp(u);
            total += 0.5 * h * kWeights[k] * uniform_integrand(vocab_size, schedule, t) * t;
        }
    }
    return total;
}

}  // namespace udiff
