#include "udiff/verify.hpp"

#include "udiff/diffusion.hpp"

#include <quadmath.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

namespace udiff {

namespace {

struct Tracker {
    OracleResult r;
    Tracker(std::string name, double tol) {
        r.name = std::move(name);
        r.tolerance = tol;
        r.passed = true;
    }
    void check(double err) {
        ++r.cases;
        if (!(err <= r.tolerance)) r.passed = false;
        if (std::isnan(err)) r.worst = err;
        else if (!std::isnan(r.worst)) r.worst = std::max(r.worst, err);
    }
};

std::vector<double> random_dist(int v, Rng& rng, double concentration = 1.0) {
    std::gamma_distribution<double> gamma(concentration, 1.0);
    std::vector<double> p(static_cast<std::size_t>(v));
    double total = 0.0;
    for (auto& x : p) total += (x = gamma(rng) + 1e-300);
    for (auto& x : p) x /= total;
    return p;
}

std::vector<double> one_hot(int v, Token k) {
    std::vector<double> p(static_cast<std::size_t>(v), 0.0);
    p[static_cast<std::size_t>(k)] = 1.0;
    return p;
}

const NoiseSchedule kSchedules[] = {NoiseSchedule(ScheduleKind::linear), NoiseSchedule(ScheduleKind::geometric)};

OracleResult marginal_normalization(Rng& rng) {
    Tracker tr("forward marginal sums to one", 1e-12);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int v : {2, 3, 5, 8, 50, 256}) {
        const Vocab vocab(v);
        for (const auto& schedule : kSchedules) {
            for (int rep = 0; rep < 50; ++rep) {
                const double t = rep == 0 ? 0.0 : rep == 1 ? 1.0 : unit(rng);
                const Token x0 = static_cast<Token>(rng() % static_cast<unsigned>(v));
                const auto m = forward_marginal(x0, t, vocab, schedule);
                double total = 0.0, negative = 0.0;
                for (double p : m) {
                    total += p;
                    negative = std::max(negative, -p);
                }
                tr.check(std::max(std::abs(total - 1.0), negative));
            }
        }
    }
    return tr.r;
}

/// q(x_s | x_t, x0 ~ d) by Bayes' rule over explicit transition matrices.
std::vector<double> bayes_posterior(Token xt, const std::vector<double>& d, double alpha_t, double alpha_s) {
    const int v = static_cast<int>(d.size());
    const double a_ts = alpha_t / alpha_s;
    std::vector<double> out(static_cast<std::size_t>(v));
    double evidence = 0.0;
    for (int xs = 0; xs < v; ++xs) {
        const double forward = a_ts * (xt == xs) + (1.0 - a_ts) / v;
        double prior = 0.0;
        for (int x0 = 0; x0 < v; ++x0) prior += d[static_cast<std::size_t>(x0)] * (alpha_s * (xs == x0) + (1.0 - alpha_s) / v);
        out[static_cast<std::size_t>(xs)] = forward * prior;
        evidence += forward * prior;
    }
    for (auto& x : out) x /= evidence;
    return out;
}

OracleResult posterior_bayes(Rng& rng) {
    Tracker tr("posterior equals Bayes enumeration", 1e-9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int v = 2; v <= 8; ++v) {
        const Vocab vocab(v);
        for (const auto& schedule : kSchedules) {
            for (int rep = 0; rep < 40; ++rep) {
                double t = unit(rng), s = unit(rng);
                if (s > t) std::swap(s, t);
                const auto d = rep % 2 == 0 ? one_hot(v, static_cast<Token>(rng() % static_cast<unsigned>(v)))
                                            : random_dist(v, rng);
                const Token xt = static_cast<Token>(rng() % static_cast<unsigned>(v));
                const auto got = posterior_step(xt, d, t, s, vocab, schedule);
                const auto want = bayes_posterior(xt, d, schedule.at(t).alpha, schedule.at(s).alpha);
                double err = 0.0;
                for (int j = 0; j < v; ++j) err = std::max(err, std::abs(got[static_cast<std::size_t>(j)] - want[static_cast<std::size_t>(j)]));
                tr.check(err);
            }
        }
    }
    return tr.r;
}

OracleResult chapman_kolmogorov(Rng& rng) {
    Tracker tr("posterior Chapman-Kolmogorov composition", 1e-9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int v = 2; v <= 8; ++v) {
        const Vocab vocab(v);
        for (const auto& schedule : kSchedules) {
            for (int rep = 0; rep < 30; ++rep) {
                double times[3] = {unit(rng), unit(rng), unit(rng)};
                std::sort(times, times + 3);
                const double r = times[0], s = times[1], t = times[2];
                const auto x0 = one_hot(v, static_cast<Token>(rng() % static_cast<unsigned>(v)));
                const Token xt = static_cast<Token>(rng() % static_cast<unsigned>(v));
                const auto direct = posterior_step(xt, x0, t, r, vocab, schedule);
                const auto first = posterior_step(xt, x0, t, s, vocab, schedule);
                std::vector<double> composed(static_cast<std::size_t>(v), 0.0);
                for (int xs = 0; xs < v; ++xs) {
                    const auto second = posterior_step(xs, x0, s, r, vocab, schedule);
                    for (int xr = 0; xr < v; ++xr)
                        composed[static_cast<std::size_t>(xr)] += first[static_cast<std::size_t>(xs)] * second[static_cast<std::size_t>(xr)];
                }
                double err = 0.0;
                for (int j = 0; j < v; ++j) err = std::max(err, std::abs(direct[static_cast<std::size_t>(j)] - composed[static_cast<std::size_t>(j)]));
                tr.check(err);
            }
        }
    }
    return tr.r;
}

OracleResult posterior_identity(Rng& rng) {
    Tracker tr("posterior at s = t is the identity", 1e-12);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int v : {2, 4, 8, 32}) {
        const Vocab vocab(v);
        for (const auto& schedule : kSchedules) {
            for (int rep = 0; rep < 25; ++rep) {
                const double t = unit(rng);
                const auto d = random_dist(v, rng);
                const Token xt = static_cast<Token>(rng() % static_cast<unsigned>(v));
                const auto got = posterior_step(xt, d, t, t, vocab, schedule);
                double err = 0.0;
                for (int j = 0; j < v; ++j) err = std::max(err, std::abs(got[static_cast<std::size_t>(j)] - (j == xt ? 1.0 : 0.0)));
                tr.check(err);
            }
        }
    }
    return tr.r;
}

OracleResult posterior_collapse(Rng& rng) {
    Tracker tr("posterior at s = 0 collapses onto one-hot x0", 1e-12);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int v : {2, 4, 8, 32}) {
        const Vocab vocab(v);
        for (const auto& schedule : kSchedules) {
            for (int rep = 0; rep < 25; ++rep) {
                const Token k = static_cast<Token>(rng() % static_cast<unsigned>(v));
                const Token xt = static_cast<Token>(rng() % static_cast<unsigned>(v));
                const auto got = posterior_step(xt, one_hot(v, k), unit(rng), 0.0, vocab, schedule);
                double err = 0.0;
                for (int j = 0; j < v; ++j) err = std::max(err, std::abs(got[static_cast<std::size_t>(j)] - (j == k ? 1.0 : 0.0)));
                tr.check(err);
            }
        }
    }
    return tr.r;
}

/// The published integrand written out term by term in quad precision, then
/// negated so the result is the non-negative divergence minimized in training.
double nelbo_transcription(Token x0, Token xt, double alpha_d, double alpha_prime_d, const std::vector<double>& x_theta) {
    using Q = __float128;
    const int V = static_cast<int>(x_theta.size());
    const Q alpha = alpha_d, alpha_prime = alpha_prime_d;
    std::vector<Q> x_tilde(static_cast<std::size_t>(V)), x_tilde_theta(static_cast<std::size_t>(V));
    for (int j = 0; j < V; ++j) {
        x_tilde[static_cast<std::size_t>(j)] = V * alpha * (j == x0 ? 1 : 0) + (1 - alpha) * 1;
        x_tilde_theta[static_cast<std::size_t>(j)] = V * alpha * Q(x_theta[static_cast<std::size_t>(j)]) + (1 - alpha) * 1;
    }
    const int i = xt;
    Q sum = 0;
    for (int j = 0; j < V; ++j)
        sum += x_tilde[static_cast<std::size_t>(j)] / x_tilde[static_cast<std::size_t>(i)] *
               logq(x_tilde_theta[static_cast<std::size_t>(i)] * x_tilde[static_cast<std::size_t>(j)] /
                    (x_tilde_theta[static_cast<std::size_t>(j)] * x_tilde[static_cast<std::size_t>(i)]));
    const Q bracket = V / x_tilde[static_cast<std::size_t>(i)] - V / x_tilde_theta[static_cast<std::size_t>(i)] - sum;
    const Q published = -alpha_prime / (V * alpha) * bracket;
    return static_cast<double>(-published);
}

OracleResult nelbo_vs_transcription(Rng& rng) {
    Tracker tr("NELBO matches independent transcription", 1e-9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> vocab_size(2, 50);
    for (int rep = 0; rep < 1000; ++rep) {
        const int v = vocab_size(rng);
        const Vocab vocab(v);
        const auto& schedule = kSchedules[rep % 2];
        const double t = 0.001 + 0.998 * unit(rng);
        const Token x0 = static_cast<Token>(rng() % static_cast<unsigned>(v));
        const Token xt = rep % 3 == 0 ? x0 : static_cast<Token>(rng() % static_cast<unsigned>(v));
        const auto probs = random_dist(v, rng, rep % 4 == 0 ? 0.2 : 1.0);
        const double got = nelbo_token_loss(x0, xt, t, probs, vocab, schedule).value;
        const auto a = schedule.at(t);
        const double want = nelbo_transcription(x0, xt, a.alpha, a.alpha_prime, probs);
        tr.check(std::abs(got - want) / std::max(std::abs(want), 1e-300));
    }
    return tr.r;
}

OracleResult nelbo_sign(Rng& rng) {
    Tracker tr("NELBO non-negative, zero at the clean token", 1e-12);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int rep = 0; rep < 500; ++rep) {
        const int v = 2 + static_cast<int>(rng() % 20);
        const Vocab vocab(v);
        const auto& schedule = kSchedules[rep % 2];
        const double t = 0.001 + 0.998 * unit(rng);
        const Token x0 = static_cast<Token>(rng() % static_cast<unsigned>(v));
        const Token xt = static_cast<Token>(rng() % static_cast<unsigned>(v));
        const double value = nelbo_token_loss(x0, xt, t, random_dist(v, rng), vocab, schedule).value;
        tr.check(std::max(0.0, -value));
        tr.check(std::abs(nelbo_token_loss(x0, xt, t, one_hot(v, x0), vocab, schedule).value));
    }
    return tr.r;
}

/// With one position the ideal denoiser is the data marginal, and the
/// integrated NELBO must equal -log p(x0) exactly.
OracleResult nelbo_tightness(Rng& rng) {
    Tracker tr("integrated NELBO equals -log p at the ideal denoiser", 1e-6);
    static constexpr double kNodes[] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                        0.9061798459386640};
    static constexpr double kWeights[] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                          0.4786286704993665, 0.2369268850561891};
    for (int v : {2, 3, 5}) {
        const Vocab vocab(v);
        for (const auto& schedule : kSchedules) {
            const auto p = random_dist(v, rng);
            const int panels = 800;
            const double lo = std::log(1e-13), h = -lo / panels;
            for (Token x0 = 0; x0 < v; ++x0) {
                double integral = 0.0;
                for (int k = 0; k < panels; ++k) {
                    for (int q = 0; q < 5; ++q) {
                        const double t = std::exp(lo + (k + 0.5) * h + 0.5 * h * kNodes[q]);
                        const auto marginal = forward_marginal(x0, t, vocab, schedule);
                        double expected = 0.0;
                        for (Token xt = 0; xt < v; ++xt)
                            expected += marginal[static_cast<std::size_t>(xt)] *
                                        nelbo_token_loss(x0, xt, t, p, vocab, schedule).value;
                        integral += 0.5 * h * kWeights[q] * expected * t;
                    }
                }
                tr.check(std::abs(integral + std::log(p[static_cast<std::size_t>(x0)])));
            }
        }
    }
    return tr.r;
}

struct Instance {
    TokenSequence x0;
    NoisySequence xt;
    CategoricalGrid grid;
};

Instance random_instance(Rng& rng) {
    const int v = 2 + static_cast<int>(rng() % 15);
    const int length = 1 + static_cast<int>(rng() % 12);
    const Vocab vocab(v);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Instance inst;
    inst.x0.resize(static_cast<std::size_t>(length));
    for (auto& x : inst.x0) x = static_cast<Token>(rng() % static_cast<unsigned>(v));
    inst.xt = corrupt_sequence(inst.x0, 0.05 + 0.95 * unit(rng), vocab, NoiseSchedule(), rng);
    inst.grid = CategoricalGrid(length, v);
    for (int l = 0; l < length; ++l) {
        const auto p = random_dist(v, rng);
        std::copy(p.begin(), p.end(), inst.grid.row(l).begin());
    }
    return inst;
}

OracleResult sddlm_subset(Rng& rng) {
    Tracker tr("SDDLM equals reconstruction on the corrupted subset", 1e-12);
    for (int rep = 0; rep < 300; ++rep) {
        const auto inst = random_instance(rng);
        TokenSequence sub_x0;
        NoisySequence sub_xt;
        sub_xt.t = inst.xt.t;
        std::vector<int> rows;
        for (std::size_t l = 0; l < inst.x0.size(); ++l) {
            if (inst.x0[l] == inst.xt.tokens[l]) continue;
            sub_x0.push_back(inst.x0[l]);
            sub_xt.tokens.push_back(inst.xt.tokens[l]);
            sub_xt.corrupted_mask.push_back(true);
            rows.push_back(static_cast<int>(l));
        }
        const double sddlm = sddlm_loss(inst.x0, inst.xt, inst.grid).value;
        double rec = 0.0;
        if (!rows.empty()) {
            CategoricalGrid sub(static_cast<int>(rows.size()), inst.grid.vocab);
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const auto src = inst.grid.row(rows[k]);
                std::copy(src.begin(), src.end(), sub.row(static_cast<int>(k)).begin());
            }
            rec = reconstruction_loss(sub_x0, sub_xt, sub).value;
        }
        tr.check(std::abs(sddlm - rec) / std::max(1.0, std::abs(rec)));
    }
    return tr.r;
}

OracleResult contrastive_reduction(Rng& rng) {
    Tracker tr("V1/V2 reduce to SDDLM without the negative term", 1e-12);
    for (int rep = 0; rep < 300; ++rep) {
        const auto inst = random_instance(rng);
        LossConfig config;
        config.negative_coefficient = 0.0;
        config.variant = rep % 2 ? LossVariant::sddlm_v1 : LossVariant::sddlm_v2;
        const double sddlm = sddlm_loss(inst.x0, inst.xt, inst.grid).value;
        const double contrast = rep % 2 ? sddlm_v1_loss(inst.x0, inst.xt, inst.grid, config, rng).value
                                        : sddlm_v2_loss(inst.x0, inst.xt, inst.grid, config).value;
        double shifted = 0.0, bound = 0.0;
        for (std::size_t l = 0; l < inst.x0.size(); ++l) {
            if (inst.x0[l] == inst.xt.tokens[l]) continue;
            const double p = inst.grid.at(static_cast<int>(l), inst.x0[l]);
            shifted += -std::log(p + config.epsilon);
            bound += config.epsilon / p;
        }
        tr.check(std::abs(contrast - shifted) / std::max(1.0, std::abs(shifted)));
        tr.check(std::max(0.0, std::abs(contrast - sddlm) - bound));
    }
    return tr.r;
}

}  // namespace

std::vector<OracleResult> run_oracles(std::uint64_t seed) {
    Rng rng(seed);
    const std::function<OracleResult(Rng&)> oracles[] = {
        marginal_normalization, posterior_bayes,        chapman_kolmogorov, posterior_identity,
        posterior_collapse,     nelbo_vs_transcription, nelbo_sign,         nelbo_tightness,
        sddlm_subset,           contrastive_reduction};
    std::vector<OracleResult> results;
    for (const auto& oracle : oracles) results.push_back(oracle(rng));
    return results;
}

void print_oracle_table(const std::vector<OracleResult>& results, std::ostream& out) {
    char line[256];
    std::snprintf(line, sizeof line, "%-55s %6s %8s %12s %10s\n", "oracle", "result", "cases", "worst", "tolerance");
    out << line;
    for (const auto& r : results) {
        std::snprintf(line, sizeof line, "%-55s %6s %8d %12.3e %10.1e\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                      r.cases, r.worst, r.tolerance);
        out << line;
    }
}

}  // namespace udiff
