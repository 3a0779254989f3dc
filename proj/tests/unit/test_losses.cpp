#include "doctest.h"

#include "checks.hpp"
#include "udiff/diffusion.hpp"

#include <cmath>

using namespace udiff;

namespace {

NoisySequence noisy(TokenSequence tokens, const TokenSequence& x0, double t = 0.5) {
    NoisySequence n;
    n.t = t;
    n.corrupted_mask.resize(tokens.size());
    for (std::size_t l = 0; l < tokens.size(); ++l) n.corrupted_mask[l] = tokens[l] != x0[l];
    n.tokens = std::move(tokens);
    return n;
}

CategoricalGrid random_grid(int length, int vocab, Rng& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    CategoricalGrid g(length, vocab);
    for (int l = 0; l < length; ++l) {
        double z = 0.0;
        for (auto& x : g.row(l)) z += (x = u(rng));
        for (auto& x : g.row(l)) x /= z;
    }
    return g;
}

}  // namespace

TEST_CASE("reconstruction loss examples") {
    TokenSequence x0(128);
    for (int l = 0; l < 128; ++l) x0[l] = (l * 37) % 256;
    const auto xt = noisy(x0, x0);
    CHECK(reconstruction_loss(x0, xt, CategoricalGrid::uniform(128, 256)).value ==
          doctest::Approx(128 * std::log(256.0)).epsilon(1e-12));
    CHECK(reconstruction_loss(x0, xt, CategoricalGrid::one_hot(x0, 256)).value == 0.0);

    Rng rng(1);
    const TokenSequence small{4, 0, 2};
    const auto g = random_grid(3, 5, rng);
    const double by_hand = -std::log(g.at(0, 4)) - std::log(g.at(1, 0)) - std::log(g.at(2, 2));
    CHECK(reconstruction_loss(small, noisy(small, small), g).value == doctest::Approx(by_hand).epsilon(1e-14));
}

TEST_CASE("sddlm loss examples") {
    const TokenSequence x0{1, 2, 3, 4};
    const auto clean = noisy(x0, x0);
    auto r = sddlm_loss(x0, clean, CategoricalGrid::uniform(4, 6));
    CHECK(r.value == 0.0);
    CHECK(r.corrupted_count == 0);

    const auto xt = noisy({0, 2, 5, 4}, x0);
    r = sddlm_loss(x0, xt, CategoricalGrid::uniform(4, 6));
    CHECK(r.corrupted_count == 2);
    CHECK(r.value == doctest::Approx(2 * std::log(6.0)).epsilon(1e-14));

    Rng rng(2);
    const auto g = random_grid(4, 6, rng);
    CHECK(sddlm_loss(x0, xt, g).value == -std::log(g.at(0, 1)) - std::log(g.at(2, 3)));
}

TEST_CASE("losses stay finite on rows with exact zeros") {
    const TokenSequence x0{0, 1};
    const auto xt = noisy({1, 0}, x0);
    CategoricalGrid g(2, 3);
    g.at(0, 2) = 1.0;
    g.at(1, 2) = 1.0;
    LossConfig c;
    CHECK(std::isfinite(reconstruction_loss(x0, xt, g).value));
    CHECK(sddlm_loss(x0, xt, g).value == doctest::Approx(-2 * std::log(kLogClamp)));
    Rng rng(1);
    CHECK(std::isfinite(sddlm_v1_loss(x0, xt, g, c, rng).value));
    CHECK(std::isfinite(sddlm_v2_loss(x0, xt, g, c).value));
    c.epsilon_positive_only = true;
    CHECK(std::isfinite(sddlm_v1_loss(x0, xt, g, c, rng).value));
    CHECK(std::isfinite(sddlm_v2_loss(x0, xt, g, c).value));
}

TEST_CASE("contrastive variants on a uniform grid") {
    const TokenSequence x0{1, 2, 3, 4};
    const auto xt = noisy({0, 2, 5, 1}, x0);
    const auto g = CategoricalGrid::uniform(4, 6);
    LossConfig c;
    Rng rng(3);
    const auto v1 = sddlm_v1_loss(x0, xt, g, c, rng);
    CHECK(v1.value == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(v1.corrupted_count == 3);
    CHECK(v1.positive_term == doctest::Approx(-3 * std::log(1.0 / 6 + c.epsilon)));
    CHECK(sddlm_v2_loss(x0, xt, g, c).value == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(sddlm_v2_loss(x0, noisy(x0, x0), g, c).value == 0.0);
}

TEST_CASE("v1 replays recorded negatives") {
    const TokenSequence x0{1, 2, 3, 4};
    const auto xt = noisy({0, 2, 5, 1}, x0);
    Rng rng(4);
    const auto g = random_grid(4, 6, rng);
    LossConfig c;
    Rng a(99), b(99);
    const auto negatives = draw_negatives(x0, xt, 6, c, a);
    CHECK(negatives[1] == -1);
    const auto r = sddlm_v1_loss(x0, xt, g, c, b);
    double by_hand = 0.0;
    for (int l : {0, 2, 3})
        by_hand += -std::log(g.at(l, x0[l]) + c.epsilon) + std::log(g.at(l, negatives[l]) + c.epsilon);
    CHECK(r.value == doctest::Approx(by_hand).epsilon(1e-14));
    CHECK(sddlm_v1_loss(x0, xt, g, c, negatives).value == r.value);
}

TEST_CASE("excluding the target from negatives") {
    const TokenSequence x0(200, 1);
    TokenSequence t(200, 0);
    const auto xt = noisy(t, x0);
    LossConfig c;
    c.exclude_target_negative = true;
    Rng rng(5);
    for (Token n : draw_negatives(x0, xt, 2, c, rng)) CHECK(n == 0);
}

TEST_CASE("v2 on a confident correct prediction is strongly negative") {
    const TokenSequence x0{1, 2};
    const auto xt = noisy({0, 3}, x0);
    const double floor = 1e-6;
    CategoricalGrid g(2, 4, floor);
    g.at(0, 1) = 1.0 - 3 * floor;
    g.at(1, 2) = 1.0 - 3 * floor;
    LossConfig c;
    const auto r = sddlm_v2_loss(x0, xt, g, c);
    CHECK(std::abs(r.positive_term) < 1e-3);
    CHECK(r.negative_term == doctest::Approx(2 * std::log(floor + 1e-4)).epsilon(1e-12));
    CHECK(r.value < -18.0);
}

TEST_CASE("disabling the negative term reduces v1 and v2 to sddlm") {
    Rng rng(6);
    const TokenSequence x0{1, 2, 3, 4, 5};
    const auto xt = noisy({0, 2, 5, 1, 5}, x0);
    const auto g = random_grid(5, 6, rng);
    LossConfig c;
    c.negative_coefficient = 0.0;
    const double base = sddlm_loss(x0, xt, g).value;
    double p_min = 1.0;
    for (int l = 0; l < 5; ++l) p_min = std::min(p_min, g.at(l, x0[l]));
    const double bound = 5 * c.epsilon / p_min;
    const double v1 = sddlm_v1_loss(x0, xt, g, c, rng).value;
    const double v2 = sddlm_v2_loss(x0, xt, g, c).value;
    CHECK(v1 <= base);
    CHECK(base - v1 <= bound);
    CHECK(v2 == v1);
}

TEST_CASE("batch reduction and batching equivalence") {
    Rng rng(7);
    const Vocab v(6);
    const NoiseSchedule s;
    std::vector<TokenSequence> x0;
    std::vector<NoisySequence> xt;
    std::vector<CategoricalGrid> grids;
    for (int b = 0; b < 3; ++b) {
        TokenSequence seq(5);
        for (auto& x : seq) x = static_cast<Token>(rng() % 6);
        x0.push_back(seq);
        xt.push_back(corrupt_sequence(seq, 0.4 + 0.2 * b, v, s, rng));
        grids.push_back(random_grid(5, 6, rng));
    }
    for (auto variant : {LossVariant::nelbo, LossVariant::rec, LossVariant::sddlm, LossVariant::sddlm_v1,
                         LossVariant::sddlm_v2}) {
        LossConfig c;
        c.variant = variant;
        Rng a(1), b(1);
        const auto batch = batch_loss(x0, xt, grids, c, v, s, a);
        double sum = 0.0;
        int corrupted = 0;
        for (int i = 0; i < 3; ++i) {
            double value = 0.0;
            switch (variant) {
                case LossVariant::nelbo:
                    for (int l = 0; l < 5; ++l)
                        value += nelbo_token_loss(x0[i][l], xt[i].tokens[l], xt[i].t, grids[i].row(l), v, s).value;
                    break;
                case LossVariant::rec: value = reconstruction_loss(x0[i], xt[i], grids[i]).value; break;
                case LossVariant::sddlm: value = sddlm_loss(x0[i], xt[i], grids[i]).value; break;
                case LossVariant::sddlm_v1: value = sddlm_v1_loss(x0[i], xt[i], grids[i], c, b).value; break;
                case LossVariant::sddlm_v2: value = sddlm_v2_loss(x0[i], xt[i], grids[i], c).value; break;
            }
            sum += value;
            corrupted += xt[i].corrupted_count();
        }
        const bool per_corrupted = variant != LossVariant::nelbo && variant != LossVariant::rec;
        CHECK(batch.value == doctest::Approx(sum / (per_corrupted ? corrupted : 15)).epsilon(1e-12));
    }

    LossConfig c;
    Rng r(1);
    const std::vector<TokenSequence> one{x0[0]}, two{x0[0], x0[0]};
    const std::vector<NoisySequence> n1{xt[0]}, n2{xt[0], xt[0]};
    const std::vector<CategoricalGrid> g1{grids[0]}, g2{grids[0], grids[0]};
    CHECK(batch_loss(two, n2, g2, c, v, s, r).value == doctest::Approx(batch_loss(one, n1, g1, c, v, s, r).value));

    const std::vector<NoisySequence> clean{noisy(x0[0], x0[0], 1e-3)};
    const auto zero = batch_loss(one, clean, g1, c, v, s, r);
    CHECK(zero.value == 0.0);
    CHECK(zero.corrupted_count == 0);

    const std::vector<TokenSequence> ragged{x0[0], TokenSequence(4, 0)};
    CHECK_THROWS(batch_loss(ragged, n2, g2, c, v, s, r));
}

TEST_CASE("loss gradients match central differences on a 3x8 grid") {
    for (auto variant : {LossVariant::nelbo, LossVariant::rec, LossVariant::sddlm, LossVariant::sddlm_v1,
                         LossVariant::sddlm_v2}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto r = testing::loss_gradient_check(variant, seed);
            INFO(to_string(variant), " seed ", seed, " at ", r.worst_at);
            CHECK(r.checked == 24);
            CHECK(r.worst <= 1e-4);
        }
    }
}

TEST_CASE("loss gradients with mean over all positions and positive-only epsilon") {
    Rng rng(8);
    const Vocab v(8);
    const NoiseSchedule s;
    const std::vector<TokenSequence> x0{{1, 2, 3}};
    const std::vector<NoisySequence> xt{noisy({1, 5, 0}, x0[0], 0.6)};
    LogitGrid logits(3, 8);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& x : logits.values) x = n(rng);
    for (auto variant : {LossVariant::sddlm_v1, LossVariant::sddlm_v2}) {
        LossConfig c;
        c.variant = variant;
        c.reduction = Reduction::mean_over_all;
        c.epsilon_positive_only = true;
        auto value = [&](const LogitGrid& lg) {
            Rng r(2);
            const std::vector<CategoricalGrid> g{softmax(lg)};
            return batch_loss(x0, xt, g, c, v, s, r).value;
        };
        Rng r(2);
        const std::vector<LogitGrid> lg{logits};
        const auto analytic = batch_loss_with_grad(x0, xt, lg, c, v, s, r);
        CHECK(analytic.report.value == doctest::Approx(value(logits)).epsilon(1e-12));
        for (std::size_t i = 0; i < logits.values.size(); ++i) {
            auto plus = logits, minus = logits;
            plus.values[i] += 1e-5;
            minus.values[i] -= 1e-5;
            const double fd = (value(plus) - value(minus)) / 2e-5;
            CHECK(testing::relative_error(analytic.grad[0].values[i], fd) <= 1e-4);
        }
    }
}

TEST_CASE("loss config validation and names") {
    LossConfig c;
    c.epsilon = 0.0;
    CHECK_THROWS(c.validate());
    for (auto v : {LossVariant::nelbo, LossVariant::rec, LossVariant::sddlm, LossVariant::sddlm_v1, LossVariant::sddlm_v2})
        CHECK(parse_loss_variant(to_string(v)) == v);
    CHECK_THROWS(parse_loss_variant("mdlm"));
}
