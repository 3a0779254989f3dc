#include "doctest.h"

#include "checks.hpp"
#include "udiff/denoiser.hpp"
#include "udiff/logit_model.hpp"

#include <cmath>

using namespace udiff;

namespace {

template <typename S>
void jitter(DenoiserParams<S>& p, std::uint64_t seed, double scale = 0.1) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    for (auto& t : p.tensors)
        for (auto& x : t.data) x += static_cast<S>(n(rng));
}

std::int64_t closed_form_count(std::int64_t v, std::int64_t d, std::int64_t layers, std::int64_t te, std::int64_t tf,
                               std::int64_t ratio) {
    const std::int64_t m = ratio * d;
    const std::int64_t time = tf * te + te + te * te + te;
    const std::int64_t block = te * 6 * d + 6 * d + 4 * d * d + 2 * d * m + m + d;
    return v * d + time + layers * block + te * 2 * d + 2 * d + d * v + v;
}

}  // namespace

TEST_CASE("count_params arithmetic") {
    ParamSet<float> empty;
    CHECK(count_params(empty) == 0);
    ParamSet<float> one;
    one.add("w", {384, 384});
    CHECK(count_params(one) == 147456);
}

TEST_CASE("desk model size") {
    ModelConfig c;
    c.vocab_size = 80;
    const auto p = init_params<float>(c, 0);
    const auto n = count_params(p);
    CHECK(n == closed_form_count(80, 384, 6, 128, 256, 4));
    CHECK(n >= 8'000'000);
    CHECK(n <= 30'000'000);
}

TEST_CASE("config validation") {
    ModelConfig c;
    c.vocab_size = 10;
    c.heads = 5;
    CHECK_THROWS(c.validate());
    c.heads = 6;
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("init is deterministic and zero-modulated") {
    const auto c = testing::tiny_model(9, 6);
    const auto a = init_params<float>(c, 4), b = init_params<float>(c, 4), other = init_params<float>(c, 5);
    CHECK(a == b);
    CHECK_FALSE(a == other);
    for (const auto& t : a.tensors)
        if (t.name.find("adaln") != std::string::npos)
            for (float x : t.data) CHECK(x == 0.0f);

    const Denoiser<float> model(a);
    const std::vector<TokenSequence> batch{{1, 2, 3, 4, 5, 6}};
    const std::vector<double> t1{0.1}, t2{0.9};
    CHECK(model.forward(batch, t1) == model.forward(batch, t2));
}

TEST_CASE("forward rows normalize and respond to t") {
    auto p = init_params<float>(testing::tiny_model(9, 6), 1);
    jitter(p, 2);
    const Denoiser<float> model(p);
    const std::vector<TokenSequence> batch{{1, 2, 3, 4, 5, 6}, {0, 0, 8, 8, 1, 1}};
    const std::vector<double> t1{0.1, 0.1}, t2{0.9, 0.9};
    const auto a = model.forward(batch, t1), b = model.forward(batch, t2);
    CHECK(a.rows() == 12);
    CHECK(a.cols() == 9);
    CHECK((a - b).cwiseAbs().maxCoeff() > 0.0f);
    for (const auto& g : split_logits(a, 2, 6)) {
        const auto probs = softmax(g);
        CHECK(probs.is_normalized(1e-5));
    }
    CHECK(model.forward(batch, t1) == a);
}

TEST_CASE("forward rejects bad shapes") {
    const auto p = init_params<float>(testing::tiny_model(9, 6), 1);
    const Denoiser<float> model(p);
    const std::vector<double> t{0.5};
    CHECK_THROWS(model.forward({TokenSequence(7, 0)}, t));
    CHECK_THROWS(model.forward({TokenSequence(6, 9)}, t));
    const std::vector<double> bad{1.5};
    CHECK_THROWS(model.forward({TokenSequence(6, 0)}, bad));
}

TEST_CASE("attention is equivariant under consistent position permutation") {
    auto p = init_params<double>(testing::tiny_model(9, 6), 3);
    jitter(p, 4);
    const Denoiser<double> model(p);
    const TokenSequence seq{1, 7, 3, 2, 5, 4};
    const std::vector<int> perm{3, 0, 5, 1, 2, 4};
    TokenSequence permuted(6);
    for (int l = 0; l < 6; ++l) permuted[l] = seq[perm[l]];
    const std::vector<double> t{0.4};
    ForwardOptions options;
    options.positions = perm;
    const auto base = model.forward({seq}, t);
    const auto moved = model.forward({permuted}, t, options);
    for (int l = 0; l < 6; ++l) CHECK((moved.row(l) - base.row(perm[l])).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("dropout only in training mode and reproducible") {
    auto c = testing::tiny_model(9, 6);
    c.dropout = 0.3;
    auto p = init_params<float>(c, 1);
    jitter(p, 6);
    const Denoiser<float> model(p);
    const std::vector<TokenSequence> batch{{1, 2, 3, 4, 5, 6}};
    const std::vector<double> t{0.5};
    std::mt19937_64 a(1), b(1);
    ForwardOptions train{true, &a, {}};
    ForwardOptions again{true, &b, {}};
    const auto x = model.forward(batch, t, train), y = model.forward(batch, t, again);
    CHECK(x == y);
    CHECK_FALSE(x == model.forward(batch, t));
    ForwardOptions missing{true, nullptr, {}};
    CHECK_THROWS(model.forward(batch, t, missing));
}

TEST_CASE("end-to-end gradient spot check") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto r = testing::denoiser_gradient_check(seed, 16);
        INFO("seed ", seed, " worst at ", r.worst_at);
        CHECK(r.worst <= 1e-3);
    }
}

TEST_CASE("float and double forward agree") {
    auto p = init_params<double>(testing::tiny_model(9, 6), 8);
    jitter(p, 9);
    const auto pf = p.cast<float>();
    const std::vector<TokenSequence> batch{{1, 2, 3, 4, 5, 6}};
    const std::vector<double> t{0.3};
    const auto d = Denoiser<double>(p).forward(batch, t);
    const auto f = Denoiser<float>(pf).forward(batch, t);
    CHECK((d - f.cast<double>()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("logit model adapter splits batches") {
    auto p = init_params<float>(testing::tiny_model(9, 6), 1);
    jitter(p, 2);
    const DenoiserLogitModel small(p, 2), big(p, 64);
    std::vector<TokenSequence> batch;
    std::vector<double> t;
    for (int b = 0; b < 5; ++b) {
        batch.push_back({b, 1, 2, 3, 4, 8 - b});
        t.push_back(0.1 * (b + 1));
    }
    const auto x = small.logits(batch, t), y = big.logits(batch, t);
    REQUIRE(x.size() == 5);
    for (int b = 0; b < 5; ++b)
        for (std::size_t i = 0; i < x[b].values.size(); ++i) CHECK(x[b].values[i] == doctest::Approx(y[b].values[i]).epsilon(1e-6));
}
