#include "doctest.h"

#include "checks.hpp"
#include "udiff/checkpoint.hpp"
#include "udiff/evaluator.hpp"
#include "udiff/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace udiff;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_train() {
    TrainConfig c;
    c.total_steps = 40;
    c.warmup_steps = 4;
    c.batch_size = 4;
    c.ema_decay = 0.9;
    c.eval_every = 0;
    c.checkpoint_every = 0;
    c.val_sequences = 4;
    c.elbo_mc_samples = 2;
    c.seed = 12;
    return c;
}

std::vector<TokenSequence> windows(int count, int length, int vocab, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TokenSequence> out(count, TokenSequence(length));
    for (auto& w : out)
        for (int l = 0; l < length; ++l) w[l] = static_cast<Token>((l + rng() % 3) % vocab);
    return out;
}

double distance(const ParamSet<float>& a, const ParamSet<float>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].data.size(); ++j) s += std::pow(double(a[i].data[j]) - b[i].data[j], 2);
    return std::sqrt(s);
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("udiff_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("learning rate schedule") {
    TrainConfig c;
    CHECK(lr_at(c, 0) == 0.0);
    CHECK(lr_at(c, c.warmup_steps) == 3e-4);
    CHECK(lr_at(c, (c.warmup_steps + c.total_steps) / 2) == doctest::Approx(1.5e-4).epsilon(1e-12));
    CHECK(lr_at(c, c.total_steps) == 0.0);
    double top = 0.0;
    std::int64_t arg = -1;
    for (std::int64_t s = 0; s <= c.total_steps; ++s) {
        const double lr = lr_at(c, s);
        if (lr > top) {
            top = lr;
            arg = s;
        }
        if (s > 0) CHECK(std::abs(lr - lr_at(c, s - 1)) <= c.lr / c.warmup_steps + 1e-18);
    }
    CHECK(top == 3e-4);
    CHECK(arg == c.warmup_steps);
    c.schedule = LrSchedule::constant;
    CHECK(lr_at(c, c.total_steps - 1) == 3e-4);
}

TEST_CASE("train config validation") {
    TrainConfig c;
    c.warmup_steps = c.total_steps;
    CHECK_THROWS(c.validate());
    c = TrainConfig();
    c.ema_decay = 1.0;
    CHECK_THROWS(c.validate());
    c = TrainConfig();
    c.batch_size = 0;
    CHECK_THROWS(c.validate());
    CHECK_NOTHROW(TrainConfig().validate());
}

TEST_CASE("zero gradients leave parameters unchanged") {
    const auto cfg = tiny_train();
    auto state = make_train_state(testing::tiny_model(7, 8), cfg);
    const auto before = state.params;
    auto grads = state.params.tensors.zeros_like();
    double norm = -1.0;
    REQUIRE(apply_update(state, grads, cfg, 1e-2, norm));
    CHECK(norm == 0.0);
    CHECK(state.params == before);
}

TEST_CASE("zero learning rate keeps parameters and still blends the EMA") {
    auto cfg = tiny_train();
    cfg.lr = 0.0;
    auto state = make_train_state(testing::tiny_model(7, 8), cfg);
    for (auto& t : state.ema.shadow.tensors)
        for (auto& x : t.data) x += 0.5f;
    const auto params = state.params;
    const auto data = windows(8, 8, 7, 1);
    double gap = distance(state.ema.shadow.tensors, state.params.tensors);
    for (int k = 0; k < 5; ++k) {
        const auto shadow = state.ema.shadow;
        train_step(state, sample_batch(data, cfg.batch_size, state.rng), cfg);
        CHECK(state.params == params);
        for (std::size_t i = 0; i < shadow.tensors.size(); ++i)
            for (std::size_t j = 0; j < shadow.tensors[i].data.size(); j += 7) {
                const float expect = static_cast<float>(0.9 * shadow.tensors[i].data[j] + 0.1 * params.tensors[i].data[j]);
                CHECK(state.ema.shadow.tensors[i].data[j] == doctest::Approx(expect).epsilon(1e-6));
            }
        const double next = distance(state.ema.shadow.tensors, state.params.tensors);
        CHECK(next == doctest::Approx(0.9 * gap).epsilon(1e-5));
        gap = next;
    }
}

TEST_CASE("gradient clipping bounds the update norm") {
    auto cfg = tiny_train();
    auto state = make_train_state(testing::tiny_model(7, 8), cfg);
    auto grads = state.params.tensors.zeros_like();
    grads[0].data[0] = 30.0f;
    grads[0].data[1] = 40.0f;
    double norm = 0.0;
    REQUIRE(apply_update(state, grads, cfg, 1e-3, norm));
    CHECK(norm == doctest::Approx(50.0));
    CHECK(state.optim.first_moment[0].data[0] == doctest::Approx(0.1 * 0.6).epsilon(1e-6));
    grads[0].data[0] = std::numeric_limits<float>::quiet_NaN();
    const auto before = state.params;
    CHECK_FALSE(apply_update(state, grads, cfg, 1e-3, norm));
    CHECK(state.params == before);
}

TEST_CASE("training is deterministic and learns a tiny pattern") {
    auto cfg = tiny_train();
    cfg.lr = 3e-3;
    const auto data = windows(16, 8, 7, 2);
    auto run = [&] {
        auto state = make_train_state(testing::tiny_model(7, 8), cfg);
        std::vector<double> losses;
        while (state.step < cfg.total_steps)
            losses.push_back(train_step(state, sample_batch(data, cfg.batch_size, state.rng), cfg).report.value);
        return losses;
    };
    const auto a = run(), b = run();
    CHECK(a == b);
    double early = 0.0, late = 0.0;
    for (int i = 0; i < 10; ++i) {
        early += a[i];
        late += a[a.size() - 1 - i];
    }
    CHECK(late < early);
}

TEST_CASE("every loss variant trains without error") {
    auto cfg = tiny_train();
    cfg.total_steps = 6;
    cfg.warmup_steps = 2;
    cfg.loss.time_samples_per_example = 2;
    const auto data = windows(8, 8, 7, 3);
    for (auto v : {LossVariant::nelbo, LossVariant::rec, LossVariant::sddlm, LossVariant::sddlm_v1, LossVariant::sddlm_v2}) {
        cfg.loss.variant = v;
        auto state = make_train_state(testing::tiny_model(7, 8), cfg);
        while (state.step < cfg.total_steps) {
            const auto r = train_step(state, sample_batch(data, cfg.batch_size, state.rng), cfg);
            CHECK(std::isfinite(r.report.value));
            CHECK_FALSE(r.skipped);
        }
    }
}

TEST_CASE("non-finite losses abort the step and eventually halt") {
    const auto cfg = tiny_train();
    auto state = make_train_state(testing::tiny_model(7, 8), cfg);
    state.params.tensors.get("head.bias").data[0] = std::numeric_limits<float>::quiet_NaN();
    const auto data = windows(8, 8, 7, 4);
    for (int k = 1; k < cfg.max_nonfinite_steps; ++k) {
        const auto r = train_step(state, sample_batch(data, cfg.batch_size, state.rng), cfg);
        CHECK(r.skipped);
        CHECK(state.step == 0);
        CHECK(state.consecutive_nonfinite == k);
    }
    CHECK_THROWS_AS(train_step(state, sample_batch(data, cfg.batch_size, state.rng), cfg), TrainingDiverged);
}

TEST_CASE("train_step checks the window length") {
    const auto cfg = tiny_train();
    auto state = make_train_state(testing::tiny_model(7, 8), cfg);
    CHECK_THROWS(train_step(state, windows(4, 5, 7, 1), cfg));
}

TEST_CASE("validation metrics") {
    const auto cfg = tiny_train();
    auto state = make_train_state(testing::tiny_model(7, 8), cfg);
    const auto val = windows(6, 8, 7, 5);
    const auto m = validate(state, val, cfg);
    CHECK(m.contains("elbo_ppl"));
    CHECK(m.contains("loss"));
    CHECK(m.contains("step"));
    CHECK(validate(state, val, cfg) == m);
    CHECK_THROWS(validate(state, std::vector<TokenSequence>{}, cfg));
}

TEST_CASE("uniform-logit model sits above the uniform floor") {
    auto cfg = tiny_train();
    cfg.elbo_mc_samples = 8;
    cfg.val_sequences = 0;
    auto params = init_params<float>(testing::tiny_model(7, 8), 1);
    for (auto name : {"head.weight", "head.bias"})
        for (auto& x : params.tensors.get(name).data) x = 0.0f;
    const auto val = windows(64, 8, 7, 6);
    const auto m = validate(params, val, cfg, 0);
    REQUIRE(std::isfinite(m.at("elbo_ppl")));
    const double floor = uniform_model_nelbo(7, NoiseSchedule(), 1e-5);
    CHECK(floor < std::log(7.0));
    CHECK(std::log(m.at("elbo_ppl")) >= floor - 3.0 * m.at("elbo_std_error"));
}

TEST_CASE("checkpoint bytes round trip") {
    auto cfg = tiny_train();
    const auto data = windows(8, 8, 7, 7);
    auto state = make_train_state(testing::tiny_model(7, 8), cfg);
    for (int k = 0; k < 3; ++k) train_step(state, sample_batch(data, cfg.batch_size, state.rng), cfg);
    const auto ckpt = make_checkpoint(state, cfg, R"({"note":"x"})");
    const auto bytes = serialize_checkpoint(ckpt);
    const auto parsed = parse_checkpoint(bytes);
    CHECK(parsed == ckpt);
    CHECK(serialize_checkpoint(parsed) == bytes);
    CHECK(bytes.substr(0, 4) == "UDIF");

    const auto dir = scratch("ckpt");
    save_checkpoint(dir / "a.udif", ckpt);
    CHECK(load_checkpoint(dir / "a.udif") == ckpt);

    CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 9)), CheckpointError);
    auto flipped = bytes;
    flipped[flipped.size() / 2] ^= 0x20;
    CHECK_THROWS_WITH_AS(parse_checkpoint(flipped), doctest::Contains("integrity"), CheckpointError);
    auto versioned = bytes;
    versioned[4] = 9;
    CHECK_THROWS_WITH_AS(parse_checkpoint(versioned), doctest::Contains("version"), CheckpointError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(parse_checkpoint(magic), CheckpointError);
    CHECK_THROWS(load_checkpoint(dir / "missing.udif"));
}

TEST_CASE("resume continues the identical trajectory") {
    auto cfg = tiny_train();
    cfg.total_steps = 12;
    const auto data = windows(16, 8, 7, 8);
    auto straight = make_train_state(testing::tiny_model(7, 8), cfg);
    std::vector<double> a, b;
    while (straight.step < cfg.total_steps)
        a.push_back(train_step(straight, sample_batch(data, cfg.batch_size, straight.rng), cfg).report.value);

    auto first = make_train_state(testing::tiny_model(7, 8), cfg);
    while (first.step < 5) b.push_back(train_step(first, sample_batch(data, cfg.batch_size, first.rng), cfg).report.value);
    const auto dir = scratch("resume");
    save_checkpoint(dir / "k.udif", make_checkpoint(first, cfg));
    auto resumed = restore_train_state(load_checkpoint(dir / "k.udif"));
    while (resumed.step < cfg.total_steps)
        b.push_back(train_step(resumed, sample_batch(data, cfg.batch_size, resumed.rng), cfg).report.value);
    CHECK(a == b);
    CHECK(resumed.params == straight.params);
    CHECK(resumed.ema.shadow == straight.ema.shadow);
}

TEST_CASE("train loop writes metrics and checkpoints") {
    auto cfg = tiny_train();
    cfg.total_steps = 6;
    cfg.warmup_steps = 2;
    cfg.eval_every = 3;
    cfg.checkpoint_every = 4;
    const auto data = windows(16, 8, 7, 9);
    const auto val = windows(4, 8, 7, 10);
    auto state = make_train_state(testing::tiny_model(7, 8), cfg);
    const auto dir = scratch("loop");
    LoopOptions options;
    options.output_dir = dir;
    int evals = 0;
    options.on_eval = [&](const Metrics&) { ++evals; };
    train_loop(state, cfg, data, val, options);
    CHECK(evals == 2);
    CHECK(fs::exists(dir / "step_4.udif"));
    CHECK(fs::exists(dir / "step_6.udif"));
    CHECK(load_checkpoint(dir / "latest.udif").step == 6);
    std::ifstream in(dir / "metrics.ndjson");
    int lines = 0, with_elbo = 0;
    for (std::string line; std::getline(in, line); ++lines) with_elbo += line.find("elbo_ppl") != std::string::npos;
    CHECK(lines == 6);
    CHECK(with_elbo == 2);
}
