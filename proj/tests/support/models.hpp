#pragma once

#include "udiff/diffusion.hpp"
#include "udiff/logit_model.hpp"

#include <cmath>
#include <vector>

namespace udiff::testing {

/// All-zero logits; counts forward calls.
class UniformLogits final : public LogitModel {
public:
    explicit UniformLogits(int vocab) : vocab_(vocab) {}
    int vocab_size() const override { return vocab_; }
    std::vector<LogitGrid> logits(const std::vector<TokenSequence>& batch, std::span<const double>) const override {
        ++calls;
        std::vector<LogitGrid> out;
        for (const auto& s : batch) out.emplace_back(static_cast<int>(s.size()), vocab_);
        return out;
    }
    mutable int calls = 0;

private:
    int vocab_;
};

/// Predicts the same one-hot sequence at every time.
class FixedPrediction final : public LogitModel {
public:
    FixedPrediction(TokenSequence target, int vocab) : target_(std::move(target)), vocab_(vocab) {}
    int vocab_size() const override { return vocab_; }
    std::vector<LogitGrid> logits(const std::vector<TokenSequence>& batch, std::span<const double>) const override {
        std::vector<LogitGrid> out;
        for (const auto& s : batch) {
            LogitGrid g(static_cast<int>(s.size()), vocab_, -1e4);
            for (int l = 0; l < g.length; ++l) g.at(l, target_[l % target_.size()]) = 0.0;
            out.push_back(std::move(g));
        }
        return out;
    }

private:
    TokenSequence target_;
    int vocab_;
};

/// Logits that depend on the noisy tokens and t, so sampling has real work to do.
class HashedLogits final : public LogitModel {
public:
    explicit HashedLogits(int vocab) : vocab_(vocab) {}
    int vocab_size() const override { return vocab_; }
    std::vector<LogitGrid> logits(const std::vector<TokenSequence>& batch, std::span<const double> t) const override {
        std::vector<LogitGrid> out;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const auto& s = batch[b];
            LogitGrid g(static_cast<int>(s.size()), vocab_);
            for (int l = 0; l < g.length; ++l) {
                const int prev = s[(l + s.size() - 1) % s.size()];
                for (int v = 0; v < vocab_; ++v) g.at(l, v) = std::sin(1.3 * v + 0.7 * prev + 2.0 * t[b] + l);
            }
            out.push_back(std::move(g));
        }
        return out;
    }

private:
    int vocab_;
};

/// Exact per-position denoiser for a known joint distribution over 2-token
/// sequences: logits are log P(x0^l | x_t^{other}, t).
class TwoTokenTruth final : public LogitModel {
public:
    TwoTokenTruth(std::vector<double> joint, int vocab, NoiseSchedule schedule = NoiseSchedule())
        : joint_(std::move(joint)), vocab_(vocab), schedule_(schedule) {}
    int vocab_size() const override { return vocab_; }
    double p(int a, int b) const { return joint_[static_cast<std::size_t>(a * vocab_ + b)]; }

    std::vector<LogitGrid> logits(const std::vector<TokenSequence>& batch, std::span<const double> t) const override {
        std::vector<LogitGrid> out;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const double alpha = schedule_.at(t[i]).alpha;
            auto kernel = [&](int observed, int clean) { return (observed == clean ? alpha : 0.0) + (1.0 - alpha) / vocab_; };
            LogitGrid g(2, vocab_);
            for (int a = 0; a < vocab_; ++a) {
                double first = 0.0, second = 0.0;
                for (int c = 0; c < vocab_; ++c) {
                    first += p(a, c) * kernel(batch[i][1], c);
                    second += p(c, a) * kernel(batch[i][0], c);
                }
                g.at(0, a) = std::log(first);
                g.at(1, a) = std::log(second);
            }
            out.push_back(std::move(g));
        }
        return out;
    }

private:
    std::vector<double> joint_;
    int vocab_;
    NoiseSchedule schedule_;
};

}  // namespace udiff::testing
