#pragma once

#include "udiff/denoiser.hpp"
#include "udiff/grid.hpp"

#include <span>
#include <vector>

namespace udiff {

/// Anything that maps a batch of noisy sequences and their times to logits.
/// One call is one batched forward pass.
class LogitModel {
public:
    virtual ~LogitModel() = default;
    virtual int vocab_size() const = 0;
    virtual std::vector<LogitGrid> logits(const std::vector<TokenSequence>& batch, std::span<const double> t) const = 0;
};

/// Eval-mode adapter over float denoiser parameters; splits large batches internally.
class DenoiserLogitModel final : public LogitModel {
public:
    explicit DenoiserLogitModel(const DenoiserParams<float>& params, int max_batch = 32);

    int vocab_size() const override { return params_.config.vocab_size; }
    std::vector<LogitGrid> logits(const std::vector<TokenSequence>& batch, std::span<const double> t) const override;

private:
    const DenoiserParams<float>& params_;
    int max_batch_;
};

}  // namespace udiff
