#pragma once

// Time-conditioned bidirectional transformer mapping (x_t, t) to per-position
// logits over the vocabulary. Blocks follow the DiT layout: a shared time
// embedding drives per-block shift/scale/gate modulation of parameter-free
// layer norms, attention uses rotary position phases on queries and keys.

#include "udiff/grid.hpp"
#include "udiff/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace udiff {

struct ModelConfig {
    int vocab_size = 0;
    int context_length = 128;
    int layers = 6;
    int hidden_dim = 384;
    int heads = 6;
    int time_embed_dim = 128;
    int time_frequency_dim = 256;
    int mlp_ratio = 4;
    double dropout = 0.0;

    int head_dim() const { return hidden_dim / heads; }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// (name, shape) of every parameter tensor in construction order.
std::vector<std::pair<std::string, std::vector<std::int64_t>>> parameter_layout(const ModelConfig& config);

template <typename Scalar>
struct DenoiserParams {
    ModelConfig config;
    ParamSet<Scalar> tensors;

    template <typename Other>
    DenoiserParams<Other> cast() const {
        return {config, tensors.template cast<Other>()};
    }
    bool operator==(const DenoiserParams&) const = default;
};

/// Normal(0, 0.02) weights, zero biases, zero adaptive-norm projections.
template <typename Scalar>
DenoiserParams<Scalar> init_params(const ModelConfig& config, std::uint64_t seed);

template <typename Scalar>
std::int64_t count_params(const DenoiserParams<Scalar>& params) {
    return count_params(params.tensors);
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ForwardOptions {
    bool training = false;          ///< enables dropout
    std::mt19937_64* rng = nullptr;  ///< dropout masks; required when training with dropout > 0
    std::span<const int> positions;  ///< rotary phase index per position; defaults to 0..L-1
};

template <typename Scalar>
class ActivationCache;

template <typename Scalar>
class Denoiser {
public:
    using Matrix = RowMatrix<Scalar>;

    explicit Denoiser(const DenoiserParams<Scalar>& params);

    /// Logits for B sequences of equal length, stacked as (B*L) x V.
    Matrix forward(const std::vector<TokenSequence>& batch, std::span<const double> t,
                   const ForwardOptions& options = {}, ActivationCache<Scalar>* cache = nullptr) const;

    /// Accumulates d loss / d params into `grads` (same layout as the params).
    void backward(const ActivationCache<Scalar>& cache, const Matrix& grad_logits, ParamSet<Scalar>& grads) const;

    const ModelConfig& config() const { return params_.config; }

private:
    const DenoiserParams<Scalar>& params_;
};

/// Saved activations of one training forward pass.
template <typename Scalar>
class ActivationCache {
public:
    ActivationCache();
    ~ActivationCache();
    ActivationCache(ActivationCache&&) noexcept;
    ActivationCache& operator=(ActivationCache&&) noexcept;

    struct Impl;

private:
    friend class Denoiser<Scalar>;
    std::unique_ptr<Impl> impl_;
};

/// Splits a stacked (B*L) x V matrix into per-example double-precision grids.
template <typename Scalar>
std::vector<LogitGrid> split_logits(const RowMatrix<Scalar>& stacked, int batch, int length);

/// Inverse of split_logits for gradients.
template <typename Scalar>
RowMatrix<Scalar> stack_grids(std::span<const LogitGrid> grids);

extern template class Denoiser<float>;
extern template class Denoiser<double>;

}  // namespace udiff
