#include "udiff/denoiser.hpp"

#include <stdexcept>

namespace udiff {

void ModelConfig::validate() const {
    if (vocab_size < 2) throw std::invalid_argument("model vocab_size must be at least 2");
    if (context_length < 1) throw std::invalid_argument("context_length must be positive");
    if (layers < 0) throw std::invalid_argument("layers must be non-negative");
    if (hidden_dim < 1 || heads < 1) throw std::invalid_argument("hidden_dim and heads must be positive");
    if (hidden_dim % heads != 0) throw std::invalid_argument("hidden_dim must be divisible by heads");
    if (head_dim() % 2 != 0) throw std::invalid_argument("head dimension must be even for rotary encoding");
    if (time_embed_dim < 1) throw std::invalid_argument("time_embed_dim must be positive");
    if (time_frequency_dim < 2 || time_frequency_dim % 2 != 0)
        throw std::invalid_argument("time_frequency_dim must be a positive even number");
    if (mlp_ratio < 1) throw std::invalid_argument("mlp_ratio must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
}

std::vector<std::pair<std::string, std::vector<std::int64_t>>> parameter_layout(const ModelConfig& c) {
    c.validate();
    const std::int64_t v = c.vocab_size, d = c.hidden_dim, te = c.time_embed_dim, tf = c.time_frequency_dim;
    const std::int64_t m = static_cast<std::int64_t>(c.mlp_ratio) * d;
    std::vector<std::pair<std::string, std::vector<std::int64_t>>> layout{
        {"embed.tokens", {v, d}},
        {"time.fc1.weight", {tf, te}},
        {"time.fc1.bias", {te}},
        {"time.fc2.weight", {te, te}},
        {"time.fc2.bias", {te}},
    };
    for (int i = 0; i < c.layers; ++i) {
        const std::string p = "blocks." + std::to_string(i) + ".";
        layout.push_back({p + "adaln.weight", {te, 6 * d}});
        layout.push_back({p + "adaln.bias", {6 * d}});
        layout.push_back({p + "attn.qkv.weight", {d, 3 * d}});
        layout.push_back({p + "attn.out.weight", {d, d}});
        layout.push_back({p + "mlp.fc1.weight", {d, m}});
        layout.push_back({p + "mlp.fc1.bias", {m}});
        layout.push_back({p + "mlp.fc2.weight", {m, d}});
        layout.push_back({p + "mlp.fc2.bias", {d}});
    }
    layout.push_back({"final.adaln.weight", {te, 2 * d}});
    layout.push_back({"final.adaln.bias", {2 * d}});
    layout.push_back({"head.weight", {d, v}});
    layout.push_back({"head.bias", {v}});
    return layout;
}

template <typename Scalar>
DenoiserParams<Scalar> init_params(const ModelConfig& config, std::uint64_t seed) {
    DenoiserParams<Scalar> params{config, {}};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.02);
    for (auto& [name, shape] : parameter_layout(config)) {
        auto& t = params.tensors.add(name, shape);
        const bool is_bias = name.ends_with(".bias");
        const bool is_modulation = name.find("adaln") != std::string::npos;
        if (is_bias || is_modulation) continue;
        for (auto& x : t.data) x = static_cast<Scalar>(normal(rng));
    }
    return params;
}

template DenoiserParams<float> init_params<float>(const ModelConfig&, std::uint64_t);
template DenoiserParams<double> init_params<double>(const ModelConfig&, std::uint64_t);

template <typename Scalar>
std::vector<LogitGrid> split_logits(const RowMatrix<Scalar>& stacked, int batch, int length) {
    if (stacked.rows() != static_cast<Eigen::Index>(batch) * length)
        throw std::invalid_argument("stacked logits have the wrong number of rows");
    const int v = static_cast<int>(stacked.cols());
    std::vector<LogitGrid> out;
    out.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        LogitGrid g(length, v);
        for (int l = 0; l < length; ++l)
            for (int j = 0; j < v; ++j) g.at(l, j) = static_cast<double>(stacked(b * length + l, j));
        out.push_back(std::move(g));
    }
    return out;
}

template <typename Scalar>
RowMatrix<Scalar> stack_grids(std::span<const LogitGrid> grids) {
    if (grids.empty()) return {};
    const int length = grids.front().length, v = grids.front().vocab;
    RowMatrix<Scalar> out(static_cast<Eigen::Index>(grids.size()) * length, v);
    for (std::size_t b = 0; b < grids.size(); ++b) {
        if (grids[b].length != length || grids[b].vocab != v) throw std::invalid_argument("grids differ in shape");
        for (int l = 0; l < length; ++l)
            for (int j = 0; j < v; ++j)
                out(static_cast<Eigen::Index>(b) * length + l, j) = static_cast<Scalar>(grids[b].at(l, j));
    }
    return out;
}

template std::vector<LogitGrid> split_logits<float>(const RowMatrix<float>&, int, int);
template std::vector<LogitGrid> split_logits<double>(const RowMatrix<double>&, int, int);
template RowMatrix<float> stack_grids<float>(std::span<const LogitGrid>);
template RowMatrix<double> stack_grids<double>(std::span<const LogitGrid>);

}  // namespace udiff
