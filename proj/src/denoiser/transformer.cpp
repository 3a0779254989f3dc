#include "udiff/denoiser.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace udiff {

namespace {

template <typename S>
using Mat = RowMatrix<S>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

constexpr double kLayerNormEps = 1e-5;
constexpr double kRopeBase = 10000.0;
constexpr double kTimeScale = 1000.0;

template <typename S>
Eigen::Map<const Mat<S>> cmat(const Tensor<S>& t) {
    return {t.data.data(), static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1])};
}
template <typename S>
Eigen::Map<Mat<S>> mmat(Tensor<S>& t) {
    return {t.data.data(), static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1])};
}
template <typename S>
Eigen::Map<const RowVec<S>> cvec(const Tensor<S>& t) {
    return {t.data.data(), static_cast<Eigen::Index>(t.shape[0])};
}
template <typename S>
Eigen::Map<RowVec<S>> mvec(Tensor<S>& t) {
    return {t.data.data(), static_cast<Eigen::Index>(t.shape[0])};
}

struct BlockIndex {
    std::size_t adaln_w, adaln_b, qkv, out, fc1_w, fc1_b, fc2_w, fc2_b;
};

struct Layout {
    std::size_t embed, t1_w, t1_b, t2_w, t2_b;
    std::vector<BlockIndex> blocks;
    std::size_t final_w, final_b, head_w, head_b;
};

template <typename S>
Layout make_layout(const ParamSet<S>& ps, const ModelConfig& cfg) {
    Layout lay{};
    lay.embed = ps.index_of("embed.tokens");
    lay.t1_w = ps.index_of("time.fc1.weight");
    lay.t1_b = ps.index_of("time.fc1.bias");
    lay.t2_w = ps.index_of("time.fc2.weight");
    lay.t2_b = ps.index_of("time.fc2.bias");
    for (int i = 0; i < cfg.layers; ++i) {
        const std::string p = "blocks." + std::to_string(i) + ".";
        lay.blocks.push_back({ps.index_of(p + "adaln.weight"), ps.index_of(p + "adaln.bias"),
                              ps.index_of(p + "attn.qkv.weight"), ps.index_of(p + "attn.out.weight"),
                              ps.index_of(p + "mlp.fc1.weight"), ps.index_of(p + "mlp.fc1.bias"),
                              ps.index_of(p + "mlp.fc2.weight"), ps.index_of(p + "mlp.fc2.bias")});
    }
    lay.final_w = ps.index_of("final.adaln.weight");
    lay.final_b = ps.index_of("final.adaln.bias");
    lay.head_w = ps.index_of("head.weight");
    lay.head_b = ps.index_of("head.bias");
    return lay;
}

template <typename S>
Mat<S> silu(const Mat<S>& x) {
    return (x.array() / (S(1) + (-x.array()).exp())).matrix();
}

template <typename S>
Mat<S> silu_grad(const Mat<S>& x) {
    auto sig = (S(1) / (S(1) + (-x.array()).exp())).eval();
    return (sig * (S(1) + x.array() * (S(1) - sig))).matrix();
}

// tanh-approximated GELU.
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

template <typename S>
void gelu(const Mat<S>& x, Mat<S>& out) {
    auto inner = (S(kGeluC) * (x.array() + S(kGeluA) * x.array().cube())).eval();
    out = (S(0.5) * x.array() * (S(1) + inner.tanh())).matrix();
}

template <typename S>
Mat<S> gelu_grad(const Mat<S>& x) {
    auto th = (S(kGeluC) * (x.array() + S(kGeluA) * x.array().cube())).tanh().eval();
    return (S(0.5) * (S(1) + th) +
            S(0.5) * x.array() * (S(1) - th.square()) * S(kGeluC) * (S(1) + S(3 * kGeluA) * x.array().square()))
        .matrix();
}

template <typename S>
void layer_norm(const Mat<S>& x, Mat<S>& n, Vec<S>& rstd) {
    const auto cols = static_cast<S>(x.cols());
    n.resize(x.rows(), x.cols());
    rstd.resize(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const S mean = x.row(r).sum() / cols;
        auto centered = (x.row(r).array() - mean).eval();
        const S var = centered.square().sum() / cols;
        rstd(r) = S(1) / std::sqrt(var + S(kLayerNormEps));
        n.row(r) = (centered * rstd(r)).matrix();
    }
}

template <typename S>
Mat<S> layer_norm_backward(const Mat<S>& dn, const Mat<S>& n, const Vec<S>& rstd) {
    const auto cols = static_cast<S>(dn.cols());
    Mat<S> dx(dn.rows(), dn.cols());
    for (Eigen::Index r = 0; r < dn.rows(); ++r) {
        const S mean_dn = dn.row(r).sum() / cols;
        const S mean_dn_n = dn.row(r).cwiseProduct(n.row(r)).sum() / cols;
        dx.row(r) = (rstd(r) * (dn.row(r).array() - mean_dn - n.row(r).array() * mean_dn_n)).matrix();
    }
    return dx;
}

/// h = n * (1 + scale_b) + shift_b for every row of example b.
template <typename S, typename ShiftT, typename ScaleT>
void modulate(const Mat<S>& n, const ShiftT& shift, const ScaleT& scale, int B, int L, Mat<S>& h) {
    h.resize(n.rows(), n.cols());
    for (int b = 0; b < B; ++b) {
        h.middleRows(b * L, L) = ((n.middleRows(b * L, L).array().rowwise() * (S(1) + scale.row(b).array()))
                                      .rowwise() +
                                  shift.row(b).array())
                                     .matrix();
    }
}

/// Backward of modulate: returns dn, accumulates dshift/dscale rows.
template <typename S, typename ShiftT, typename ScaleT>
Mat<S> modulate_backward(const Mat<S>& dh, const Mat<S>& n, const ScaleT& scale, int B, int L, ShiftT dshift,
                         ShiftT dscale) {
    Mat<S> dn(dh.rows(), dh.cols());
    for (int b = 0; b < B; ++b) {
        auto rows = dh.middleRows(b * L, L);
        dshift.row(b) = rows.colwise().sum();
        dscale.row(b) = rows.cwiseProduct(n.middleRows(b * L, L)).colwise().sum();
        dn.middleRows(b * L, L) = (rows.array().rowwise() * (S(1) + scale.row(b).array())).matrix();
    }
    return dn;
}

/// Rotates pairs (i, i + half) of every head by the cached phases; inverse=true applies the transpose.
template <typename S>
void apply_rotary(Mat<S>& x, const Mat<S>& cos_t, const Mat<S>& sin_t, int B, int L, int heads, int head_dim,
                  bool inverse) {
    const int half = head_dim / 2;
    const S sign = inverse ? S(-1) : S(1);
    for (int b = 0; b < B; ++b)
        for (int l = 0; l < L; ++l) {
            S* row = x.row(static_cast<Eigen::Index>(b) * L + l).data();
            for (int h = 0; h < heads; ++h) {
                S* base = row + h * head_dim;
                for (int i = 0; i < half; ++i) {
                    const S c = cos_t(l, i), s = sign * sin_t(l, i);
                    const S a = base[i], bb = base[i + half];
                    base[i] = a * c - bb * s;
                    base[i + half] = a * s + bb * c;
                }
            }
        }
}

template <typename S>
Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Mat<S> mask(rows, cols);
    const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = unit(rng) < p ? S(0) : keep_scale;
    return mask;
}

}  // namespace

template <typename S>
struct ActivationCache<S>::Impl {
    struct Layer {
        Mat<S> mod, n1, h1, q, k, v, probs, att, ao, mask1, n2, h2, f1, g, f2, mask2;
        Vec<S> rstd1, rstd2;
    };
    int B = 0, L = 0;
    bool dropout = false;
    std::vector<int> tokens;
    Mat<S> cos_t, sin_t;
    Mat<S> sinus, temb1, a1, c, cs;
    std::vector<Layer> layers;
    Mat<S> mod_final, n_final, h_final;
    Vec<S> rstd_final;
};

template <typename S>
ActivationCache<S>::ActivationCache() : impl_(std::make_unique<Impl>()) {}
template <typename S>
ActivationCache<S>::~ActivationCache() = default;
template <typename S>
ActivationCache<S>::ActivationCache(ActivationCache&&) noexcept = default;
template <typename S>
ActivationCache<S>& ActivationCache<S>::operator=(ActivationCache&&) noexcept = default;

template <typename S>
Denoiser<S>::Denoiser(const DenoiserParams<S>& params) : params_(params) {
    params.config.validate();
}

template <typename S>
typename Denoiser<S>::Matrix Denoiser<S>::forward(const std::vector<TokenSequence>& batch, std::span<const double> t,
                                                  const ForwardOptions& options, ActivationCache<S>* cache) const {
    const ModelConfig& cfg = params_.config;
    const ParamSet<S>& ps = params_.tensors;
    const Layout lay = make_layout(ps, cfg);

    if (batch.empty()) throw std::invalid_argument("empty batch");
    const int B = static_cast<int>(batch.size());
    const int L = static_cast<int>(batch.front().size());
    if (L < 1) throw std::invalid_argument("empty sequence");
    if (L > cfg.context_length) throw std::invalid_argument("shape error: sequence longer than context_length");
    if (static_cast<int>(t.size()) != B) throw std::invalid_argument("one diffusion time per example required");
    for (const auto& seq : batch)
        if (static_cast<int>(seq.size()) != L) throw std::invalid_argument("shape error: mixed sequence lengths");
    for (double ti : t)
        if (!(ti >= 0.0 && ti <= 1.0)) throw std::domain_error("diffusion time must lie in [0, 1]");
    if (!options.positions.empty() && static_cast<int>(options.positions.size()) != L)
        throw std::invalid_argument("positions must have one entry per sequence position");

    const int d = cfg.hidden_dim, H = cfg.heads, dh = cfg.head_dim(), half = dh / 2;
    const int F = cfg.time_frequency_dim, V = cfg.vocab_size;
    const Eigen::Index N = static_cast<Eigen::Index>(B) * L;
    const bool use_dropout = options.training && cfg.dropout > 0.0;
    if (use_dropout && options.rng == nullptr) throw std::invalid_argument("dropout requires an rng");

    typename ActivationCache<S>::Impl scratch;
    auto& c = cache ? *cache->impl_ : scratch;
    c.B = B;
    c.L = L;
    c.dropout = use_dropout;
    c.tokens.resize(static_cast<std::size_t>(N));
    for (int b = 0; b < B; ++b)
        for (int l = 0; l < L; ++l) {
            const Token tok = batch[b][l];
            if (tok < 0 || tok >= V) throw std::domain_error("token index out of range");
            c.tokens[static_cast<std::size_t>(b) * L + l] = tok;
        }

    // Rotary phase tables.
    c.cos_t.resize(L, half);
    c.sin_t.resize(L, half);
    for (int l = 0; l < L; ++l) {
        const double pos = options.positions.empty() ? l : options.positions[l];
        for (int i = 0; i < half; ++i) {
            const double angle = pos * std::pow(kRopeBase, -2.0 * i / dh);
            c.cos_t(l, i) = static_cast<S>(std::cos(angle));
            c.sin_t(l, i) = static_cast<S>(std::sin(angle));
        }
    }

    // Time embedding shared by every modulation projection.
    c.sinus.resize(B, F);
    for (int b = 0; b < B; ++b)
        for (int i = 0; i < F / 2; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / (F / 2));
            const double arg = kTimeScale * t[b] * freq;
            c.sinus(b, i) = static_cast<S>(std::cos(arg));
            c.sinus(b, i + F / 2) = static_cast<S>(std::sin(arg));
        }
    c.temb1 = c.sinus * cmat(ps[lay.t1_w]);
    c.temb1.rowwise() += cvec(ps[lay.t1_b]);
    c.a1 = silu(c.temb1);
    c.c = c.a1 * cmat(ps[lay.t2_w]);
    c.c.rowwise() += cvec(ps[lay.t2_b]);
    c.cs = silu(c.c);

    Mat<S> x(N, d);
    const auto embed = cmat(ps[lay.embed]);
    for (Eigen::Index n = 0; n < N; ++n) x.row(n) = embed.row(c.tokens[static_cast<std::size_t>(n)]);

    const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    if (cache) c.layers.assign(static_cast<std::size_t>(cfg.layers), {});
    typename ActivationCache<S>::Impl::Layer scratch_layer;

    for (int li = 0; li < cfg.layers; ++li) {
        const BlockIndex& bi = lay.blocks[li];
        auto& a = cache ? c.layers[li] : scratch_layer;

        a.mod = c.cs * cmat(ps[bi.adaln_w]);
        a.mod.rowwise() += cvec(ps[bi.adaln_b]);
        const auto shift1 = a.mod.middleCols(0, d), scale1 = a.mod.middleCols(d, d), gate1 = a.mod.middleCols(2 * d, d);
        const auto shift2 = a.mod.middleCols(3 * d, d), scale2 = a.mod.middleCols(4 * d, d),
                   gate2 = a.mod.middleCols(5 * d, d);

        // Attention branch.
        layer_norm(x, a.n1, a.rstd1);
        modulate(a.n1, shift1, scale1, B, L, a.h1);
        const auto w_qkv = cmat(ps[bi.qkv]);
        a.q.noalias() = a.h1 * w_qkv.middleCols(0, d);
        a.k.noalias() = a.h1 * w_qkv.middleCols(d, d);
        a.v.noalias() = a.h1 * w_qkv.middleCols(2 * d, d);
        apply_rotary(a.q, c.cos_t, c.sin_t, B, L, H, dh, false);
        apply_rotary(a.k, c.cos_t, c.sin_t, B, L, H, dh, false);

        a.att.resize(N, d);
        a.probs.resize(static_cast<Eigen::Index>(B) * H * L, L);
        Mat<S> scores(L, L);
        for (int b = 0; b < B; ++b)
            for (int h = 0; h < H; ++h) {
                const auto qb = a.q.block(b * L, h * dh, L, dh);
                const auto kb = a.k.block(b * L, h * dh, L, dh);
                scores.noalias() = (qb * kb.transpose()) * inv_sqrt;
                for (int r = 0; r < L; ++r) {
                    const S mx = scores.row(r).maxCoeff();
                    scores.row(r) = (scores.row(r).array() - mx).exp().matrix();
                    scores.row(r) /= scores.row(r).sum();
                }
                auto pb = a.probs.block((static_cast<Eigen::Index>(b) * H + h) * L, 0, L, L);
                pb = scores;
                a.att.block(b * L, h * dh, L, dh).noalias() = scores * a.v.block(b * L, h * dh, L, dh);
            }
        a.ao.noalias() = a.att * cmat(ps[bi.out]);
        if (use_dropout) {
            a.mask1 = dropout_mask<S>(N, d, cfg.dropout, *options.rng);
            a.ao.array() *= a.mask1.array();
        }
        for (int b = 0; b < B; ++b)
            x.middleRows(b * L, L).array() += a.ao.middleRows(b * L, L).array().rowwise() * gate1.row(b).array();

        // MLP branch.
        layer_norm(x, a.n2, a.rstd2);
        modulate(a.n2, shift2, scale2, B, L, a.h2);
        a.f1.noalias() = a.h2 * cmat(ps[bi.fc1_w]);
        a.f1.rowwise() += cvec(ps[bi.fc1_b]);
        gelu(a.f1, a.g);
        a.f2.noalias() = a.g * cmat(ps[bi.fc2_w]);
        a.f2.rowwise() += cvec(ps[bi.fc2_b]);
        if (use_dropout) {
            a.mask2 = dropout_mask<S>(N, d, cfg.dropout, *options.rng);
            a.f2.array() *= a.mask2.array();
        }
        for (int b = 0; b < B; ++b)
            x.middleRows(b * L, L).array() += a.f2.middleRows(b * L, L).array().rowwise() * gate2.row(b).array();
    }

    c.mod_final = c.cs * cmat(ps[lay.final_w]);
    c.mod_final.rowwise() += cvec(ps[lay.final_b]);
    layer_norm(x, c.n_final, c.rstd_final);
    modulate(c.n_final, c.mod_final.middleCols(0, d), c.mod_final.middleCols(d, d), B, L, c.h_final);

    Matrix logits(N, V);
    logits.noalias() = c.h_final * cmat(ps[lay.head_w]);
    logits.rowwise() += cvec(ps[lay.head_b]);
    return logits;
}

template <typename S>
void Denoiser<S>::backward(const ActivationCache<S>& cache, const Matrix& grad_logits, ParamSet<S>& grads) const {
    const ModelConfig& cfg = params_.config;
    const ParamSet<S>& ps = params_.tensors;
    if (!grads.same_layout(ps)) throw std::invalid_argument("gradient buffers do not match parameter layout");
    const Layout lay = make_layout(ps, cfg);
    const auto& c = *cache.impl_;
    if (c.layers.size() != static_cast<std::size_t>(cfg.layers)) throw std::logic_error("cache holds no activations");

    const int B = c.B, L = c.L;
    const int d = cfg.hidden_dim, H = cfg.heads, dh = cfg.head_dim();
    const Eigen::Index N = static_cast<Eigen::Index>(B) * L;
    if (grad_logits.rows() != N || grad_logits.cols() != cfg.vocab_size)
        throw std::invalid_argument("logit gradient has the wrong shape");
    const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

    // Output head and final modulation.
    mmat(grads[lay.head_w]).noalias() += c.h_final.transpose() * grad_logits;
    mvec(grads[lay.head_b]) += grad_logits.colwise().sum();
    Mat<S> dh_final = grad_logits * cmat(ps[lay.head_w]).transpose();

    Mat<S> dmod_final = Mat<S>::Zero(B, 2 * d);
    Mat<S> dn = modulate_backward<S>(dh_final, c.n_final, c.mod_final.middleCols(d, d), B, L,
                                     dmod_final.middleCols(0, d), dmod_final.middleCols(d, d));
    mmat(grads[lay.final_w]).noalias() += c.cs.transpose() * dmod_final;
    mvec(grads[lay.final_b]) += dmod_final.colwise().sum();
    Mat<S> dcs = dmod_final * cmat(ps[lay.final_w]).transpose();

    Mat<S> dx = layer_norm_backward(dn, c.n_final, c.rstd_final);

    Mat<S> dP(L, L), dS(L, L);
    for (int li = cfg.layers - 1; li >= 0; --li) {
        const BlockIndex& bi = lay.blocks[li];
        const auto& a = c.layers[li];
        const auto scale1 = a.mod.middleCols(d, d), gate1 = a.mod.middleCols(2 * d, d);
        const auto scale2 = a.mod.middleCols(4 * d, d), gate2 = a.mod.middleCols(5 * d, d);
        Mat<S> dmod = Mat<S>::Zero(B, 6 * d);

        // MLP branch: x_out = x_mid + gate2 * f2.
        Mat<S> df2(N, d);
        for (int b = 0; b < B; ++b) {
            auto rows = dx.middleRows(b * L, L);
            dmod.block(b, 5 * d, 1, d) = rows.cwiseProduct(a.f2.middleRows(b * L, L)).colwise().sum();
            df2.middleRows(b * L, L) = (rows.array().rowwise() * gate2.row(b).array()).matrix();
        }
        if (c.dropout) df2.array() *= a.mask2.array();
        mmat(grads[bi.fc2_w]).noalias() += a.g.transpose() * df2;
        mvec(grads[bi.fc2_b]) += df2.colwise().sum();
        Mat<S> df1 = df2 * cmat(ps[bi.fc2_w]).transpose();
        df1.array() *= gelu_grad(a.f1).array();
        mmat(grads[bi.fc1_w]).noalias() += a.h2.transpose() * df1;
        mvec(grads[bi.fc1_b]) += df1.colwise().sum();
        Mat<S> dh2 = df1 * cmat(ps[bi.fc1_w]).transpose();
        Mat<S> dn2 = modulate_backward<S>(dh2, a.n2, scale2, B, L, dmod.middleCols(3 * d, d), dmod.middleCols(4 * d, d));
        dx += layer_norm_backward(dn2, a.n2, a.rstd2);

        // Attention branch: x_mid = x_in + gate1 * ao.
        Mat<S> dao(N, d);
        for (int b = 0; b < B; ++b) {
            auto rows = dx.middleRows(b * L, L);
            dmod.block(b, 2 * d, 1, d) = rows.cwiseProduct(a.ao.middleRows(b * L, L)).colwise().sum();
            dao.middleRows(b * L, L) = (rows.array().rowwise() * gate1.row(b).array()).matrix();
        }
        if (c.dropout) dao.array() *= a.mask1.array();
        mmat(grads[bi.out]).noalias() += a.att.transpose() * dao;
        Mat<S> datt = dao * cmat(ps[bi.out]).transpose();

        Mat<S> dq(N, d), dk(N, d), dv(N, d);
        for (int b = 0; b < B; ++b)
            for (int h = 0; h < H; ++h) {
                const auto P = a.probs.block((static_cast<Eigen::Index>(b) * H + h) * L, 0, L, L);
                const auto dO = datt.block(b * L, h * dh, L, dh);
                dP.noalias() = dO * a.v.block(b * L, h * dh, L, dh).transpose();
                dv.block(b * L, h * dh, L, dh).noalias() = P.transpose() * dO;
                const auto row_dot = dP.cwiseProduct(P).rowwise().sum().eval();
                dS = (P.array() * (dP.colwise() - row_dot).array()).matrix() * inv_sqrt;
                dq.block(b * L, h * dh, L, dh).noalias() = dS * a.k.block(b * L, h * dh, L, dh);
                dk.block(b * L, h * dh, L, dh).noalias() = dS.transpose() * a.q.block(b * L, h * dh, L, dh);
            }
        apply_rotary(dq, c.cos_t, c.sin_t, B, L, H, dh, true);
        apply_rotary(dk, c.cos_t, c.sin_t, B, L, H, dh, true);

        auto g_qkv = mmat(grads[bi.qkv]);
        g_qkv.middleCols(0, d).noalias() += a.h1.transpose() * dq;
        g_qkv.middleCols(d, d).noalias() += a.h1.transpose() * dk;
        g_qkv.middleCols(2 * d, d).noalias() += a.h1.transpose() * dv;
        const auto w_qkv = cmat(ps[bi.qkv]);
        Mat<S> dh1 = dq * w_qkv.middleCols(0, d).transpose();
        dh1.noalias() += dk * w_qkv.middleCols(d, d).transpose();
        dh1.noalias() += dv * w_qkv.middleCols(2 * d, d).transpose();
        Mat<S> dn1 = modulate_backward<S>(dh1, a.n1, scale1, B, L, dmod.middleCols(0, d), dmod.middleCols(d, d));
        dx += layer_norm_backward(dn1, a.n1, a.rstd1);

        mmat(grads[bi.adaln_w]).noalias() += c.cs.transpose() * dmod;
        mvec(grads[bi.adaln_b]) += dmod.colwise().sum();
        dcs.noalias() += dmod * cmat(ps[bi.adaln_w]).transpose();
    }

    auto g_embed = mmat(grads[lay.embed]);
    for (Eigen::Index n = 0; n < N; ++n) g_embed.row(c.tokens[static_cast<std::size_t>(n)]) += dx.row(n);

    Mat<S> dc = dcs.cwiseProduct(silu_grad(c.c));
    mmat(grads[lay.t2_w]).noalias() += c.a1.transpose() * dc;
    mvec(grads[lay.t2_b]) += dc.colwise().sum();
    Mat<S> dtemb1 = (dc * cmat(ps[lay.t2_w]).transpose()).cwiseProduct(silu_grad(c.temb1));
    mmat(grads[lay.t1_w]).noalias() += c.sinus.transpose() * dtemb1;
    mvec(grads[lay.t1_b]) += dtemb1.colwise().sum();
}

template class Denoiser<float>;
template class Denoiser<double>;
template class ActivationCache<float>;
template class ActivationCache<double>;

}  // namespace udiff
