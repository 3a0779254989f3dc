#include "udiff/logit_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace udiff {

DenoiserLogitModel::DenoiserLogitModel(const DenoiserParams<float>& params, int max_batch)
    : params_(params), max_batch_(max_batch) {
    if (max_batch < 1) throw std::invalid_argument("max_batch must be positive");
}

std::vector<LogitGrid> DenoiserLogitModel::logits(const std::vector<TokenSequence>& batch,
                                                  std::span<const double> t) const {
    if (batch.size() != t.size()) throw std::invalid_argument("one diffusion time per example required");
    const Denoiser<float> model(params_);
    std::vector<LogitGrid> out;
    out.reserve(batch.size());
    for (std::size_t start = 0; start < batch.size(); start += static_cast<std::size_t>(max_batch_)) {
        const std::size_t stop = std::min(batch.size(), start + static_cast<std::size_t>(max_batch_));
        std::vector<TokenSequence> chunk(batch.begin() + static_cast<std::ptrdiff_t>(start),
                                         batch.begin() + static_cast<std::ptrdiff_t>(stop));
        const auto stacked = model.forward(chunk, t.subspan(start, stop - start));
        auto grids = split_logits(stacked, static_cast<int>(chunk.size()), static_cast<int>(chunk.front().size()));
        for (auto& g : grids) out.push_back(std::move(g));
    }
    return out;
}

}  // namespace udiff
