#include "udiff/data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace udiff {

std::vector<TokenSequence> chunk_corpus(std::span<const Token> tokens, int length, int stride) {
    if (length < 1) throw std::invalid_argument("window length must be positive");
    if (stride < 1) throw std::invalid_argument("stride must be at least 1");
    const auto l = static_cast<std::size_t>(length);
    if (tokens.size() < l)
        throw std::invalid_argument("corpus has " + std::to_string(tokens.size()) + " tokens, fewer than the window length " +
                                    std::to_string(length));
    std::vector<TokenSequence> windows;
    for (std::size_t start = 0; start + l <= tokens.size(); start += static_cast<std::size_t>(stride))
        windows.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                             tokens.begin() + static_cast<std::ptrdiff_t>(start + l));
    return windows;
}

DataSplit split_windows(std::vector<TokenSequence> windows, double val_fraction) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must lie in (0, 1)");
    if (windows.size() < 2) throw std::invalid_argument("need at least two windows to hold out a validation set");
    auto held = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(windows.size())));
    held = std::clamp<std::size_t>(held, 1, windows.size() - 1);
    DataSplit split;
    const auto cut = windows.begin() + static_cast<std::ptrdiff_t>(windows.size() - held);
    split.val.assign(std::make_move_iterator(cut), std::make_move_iterator(windows.end()));
    windows.erase(cut, windows.end());
    split.train = std::move(windows);
    return split;
}

}  // namespace udiff
