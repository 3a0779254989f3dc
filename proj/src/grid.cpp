#include "udiff/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace udiff {

Grid::Grid(int length_, int vocab_, double fill) : length(length_), vocab(vocab_) {
    if (length_ < 0 || vocab_ < 0) throw std::invalid_argument("grid dimensions must be non-negative");
    values.assign(static_cast<std::size_t>(length_) * static_cast<std::size_t>(vocab_), fill);
}

CategoricalGrid CategoricalGrid::uniform(int length, int vocab) {
    return CategoricalGrid(length, vocab, 1.0 / vocab);
}

CategoricalGrid CategoricalGrid::one_hot(std::span<const Token> tokens, int vocab) {
    CategoricalGrid g(static_cast<int>(tokens.size()), vocab, 0.0);
    for (int l = 0; l < g.length; ++l) {
        if (tokens[l] < 0 || tokens[l] >= vocab) throw std::domain_error("token index out of range");
        g.at(l, tokens[l]) = 1.0;
    }
    return g;
}

bool CategoricalGrid::is_normalized(double tol) const {
    for (int l = 0; l < length; ++l) {
        double sum = 0.0;
        for (double p : row(l)) {
            if (!(p >= 0.0)) return false;
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

void softmax_row(std::span<const double> logits, std::span<double> out, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
    const double inv_t = 1.0 / temperature;
    double mx = -INFINITY;
    for (double z : logits) mx = std::max(mx, z * inv_t);
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out[j] = std::exp(logits[j] * inv_t - mx);
        sum += out[j];
    }
    for (double& p : out) p /= sum;
}

CategoricalGrid softmax(const LogitGrid& logits, double temperature) {
    CategoricalGrid g(logits.length, logits.vocab);
    for (int l = 0; l < logits.length; ++l) softmax_row(logits.row(l), g.row(l), temperature);
    return g;
}

}  // namespace udiff
