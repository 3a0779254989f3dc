#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace udiff {

using Token = int;
/// Clean or noisy token indices for one sequence.
using TokenSequence = std::vector<Token>;

/// Dense length x vocab matrix stored row-major.
struct Grid {
    int length = 0;
    int vocab = 0;
    std::vector<double> values;

    Grid() = default;
    Grid(int length_, int vocab_, double fill = 0.0);

    std::span<double> row(int l) { return {values.data() + static_cast<std::size_t>(l) * vocab, static_cast<std::size_t>(vocab)}; }
    std::span<const double> row(int l) const {
        return {values.data() + static_cast<std::size_t>(l) * vocab, static_cast<std::size_t>(vocab)};
    }
    double& at(int l, int v) { return values[static_cast<std::size_t>(l) * vocab + v]; }
    double at(int l, int v) const { return values[static_cast<std::size_t>(l) * vocab + v]; }
};

/// Unnormalized scores; softmax(row) is the predictive distribution.
struct LogitGrid : Grid {
    using Grid::Grid;
};

/// Per-position categorical distributions over the vocabulary (x_theta).
struct CategoricalGrid : Grid {
    using Grid::Grid;

    static CategoricalGrid uniform(int length, int vocab);
    static CategoricalGrid one_hot(std::span<const Token> tokens, int vocab);

    /// Max |row sum - 1| and min entry; used to validate inputs.
    bool is_normalized(double tol = 1e-6) const;
};

/// Row-wise softmax of logits / temperature, computed with max subtraction.
CategoricalGrid softmax(const LogitGrid& logits, double temperature = 1.0);

/// Numerically stable softmax of a single row into `out`.
void softmax_row(std::span<const double> logits, std::span<double> out, double temperature = 1.0);

}  // namespace udiff
