#include "udiff/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace udiff {

struct NgramScorer::Impl {
    struct Context {
        std::uint64_t total = 0;
        std::unordered_map<Token, std::uint32_t> next;
    };

    int order;
    int vocab;
    double discount;
    std::unordered_map<std::string, Context> contexts;

    static std::string key(std::span<const Token> history) {
        return std::string(reinterpret_cast<const char*>(history.data()), history.size_bytes());
    }

    /// Interpolated probability of `w` after the last `k` tokens of `history`.
    double prob(std::span<const Token> history, Token w, int k) const {
        const double base = 1.0 / vocab;
        double p = base;
        for (int len = 0; len <= k; ++len) {
            auto it = contexts.find(key(history.last(static_cast<std::size_t>(len))));
            if (it == contexts.end()) break;
            const auto& ctx = it->second;
            const double total = static_cast<double>(ctx.total);
            auto hit = ctx.next.find(w);
            const double c = hit == ctx.next.end() ? 0.0 : hit->second;
            const double lambda = discount * static_cast<double>(ctx.next.size()) / total;
            p = std::max(c - discount, 0.0) / total + lambda * p;
        }
        return p;
    }
};

NgramScorer::NgramScorer(std::span<const Token> corpus, int order, int vocab_size, double discount)
    : impl_(std::make_unique<Impl>()) {
    if (corpus.empty()) throw std::invalid_argument("n-gram corpus is empty");
    if (order < 2 || order > 5) throw std::invalid_argument("n-gram order must lie in [2, 5]");
    if (static_cast<std::size_t>(order) > corpus.size())
        throw std::invalid_argument("n-gram order exceeds the corpus length");
    if (vocab_size < 1) throw std::invalid_argument("vocab_size must be positive");
    if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("discount must lie in (0, 1)");
    impl_->order = order;
    impl_->vocab = vocab_size;
    impl_->discount = discount;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Token w = corpus[i];
        if (w < 0 || w >= vocab_size) throw std::out_of_range("corpus token outside the vocabulary");
        for (int len = 0; len < order && static_cast<std::size_t>(len) <= i; ++len) {
            auto& ctx = impl_->contexts[Impl::key(corpus.subspan(i - static_cast<std::size_t>(len), static_cast<std::size_t>(len)))];
            ctx.total += 1;
            ctx.next[w] += 1;
        }
    }
}

NgramScorer::~NgramScorer() = default;
NgramScorer::NgramScorer(NgramScorer&&) noexcept = default;
NgramScorer& NgramScorer::operator=(NgramScorer&&) noexcept = default;

int NgramScorer::order() const { return impl_->order; }
int NgramScorer::vocab_size() const { return impl_->vocab; }

std::vector<double> NgramScorer::token_logprobs(std::span<const Token> tokens) const {
    std::vector<double> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || tokens[i] >= impl_->vocab) throw std::out_of_range("token outside the scorer vocabulary");
        const int k = static_cast<int>(std::min<std::size_t>(i, static_cast<std::size_t>(impl_->order - 1)));
        out.push_back(std::log(impl_->prob(tokens.first(i), tokens[i], k)));
    }
    return out;
}

std::vector<double> NgramScorer::next_distribution(std::span<const Token> history) const {
    const int k = static_cast<int>(std::min<std::size_t>(history.size(), static_cast<std::size_t>(impl_->order - 1)));
    std::vector<double> p(static_cast<std::size_t>(impl_->vocab));
    for (int w = 0; w < impl_->vocab; ++w) p[static_cast<std::size_t>(w)] = impl_->prob(history, w, k);
    return p;
}

TokenSequence NgramScorer::sample(int length, Rng& rng) const {
    if (length < 0) throw std::invalid_argument("length must be non-negative");
    TokenSequence out;
    out.reserve(static_cast<std::size_t>(length));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int i = 0; i < length; ++i) {
        const auto p = next_distribution(out);
        const double u = uniform(rng) * std::accumulate(p.begin(), p.end(), 0.0);
        double c = 0.0;
        Token pick = impl_->vocab - 1;
        for (int w = 0; w < impl_->vocab; ++w) {
            c += p[static_cast<std::size_t>(w)];
            if (u < c) {
                pick = w;
                break;
            }
        }
        out.push_back(pick);
    }
    return out;
}

NgramScorer train_ngram(std::span<const Token> corpus, int order, int vocab_size, double discount) {
    return NgramScorer(corpus, order, vocab_size, discount);
}

}  // namespace udiff
