#include "udiff/evaluator.hpp"

#include "log.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace udiff {

double ScorerModel::score(std::span<const Token> tokens) const {
    const auto lp = token_logprobs(tokens);
    return std::accumulate(lp.begin(), lp.end(), 0.0);
}

UniformScorer::UniformScorer(int vocab_size) : vocab_size_(vocab_size) {
    if (vocab_size < 1) throw std::invalid_argument("scorer vocabulary must be non-empty");
}

std::vector<double> UniformScorer::token_logprobs(std::span<const Token> tokens) const {
    for (Token t : tokens)
        if (t < 0 || t >= vocab_size_) throw std::out_of_range("token outside the scorer vocabulary");
    return std::vector<double>(tokens.size(), -std::log(static_cast<double>(vocab_size_)));
}

GenPplResult gen_ppl(std::span<const TokenSequence> samples, const ScorerModel& scorer) {
    if (samples.empty()) throw std::invalid_argument("gen_ppl needs at least one sample");
    const double floor = std::log(kScoreFloor);
    GenPplResult result;
    double total = 0.0, carry = 0.0;
    for (const auto& seq : samples) {
        const auto lp = scorer.token_logprobs(seq);
        if (lp.size() != seq.size()) throw std::runtime_error("scorer returned the wrong number of log-probabilities");
        for (double x : lp) {
            if (std::isnan(x) || x > 1e-9) throw std::runtime_error("scorer returned an invalid log-probability");
            if (x < floor) {
                x = floor;
                ++result.clamped;
            }
            const double next = total + x;
            carry += std::abs(total) >= std::abs(x) ? (total - next) + x : (x - next) + total;
            total = next;
        }
        result.tokens += seq.size();
    }
    if (result.tokens == 0) throw std::invalid_argument("gen_ppl needs at least one token");
    if (result.clamped > 0) log().warn("gen_ppl: {} zero-probability tokens clamped to {}", result.clamped, kScoreFloor);
    result.gen_ppl = std::exp(-(total + carry) / static_cast<double>(result.tokens));
    return result;
}

double sequence_entropy(std::span<const Token> tokens) {
    if (tokens.empty()) throw std::invalid_argument("entropy of an empty sample is undefined");
    std::unordered_map<Token, std::size_t> counts;
    for (Token t : tokens) ++counts[t];
    const double n = static_cast<double>(tokens.size());
    double h = 0.0;
    for (const auto& [tok, c] : counts) {
        const double p = static_cast<double>(c) / n;
        h += p * std::log(n / static_cast<double>(c));
    }
    return std::clamp(h, 0.0, std::log(static_cast<double>(counts.size())));
}

double avg_entropy(std::span<const TokenSequence> samples) {
    if (samples.empty()) throw std::invalid_argument("avg_entropy needs at least one sample");
    double total = 0.0;
    for (const auto& seq : samples) total += sequence_entropy(seq);
    return total / static_cast<double>(samples.size());
}

std::string MetricsReport::to_json() const {
    nlohmann::json j{{"gen_ppl", gen_ppl},
                     {"entropy", entropy},
                     {"elbo_ppl", elbo_ppl},
                     {"elbo_std_error", elbo_std_error},
                     {"sample_count", sample_count},
                     {"mc_time_samples", mc_time_samples},
                     {"zero_prob_clamps", zero_prob_clamps}};
    return j.dump();
}

}  // namespace udiff
