#pragma once

// Sample quality and likelihood metrics: generative perplexity under an
// external scorer, unigram sequence entropy and the ELBO perplexity.

#include "udiff/diffusion.hpp"
#include "udiff/logit_model.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace udiff {

/// Log-probabilities (nats) a judge model assigns to each token of a sequence.
class ScorerModel {
public:
    virtual ~ScorerModel() = default;
    virtual std::vector<double> token_logprobs(std::span<const Token> tokens) const = 0;
    /// Total log-probability of the sequence.
    double score(std::span<const Token> tokens) const;
};

class UniformScorer final : public ScorerModel {
public:
    explicit UniformScorer(int vocab_size);
    std::vector<double> token_logprobs(std::span<const Token> tokens) const override;

private:
    int vocab_size_;
};

/// Interpolated absolute-discounting n-gram model over a fixed vocabulary.
/// Lower orders back off to the uniform distribution, so no token is ever
/// assigned zero probability.
class NgramScorer final : public ScorerModel {
public:
    NgramScorer(std::span<const Token> corpus, int order, int vocab_size, double discount = 0.75);
    ~NgramScorer() override;
    NgramScorer(NgramScorer&&) noexcept;
    NgramScorer& operator=(NgramScorer&&) noexcept;

    std::vector<double> token_logprobs(std::span<const Token> tokens) const override;
    /// P(next | up to order-1 previous tokens).
    std::vector<double> next_distribution(std::span<const Token> history) const;
    /// Ancestral draw of `length` tokens.
    TokenSequence sample(int length, Rng& rng) const;
    int order() const;
    int vocab_size() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

NgramScorer train_ngram(std::span<const Token> corpus, int order, int vocab_size, double discount = 0.75);

/// Sends {"tokens":[...]} lines to a child process and reads {"logprob": x}
/// lines back. The child's per-sequence total is spread evenly over tokens.
class SubprocessScorer final : public ScorerModel {
public:
    explicit SubprocessScorer(std::vector<std::string> argv);
    ~SubprocessScorer() override;
    SubprocessScorer(const SubprocessScorer&) = delete;
    SubprocessScorer& operator=(const SubprocessScorer&) = delete;

    std::vector<double> token_logprobs(std::span<const Token> tokens) const override;

private:
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    mutable std::string buffer_;
};

/// Probability floor for scorer outputs.
inline constexpr double kScoreFloor = 1e-12;

struct GenPplResult {
    double gen_ppl = 0.0;
    std::size_t tokens = 0;
    std::size_t clamped = 0;  ///< token log-probabilities raised to log(kScoreFloor)
};

GenPplResult gen_ppl(std::span<const TokenSequence> samples, const ScorerModel& scorer);

/// Empirical unigram entropy (nats) of one sequence.
double sequence_entropy(std::span<const Token> tokens);
/// Mean of sequence_entropy over samples.
double avg_entropy(std::span<const TokenSequence> samples);

struct ElboOptions {
    int mc_time_samples = 8;
    double t_min = 1e-5;
    int batch_size = 32;
};

struct ElboEstimate {
    double ppl = 0.0;
    double mean_nelbo = 0.0;  ///< nats per token
    double std_error = 0.0;   ///< Monte Carlo standard error of mean_nelbo
    std::size_t tokens = 0;
    int mc_time_samples = 0;
};

/// exp of the Monte Carlo per-token NELBO; t is stratified per sequence.
ElboEstimate elbo_ppl(const LogitModel& model, std::span<const TokenSequence> val, const NoiseSchedule& schedule,
                      const ElboOptions& options, Rng& rng);

/// Expected per-token NELBO of a model that always predicts the uniform
/// distribution, integrated over t in [t_min, 1] by quadrature.
double uniform_model_nelbo(int vocab_size, const NoiseSchedule& schedule, double t_min);

struct MetricsReport {
    double gen_ppl = 0.0;
    double entropy = 0.0;
    double elbo_ppl = 0.0;
    double elbo_std_error = 0.0;
    std::size_t sample_count = 0;
    int mc_time_samples = 0;
    std::size_t zero_prob_clamps = 0;

    std::string to_json() const;
};

}  // namespace udiff
