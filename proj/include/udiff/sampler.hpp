#pragma once

#include "udiff/diffusion.hpp"
#include "udiff/logit_model.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace udiff {

enum class FinalDecode { sample, argmax };

std::string to_string(FinalDecode mode);
FinalDecode parse_final_decode(std::string_view name);

struct SampleConfig {
    int num_steps = 1024;
    int num_samples = 16;
    int context_length = 128;
    double temperature = 1.0;
    std::uint64_t seed = 0;
    FinalDecode final_decode = FinalDecode::argmax;

    void validate() const;
    bool operator==(const SampleConfig&) const = default;
};

using TimeGrid = std::vector<std::pair<double, double>>;

/// (t_k, t_{k-1}) for k = n..1 with t_k = k/n.
TimeGrid step_grid(int num_steps);

/// Ancestral sampling from the uniform prior. Each step makes exactly one
/// model call covering all samples. `grid` overrides the uniform time grid;
/// it must start at t = 1, decrease strictly and end at s = 0.
std::vector<TokenSequence> sample(const LogitModel& model, const SampleConfig& config, const Vocab& vocab,
                                  const NoiseSchedule& schedule, Rng& rng, const TimeGrid& grid = {});

}  // namespace udiff
