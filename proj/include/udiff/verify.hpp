#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace udiff {

struct OracleResult {
    std::string name;
    bool passed = false;
    double worst = 0.0;      ///< largest observed error
    double tolerance = 0.0;
    int cases = 0;
};

/// Enumeration and transcription oracles for the diffusion core.
std::vector<OracleResult> run_oracles(std::uint64_t seed = 0);

void print_oracle_table(const std::vector<OracleResult>& results, std::ostream& out);

}  // namespace udiff
