#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace udiff::testing {

/// Deterministic English-like text: a Zipf lexicon of syllable words chained by
/// a sparse successor table, with capitalization, commas and paragraph breaks.
std::string synthetic_corpus(std::size_t bytes, std::uint64_t seed = 7);

}  // namespace udiff::testing
