#pragma once

#include "udiff/denoiser.hpp"
#include "udiff/grid.hpp"
#include "udiff/sampler.hpp"
#include "udiff/trainer.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace udiff {

/// Character-level tokenizer over Unicode code points. Symbols are the sorted
/// distinct code points of the corpus; the unknown symbol takes the last index.
class Tokenizer {
public:
    static Tokenizer build(std::string_view utf8_text);
    static Tokenizer from_file(const std::filesystem::path& path);
    static Tokenizer from_symbols(std::vector<char32_t> symbols);

    std::vector<Token> encode(std::string_view utf8_text) const;
    /// Unknown indices decode to U+FFFD.
    std::string decode(std::span<const Token> tokens) const;

    int size() const { return static_cast<int>(symbols_.size()) + 1; }
    Token unknown() const { return static_cast<Token>(symbols_.size()); }
    const std::vector<char32_t>& symbols() const { return symbols_; }

    nlohmann::json to_json() const;
    static Tokenizer from_json(const nlohmann::json& j);
    bool operator==(const Tokenizer&) const = default;

private:
    std::vector<char32_t> symbols_;
};

std::vector<char32_t> utf8_decode(std::string_view text);
std::string utf8_encode(std::span<const char32_t> code_points);

/// Maps typographic quotes and dashes to ASCII.
std::string ascii_clean(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);

/// Windows of exactly `length` tokens starting every `stride` tokens.
std::vector<TokenSequence> chunk_corpus(std::span<const Token> tokens, int length, int stride);

struct DataSplit {
    std::vector<TokenSequence> train;
    std::vector<TokenSequence> val;
};

/// Holds out the last `val_fraction` of windows (at least one).
DataSplit split_windows(std::vector<TokenSequence> windows, double val_fraction = 0.05);

struct RunConfig {
    std::filesystem::path data_path;
    std::filesystem::path output_dir = "run";
    std::uint64_t seed = 0;
    int stride = 0;  ///< window stride, 0 means context_length
    ModelConfig model;
    TrainConfig train;
    SampleConfig sample;

    /// Checks every section and that data_path exists.
    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const SampleConfig& c);
void from_json(const nlohmann::json& j, SampleConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Parses a run config; unknown keys are rejected, missing keys keep defaults.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string serialize_run_config(const RunConfig& config);

}  // namespace udiff
