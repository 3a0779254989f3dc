#pragma once

#include "udiff/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace udiff {

/// Binary layout:
///   "UDIF" | u32 version | u64 header bytes | JSON header
///   | u32 tensor count | per tensor: u32 name bytes, name, u8 dtype, u32 rank, i64 dims[rank], u64 offset, u64 bytes
///   | raw little-endian tensor data | u32 CRC32 of everything before it
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::uint32_t version = kVersion;
    ModelConfig model;
    TrainConfig train;
    DenoiserParams<float> params;
    OptimState optim;
    EmaState ema;
    std::int64_t step = 0;
    std::string rng_state;
    int consecutive_nonfinite = 0;
    std::string metadata_json = "{}";

    bool operator==(const Checkpoint& other) const;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& config, std::string metadata_json = "{}");
TrainState restore_train_state(const Checkpoint& checkpoint);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace udiff
