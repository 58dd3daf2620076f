#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "transnet/model.hpp"

namespace transnet {

/// Binary checkpoint layout (little-endian):
///   "TNSW", u32 version = 1, 7 x u32 config (S, L, F, D, N, width, height),
///   u32 tensor count, then per tensor: u16 name length, name bytes,
///   u8 rank, rank x u32 extents, raw float32 values;
///   trailing CRC-32 of every preceding byte.
inline constexpr std::uint32_t kWeightFileVersion = 1;

class WeightFileError : public DataError {
 public:
    enum class Kind { BadMagic, BadVersion, Truncated, Checksum, UnknownParameter, MissingParameter, ShapeMismatch };

    WeightFileError(Kind kind, const std::string& message) : DataError(message), kind_(kind) {}
    Kind kind() const { return kind_; }

 private:
    Kind kind_;
};

struct LoadedWeights {
    ModelConfig config;
    WeightStore weights;
};

/// Serializes the store as given; save_weights additionally checks it
/// against the config first.
std::vector<std::uint8_t> encode_weights(const WeightStore& weights, const ModelConfig& config);
LoadedWeights decode_weights(std::span<const std::uint8_t> bytes);

void save_weights(const WeightStore& weights, const ModelConfig& config, const std::filesystem::path& path);
LoadedWeights load_weights(const std::filesystem::path& path);

/// CRC-32 (IEEE 802.3 polynomial), as used for the checkpoint trailer.
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace transnet
