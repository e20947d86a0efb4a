#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "loadcycle/nn/model.hpp"

namespace loadcycle::nn {

// Layout (little-endian): "LCM1", u16 version, spec descriptor, norm stats,
// u32 tensor count, tensor records, u32 CRC-32 of everything before it.
inline constexpr std::uint16_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const Model& model);
// Throws corrupt_file (bad magic, checksum, truncation, inconsistent tensors)
// or version_mismatch.
Model deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace loadcycle::nn
