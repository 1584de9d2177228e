#pragma once

#include <cstdint>
#include <filesystem>

#include "acrm/engine.hpp"

namespace acrm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (little-endian): "ACRM", u32 version, u64 reservoir offset, network
/// shape, named parameter blobs (u32 name length, name, u8 dtype tag, u32 rank,
/// u32 dims, payload), codebook block, engine block (config text, optimizer
/// moments, rng state, counters, metrics log, frozen baseline), the reservoir
/// snapshot at the recorded offset, and a trailing CRC-32 of all prior bytes.
void save_checkpoint(const Engine& engine, const std::filesystem::path& path);
Engine load_checkpoint(const std::filesystem::path& path);

}  // namespace acrm
