#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "prefalign/model.hpp"

namespace prefalign {

/// A denoiser plus where it came from.
struct Checkpoint {
  Denoiser model;
  std::uint64_t config_hash = 0;
  std::uint64_t step = 0;
};

/// "PFC1" container; weights are stored as f32.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rounds every weight to f32, i.e. what a save/load cycle produces.
void round_to_storage(MlpParams<double>& params);

}  // namespace prefalign
