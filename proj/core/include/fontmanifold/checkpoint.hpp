#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fontmanifold/autodiff.hpp"

namespace fm::vae {

/// Binary model file:
///
///   "PFMC" | version u32 LE | header length u32 LE | UTF-8 JSON header |
///   tensor payloads (little-endian f64, directory order = sorted by name)
///
/// The header holds {"hyperparameters": {...}, "tensors": [{name, shape,
/// offset, count}]}; offsets are in bytes from the start of the payload.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  int latent_dim = 5;
  std::uint64_t seed = 7;
  int epochs_completed = 0;
  int batch_size = 64;
  double learning_rate = 1e-3;
  ad::ParameterSet params;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint);
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fm::vae
