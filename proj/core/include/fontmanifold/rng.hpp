#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace fm {

/// Deterministic random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard, so identical seeds give identical streams on every platform.
/// All derived draws (uniform reals, bounded integers, normals) are computed
/// here rather than through <random> distributions, whose algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 7) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n), unbiased (rejection on the low remainder).
  std::uint64_t uniform_int(std::uint64_t n);

  /// Standard normal draw via the Box-Muller transform. Draws come in pairs;
  /// the second of each pair is held for the next call.
  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

}  // namespace fm
