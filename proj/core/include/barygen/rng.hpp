#pragma once

#include <cstdint>
#include <random>

namespace barygen {

/// Deterministic seeded random source. Every random choice in the library is
/// drawn through this class, and equal seeds plus equal call sequences give
/// bit-identical streams. The raw engine output is mapped to doubles and
/// bounded integers here rather than through std:: distributions, whose
/// output is implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  /// Uniform double in [0, 1).
  double uniform();

  /// Standard normal deviate (Box-Muller, one value per call).
  double normal();

  /// Uniform integer in [0, n). Requires n >= 1.
  std::size_t index(std::size_t n);

  /// Independent child stream: a pure function of (seed, stream). Parallel
  /// consumers must each own a distinct derived stream.
  [[nodiscard]] SeededRng derive(std::uint64_t stream) const;
  [[nodiscard]] SeededRng derive(std::uint64_t a, std::uint64_t b) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draw_count() const { return draws_; }

 private:
  std::uint64_t next_raw();

  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace barygen
