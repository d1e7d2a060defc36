#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace nsrlab {

/// Seeded random source. All draws are derived from raw 64-bit engine output
/// so sequences are identical across standard libraries and platforms.
///
/// Independent substreams are keyed by a tuple of integers (for example
/// seed, step, prompt) and mixed through SplitMix64, so the draws a prompt
/// sees do not depend on the order in which prompts are processed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller.
  double normal();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Index drawn from a normalized discrete distribution.
  std::size_t categorical(std::span<const double> probs);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace nsrlab
