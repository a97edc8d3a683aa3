#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace clarigen::numerics {

// Seeded generator. The distributions are implemented here rather than taken
// from <random> so a seed yields the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // [0, 1)
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // [0, n); n must be positive.
  std::size_t index(std::size_t n);
  // Draw from unnormalized nonnegative weights.
  std::size_t categorical(std::span<const double> weights);

  // Independent child stream, stable for a given (seed, stream id).
  Rng fork(std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace clarigen::numerics
