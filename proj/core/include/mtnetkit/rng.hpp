#pragma once

#include <cstdint>

#include "mtnetkit/tensor.hpp"

namespace mtnet {

/// SplitMix64 generator. The sample stream depends only on the seed, so
/// weight initialisation is reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; consumes two uniforms per sample.
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Tensor of i.i.d. N(0, stddev^2) samples, filled in row-major order.
  Tensor gaussian(Tensor::Shape shape, double stddev);
  Tensor uniform_tensor(Tensor::Shape shape, double lo, double hi);

 private:
  std::uint64_t state_;
};

/// Independent seed for a named sub-stream of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace mtnet
