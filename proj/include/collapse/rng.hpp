#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace collapse {

/// Pseudo-random stream owned by exactly one trajectory.
///
/// Streams are cheap to copy but are never shared between threads; parallel
/// work derives one stream per trajectory index through seed_stream().
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return uniform_(engine_); }

  /// Standard normal.
  double normal() { return normal_(engine_); }

  /// Circularly symmetric complex Gaussian with E|z|^2 = 1.
  std::complex<double> complex_normal() {
    constexpr double kHalf = 0.70710678118654752440;
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {kHalf * re, kHalf * im};
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stream for one trajectory of an experiment. The same
/// (master_seed, trajectory_index) pair always yields the same sequence.
RngStream seed_stream(std::uint64_t master_seed, std::uint64_t trajectory_index);

}  // namespace collapse
