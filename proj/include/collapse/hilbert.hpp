#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "collapse/rng.hpp"

namespace collapse {

using Complex = std::complex<double>;

/// Accumulated-sum tolerance for normalization invariants.
inline constexpr double kSumTolerance = 1e-9;
/// Tolerance for single-shot algebraic identities.
inline constexpr double kIdentityTolerance = 1e-12;

/// Binning of the many-body spectrum into macrostates.
///
/// Macrostate n owns micro_counts[n] microstates whose energies lie within
/// bin_width of bin_energies[n]. Distinct bins must not overlap, i.e. centres
/// are separated by more than 2 * bin_width.
struct MacroConfig {
  std::vector<std::size_t> micro_counts;
  std::vector<double> bin_energies;
  double bin_width = 1.0;
  double hbar = 1.0;

  std::size_t macro_count() const { return micro_counts.size(); }
  std::size_t total_dim() const;
  /// Start index of each block in the contiguous layout, plus the end (size M+1).
  std::vector<std::size_t> offsets() const;
  /// Throws UsageError when an invariant is broken.
  void validate() const;
};

/// Macroscopic weights p_n on the probability simplex.
class SuperpositionState {
 public:
  /// Throws UsageError unless every p_n is in [0, 1] and the sum is 1.
  explicit SuperpositionState(std::vector<double> p);

  std::span<const double> p() const { return p_; }
  double operator[](std::size_t n) const { return p_[n]; }
  std::size_t size() const { return p_.size(); }

 private:
  std::vector<double> p_;
};

/// Full microscopic amplitude vector b_n^alpha, laid out block by block.
struct MicroState {
  std::vector<Complex> b;
  std::vector<std::size_t> offsets;  // size M+1, offsets.back() == b.size()

  std::size_t macro_count() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::span<const Complex> block(std::size_t n) const {
    return std::span<const Complex>(b).subspan(offsets[n], offsets[n + 1] - offsets[n]);
  }
  double norm_squared() const;
};

/// Normalized microscopic amplitudes eta_n^alpha of each macrostate.
struct MicroAmplitudes {
  std::vector<std::vector<Complex>> eta;

  std::size_t macro_count() const { return eta.size(); }
  /// Throws UsageError unless every block is a unit vector.
  void validate() const;
};

/// p_n = sum_alpha |b_n^alpha|^2.
SuperpositionState project_macro(const MicroState& micro, const MacroConfig& cfg);

/// Haar-uniform unit vector per block (complex Gaussian, then normalized).
MicroAmplitudes sample_micro_amplitudes(const MacroConfig& cfg, RngStream& rng);

/// b_n^alpha = sqrt(p_n) eta_n^alpha.
MicroState assemble_micro(const SuperpositionState& p, const MicroAmplitudes& eta);

}  // namespace collapse
