#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "collapse/hilbert.hpp"

namespace collapse {

struct PhysicalMode {
  double mass = 1.0;
  double k = 0.0;
  double c = 1.0;
  double hbar = 1.0;
};

/// Single free mode of tau0 b'' = i b' - omega_k b.
struct ModeConfig {
  double tau0 = 1.0;     // hbar / (2 m c^2)
  double omega_k = 0.0;  // hbar k^2 / (2 m)
  std::optional<PhysicalMode> physical;

  static ModeConfig from_physical(double mass, double k, double c, double hbar);
  void validate() const;
};

/// Roots of tau0 w^2 + w - omega_k = 0, from b = e^{-i w t}.
struct Spectrum {
  double omega_plus = 0.0;
  double omega_minus = 0.0;
};

/// omega_plus = 2 omega_k / (1 + sqrt(1 + 4 omega_k tau0)), omega_minus = -1/tau0 - omega_plus.
/// With physical inputs, also checks hbar w = -mc^2 +- sqrt(m^2c^4 + hbar^2k^2c^2)
/// to 1e-12 relative and throws IntegrationError otherwise.
Spectrum spectrum(const ModeConfig& cfg);

/// |tau0 w^2 + w - omega_k| / (tau0 w^2 + |w| + omega_k).
double characteristic_residual(const ModeConfig& cfg, double omega);

struct FrequencyFit {
  std::vector<double> omegas;  // descending
  std::vector<Complex> amplitudes;
  double relative_residual = 0.0;  // |signal - model| / |signal|
};

/// Fits signal[n] ~ sum_k a_k e^{-i w_k n h} with up to max_components
/// frequencies: a windowed FFT peak search on the running residual, then a
/// joint Gauss-Newton refinement of all frequencies. Stops early once the
/// relative residual drops below 1e-10.
FrequencyFit fit_frequencies(std::span<const Complex> signal, double h, std::size_t max_components);

struct TimeDomainCheck {
  Spectrum expected;
  FrequencyFit fit;
  double omega_plus = 0.0;   // fitted frequency nearest expected.omega_plus
  double omega_minus = 0.0;  // NaN when only one frequency was found
  double rel_err_plus = 0.0;
  double rel_err_minus = 0.0;
  std::size_t steps = 0;
};

/// Integrates the mode with RK4 from (b0, bdot0) and fits the frequencies.
/// Throws UsageError unless dt <= tau0/50 and t_max >= 20/|w+ - w-|.
TimeDomainCheck time_domain_check(const ModeConfig& cfg, double t_max, double dt, Complex b0 = 1.0,
                                  Complex bdot0 = 0.0);

}  // namespace collapse
