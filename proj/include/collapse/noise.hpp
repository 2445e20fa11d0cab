#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "collapse/rng.hpp"

namespace collapse {

using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;

enum class NoiseKind { White, OrnsteinUhlenbeck };

/// Statistics of the Hermitian noise matrix W_nm.
///
/// sigma is symmetric, nonnegative, with zero diagonal. For White noise
/// E[dW_nm conj(dW_nm)] = sigma_nm^2 dt; for OrnsteinUhlenbeck the correlator
/// is sigma_nm^2 (lambda/2) exp(-lambda |t - t'|), which integrates to sigma^2.
struct NoiseSpec {
  RealMatrix sigma;
  NoiseKind kind = NoiseKind::White;
  double lambda = 0.0;  // 1 / tau_c, OU only
  double hbar = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(sigma.rows()); }
  void validate() const;

  /// Every off-diagonal pair gets the same sigma.
  static NoiseSpec uniform(std::size_t m, double sigma, NoiseKind kind = NoiseKind::White,
                           double lambda = 0.0, double hbar = 1.0);
};

struct NoiseIncrement {
  ComplexMatrix dW;
  double dt = 0.0;
};

struct OuState {
  ComplexMatrix W;
};

/// Hermitian white-noise increment over a step dt.
NoiseIncrement white_increment(const NoiseSpec& spec, double dt, RngStream& rng);
/// Same, writing into a preallocated increment (hot loops).
void white_increment(const NoiseSpec& spec, double dt, RngStream& rng, NoiseIncrement& out);

/// Draw from the stationary law of the matrix OU process.
OuState ou_init(const NoiseSpec& spec, RngStream& rng);

/// Exact OU transition over dt: W' = e^{-lambda dt} W + sqrt(1 - e^{-2 lambda dt}) G.
OuState ou_step(const NoiseSpec& spec, const OuState& state, double dt, RngStream& rng);
void ou_step_inplace(const NoiseSpec& spec, OuState& state, double dt, RngStream& rng);

/// Real scalar OU process with <W(t) W(t')> = sigma^2 (lambda/2) e^{-lambda|t-t'|}.
/// Drives the single-amplitude inertial experiment.
class ScalarOu {
 public:
  ScalarOu(double sigma, double lambda);

  double stationary_variance() const { return sigma_ * sigma_ * lambda_ / 2.0; }
  double value() const { return value_; }

  /// Draws a fresh stationary value; `sign` = -1 mirrors the draw.
  void init(RngStream& rng, double sign = 1.0);
  /// Advances by dt with an exact transition.
  void step(double dt, RngStream& rng, double sign = 1.0);
  void set(double value) { value_ = value; }

 private:
  double sigma_;
  double lambda_;
  double value_ = 0.0;
};

/// c_k = (1 / (n - k)) sum_t x_t conj(x_{t+k}), k = 0..max_lag.
/// Throws UsageError unless trace.size() >= 5 * max(max_lag, 1).
std::vector<std::complex<double>> estimate_autocorrelation(
    std::span<const std::complex<double>> trace, std::size_t max_lag);

}  // namespace collapse
