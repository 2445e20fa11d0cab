#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "collapse/hilbert.hpp"
#include "collapse/noise.hpp"
#include "collapse/rng.hpp"

namespace collapse {

enum class Scheme { ItoEulerMaruyama, StratonovichHeun, AmplitudeIto };
enum class ClampPolicy { ClampRenormalize };

/// Regularization of the b_m^2 / b_n drift in the amplitude form.
inline constexpr double kAmplitudeFloor = 1e-8;
/// Consecutive steps above 1 - epsilon before a trajectory counts as collapsed.
inline constexpr std::size_t kCollapseConfirmSteps = 10;

struct SdeConfig {
  NoiseSpec noise;
  double dt = 1e-3;
  double t_max = 10.0;
  Scheme scheme = Scheme::ItoEulerMaruyama;
  double collapse_epsilon = 1e-3;
  ClampPolicy clamp_policy = ClampPolicy::ClampRenormalize;
  std::size_t sample_every = 1;
  // Keep integrating after collapse is detected instead of stopping. Needed
  // for unbiased moments at late times; outcomes are unaffected.
  bool continue_after_collapse = false;

  void validate() const;
  /// Number of integration steps, round(t_max / dt).
  std::size_t step_count() const;
  /// Recorded times: every sample_every steps, plus the final step.
  std::vector<double> sample_times() const;
};

/// Raw Euler-Maruyama update of the p-form, before any clamping.
/// Sum-preserving in exact arithmetic because Im dW is antisymmetric.
std::vector<double> apply_ito_increment(std::span<const double> p, const ComplexMatrix& dW,
                                        double hbar);

/// Clamps negatives to 0 and renormalizes. Returns true when anything was clamped.
bool clamp_renormalize(std::vector<double>& p);

SuperpositionState step_ito_p(const SuperpositionState& p, const NoiseIncrement& dW, double hbar);

/// b'_n = b_n + sum_m Im(dW_nm) b_m / hbar - sum_m sigma_nm^2 b_m^2 / (4 hbar^2 max(b_n, floor)) dt.
std::vector<double> step_ito_b(std::span<const double> b, const NoiseIncrement& dW,
                               const NoiseSpec& spec);

/// Heun step of dp_n/dt = (2/hbar) sum_m sqrt(p_n p_m) Im W_nm with the smooth
/// noise taken at w_start (predictor) and w_end (corrector). Vertices are
/// fixed points. run_trajectory integrates the same dynamics on signed
/// amplitudes instead, so that paths can pass through p_n = 0.
SuperpositionState step_stratonovich_p(const SuperpositionState& p, const OuState& w_start,
                                       const OuState& w_end, const NoiseSpec& spec, double dt);
/// Same with W frozen over the step.
SuperpositionState step_stratonovich_p(const SuperpositionState& p, const OuState& w,
                                       const NoiseSpec& spec, double dt);

struct TrajectoryResult {
  std::vector<double> times;
  std::vector<std::vector<double>> path;  // path[i] is p at times[i]
  std::optional<std::size_t> outcome;
  double collapse_time = 0.0;  // meaningful only with an outcome
  std::size_t clamp_events = 0;
  std::size_t steps = 0;
};

/// Integrates cfg.scheme from p0. Without continue_after_collapse the path
/// is held at the collapsed vertex once collapse is confirmed.
/// Throws IntegrationError on a non-finite state.
TrajectoryResult run_trajectory(const SdeConfig& cfg, const SuperpositionState& p0, RngStream& rng);

enum class BdotPolicy { SchrodingerConsistent, Zero };

struct InertialConfig {
  double tau_r = 1.0;
  double sigma = 1.0;
  double lambda = 1.0;
  double hbar = 1.0;
  Complex b0 = 1.0;
  BdotPolicy bdot0_policy = BdotPolicy::SchrodingerConsistent;
  double dt = 1e-3;
  double t_max = 10.0;
  std::size_t ensemble_size = 10000;  // even: realizations come in mirrored pairs
  std::size_t sample_every = 1;
  // Optional drift window [window_start, window_end]; both must be sample
  // times. Disabled when window_end <= window_start.
  double window_start = 0.0;
  double window_end = 0.0;

  void validate() const;
  std::size_t step_count() const;
  bool has_window() const { return window_end > window_start; }
};

struct InertialResult {
  std::vector<double> times;
  std::vector<Complex> mean_delta_b;
  std::vector<double> se_re;
  std::vector<double> se_im;
  // [<db(window_end)> - <db(window_start)>] / (window_end - window_start)
  Complex window_drift = 0.0;
  double window_se_re = 0.0;
  double window_se_im = 0.0;
};

/// Ensemble mean of b(t) - b(0) for tau_r b'' = i b' - W b / hbar with a real
/// scalar OU noise W. Realizations 2j and 2j+1 share a stream with mirrored
/// noise, so errors are computed from pair averages. Pair j draws from
/// seed_stream(seed, j).
InertialResult run_inertial(const InertialConfig& cfg, std::uint64_t seed, unsigned threads = 1);

/// -(sigma^2 b0 / 2 hbar^2) A(t) / (1 + i lambda tau_r),
/// A(t) = 1 - e^{-lambda t} [1 - i lambda tau_r (e^{i t / tau_r} - 1)].
Complex analytic_drift(double t, double lambda, double tau_r, double sigma, Complex b0, double hbar);

/// Closed-form integral of analytic_drift over [t1, t2].
Complex analytic_drift_integral(double t1, double t2, double lambda, double tau_r, double sigma,
                                Complex b0, double hbar);

}  // namespace collapse
