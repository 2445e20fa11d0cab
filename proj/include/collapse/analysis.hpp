#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "collapse/ensemble.hpp"
#include "collapse/hilbert.hpp"
#include "collapse/noise.hpp"

namespace collapse {

inline constexpr double kHbarSI = 1.054571817e-34;     // J s
inline constexpr double kSpeedOfLight = 299792458.0;   // m / s
inline constexpr double kConfidenceZ = 1.959963984540054;  // two-sided 95%

struct RateFit {
  double rate = 0.0;  // minus the fitted log-slope; positive for decay
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t points = 0;
  bool jackknife = false;  // se from leave-one-batch-out refits, else from the WLS covariance
};

/// Weighted least squares of log c(t) against t on the window that starts
/// at the first sample after t = 0 and stops before the first sample with
/// c < 10 se. Weights are (c / se)^2, or uniform when every se is 0.
/// Throws InsufficientDataError when fewer than 3 points qualify.
RateFit decay_fit(std::span<const double> times, std::span<const double> values,
                  std::span<const double> se);

/// Same on the ensemble cross moment <p_k p_m>, with a leave-one-batch-out
/// jackknife error on the fixed window when the ensemble has >= 2 batches.
RateFit decay_fit(const EnsembleStats& stats, std::size_t k, std::size_t m);

struct BornResult {
  double chi_square = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
  std::size_t total = 0;
  std::vector<double> frequencies;
};

/// Pearson chi-square of outcome counts against p0 with M - 1 degrees of
/// freedom (M counts only macrostates with p0 > 0). A count in a macrostate
/// with p0 = 0 gives an infinite statistic and p-value 0.
/// Throws InsufficientDataError when the total is below 100 M.
BornResult born_test(std::span<const std::size_t> counts, const SuperpositionState& p0);
BornResult born_test(const EnsembleStats& stats, const SuperpositionState& p0);

struct MartingaleResult {
  double max_z = 0.0;
  std::size_t worst_time = 0;
  std::size_t worst_state = 0;
  bool pass = true;  // max_z <= 4
};

/// Worst |<p_n(t)> - p_n(0)| / se over all n and t. Entries with se = 0
/// count as z = 0 when the deviation is below 1e-12 and as +inf otherwise.
MartingaleResult martingale_check(const EnsembleStats& stats, const SuperpositionState& p0);

/// t_km = hbar^2 / sigma_km^2; NaN marks pairs with sigma_km = 0 and the diagonal.
RealMatrix collapse_time_estimate(const RealMatrix& sigma, double hbar);
/// hbar dE / |V|^2, the order-of-magnitude form.
double collapse_time_order_form(double delta_e, double v_bar, double hbar);
/// hbar dE / (pi |V|^2), i.e. hbar^2 / sigma^2 with sigma^2 = pi hbar |V|^2 / dE.
double collapse_time_from_coupling(double delta_e, double v_bar, double hbar);

struct RegimeReport {
  double delta_x = 0.0;
  double delta_e = 0.0;
  double v_max = 0.0;
  double tau_r = 0.0;  // delta_x / v_max
  double tau_c = 0.0;  // hbar / delta_e
  double ratio = 0.0;  // tau_r / tau_c
  bool ito_valid = false;
  double relativistic_ratio = 0.0;  // delta_x delta_e / (hbar c)
  bool relativistic_valid = false;
  double threshold = 100.0;
};

/// ito_valid is ratio >= threshold; the relativistic check uses c in place of v_max.
RegimeReport causality_report(double delta_x, double delta_e, double v_max, double hbar,
                              double threshold = 100.0, double c = kSpeedOfLight);

struct CoherentProduct {
  double sigma_e = 0.0;
  double sigma_x = 0.0;
  double product = 0.0;       // sigma_e * sigma_x
  double closed_form = 0.0;   // hbar sqrt(E / 2M)
  double half_hbar_v0 = 0.0;  // hbar V0 / 2, V0 = sqrt(2E / M)
};

/// Minimal Gaussian packet: sigma_E = sqrt(hbar omega E), sigma_X = sqrt(hbar / 2 M omega).
/// Throws UsageError for non-positive inputs or E < hbar omega.
CoherentProduct coherent_state_product(double mass, double omega, double energy, double hbar);

}  // namespace collapse
