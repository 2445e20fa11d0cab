#include "collapse/analysis.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "collapse/errors.hpp"

namespace collapse {

namespace {

struct Window {
  std::size_t first = 0;
  std::size_t last = 0;  // exclusive
};

Window fit_window(std::span<const double> times, std::span<const double> values, std::span<const double> se) {
  if (times.size() != values.size() || times.size() != se.size()) {
    throw StructuralError("decay_fit: times, values and errors differ in length");
  }
  Window w;
  w.first = 0;
  while (w.first < times.size() && !(times[w.first] > 0.0)) ++w.first;
  w.last = w.first;
  while (w.last < times.size() && values[w.last] > 0.0 && values[w.last] >= 10.0 * se[w.last]) ++w.last;
  if (w.last - w.first < 3) {
    throw InsufficientDataError("decay_fit: fewer than 3 points in the fit window");
  }
  return w;
}

struct LineFit {
  double slope = 0.0;
  double slope_se = 0.0;
};

LineFit weighted_line(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  LineFit out;
  out.slope = sxy / sxx;
  out.slope_se = std::sqrt(1.0 / sxx);
  return out;
}

// Fits log(values) on the window with fixed weights.
LineFit fit_on_window(std::span<const double> times, std::span<const double> values,
                      const std::vector<double>& weights, const Window& w) {
  std::vector<double> x, y;
  for (std::size_t i = w.first; i < w.last; ++i) {
    if (!(values[i] > 0.0)) throw InsufficientDataError("decay_fit: non-positive moment in the window");
    x.push_back(times[i]);
    y.push_back(std::log(values[i]));
  }
  return weighted_line(x, y, weights);
}

std::vector<double> window_weights(std::span<const double> values, std::span<const double> se, const Window& w) {
  bool any_error = false;
  for (std::size_t i = w.first; i < w.last; ++i) any_error = any_error || se[i] > 0.0;
  std::vector<double> out;
  for (std::size_t i = w.first; i < w.last; ++i) {
    out.push_back(any_error ? std::pow(values[i] / se[i], 2) : 1.0);
  }
  return out;
}

RateFit finish(double rate, double se, const Window& w, std::span<const double> times, bool jackknife) {
  RateFit out;
  out.rate = rate;
  out.se = se;
  out.ci_low = rate - kConfidenceZ * se;
  out.ci_high = rate + kConfidenceZ * se;
  out.t_start = times[w.first];
  out.t_end = times[w.last - 1];
  out.points = w.last - w.first;
  out.jackknife = jackknife;
  return out;
}

}  // namespace

RateFit decay_fit(std::span<const double> times, std::span<const double> values, std::span<const double> se) {
  const Window w = fit_window(times, values, se);
  const std::vector<double> weights = window_weights(values, se, w);
  const LineFit fit = fit_on_window(times, values, weights, w);
  bool any_error = false;
  for (std::size_t i = w.first; i < w.last; ++i) any_error = any_error || se[i] > 0.0;
  return finish(-fit.slope, any_error ? fit.slope_se : 0.0, w, times, false);
}

RateFit decay_fit(const EnsembleStats& stats, std::size_t k, std::size_t m) {
  const std::size_t j = stats.pair_index(k, m);
  const std::size_t n_t = stats.times.size();
  std::vector<double> values(n_t), se(n_t);
  for (std::size_t t = 0; t < n_t; ++t) {
    values[t] = stats.cross[t][j];
    se[t] = stats.se_cross[t][j];
  }
  const Window w = fit_window(stats.times, values, se);
  const std::vector<double> weights = window_weights(values, se, w);
  const LineFit full = fit_on_window(stats.times, values, weights, w);

  const std::size_t batches = stats.batch_sizes.size();
  if (batches < 2) return finish(-full.slope, full.slope_se, w, stats.times, false);

  // Leave-one-batch-out refits on the same window and weights.
  std::vector<double> total(n_t, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t t = 0; t < n_t; ++t) total[t] += stats.batch_cross_sum[b][t][j];
  }
  std::vector<double> rates;
  std::vector<double> loo(n_t);
  for (std::size_t b = 0; b < batches; ++b) {
    const auto remaining = static_cast<double>(stats.n_trajectories - stats.batch_sizes[b]);
    for (std::size_t t = 0; t < n_t; ++t) loo[t] = (total[t] - stats.batch_cross_sum[b][t][j]) / remaining;
    rates.push_back(-fit_on_window(stats.times, loo, weights, w).slope);
  }
  double mean = 0.0;
  for (double r : rates) mean += r;
  mean /= static_cast<double>(batches);
  double ss = 0.0;
  for (double r : rates) ss += (r - mean) * (r - mean);
  const double se_jk = std::sqrt(static_cast<double>(batches - 1) / static_cast<double>(batches) * ss);
  return finish(-full.slope, se_jk, w, stats.times, true);
}

BornResult born_test(std::span<const std::size_t> counts, const SuperpositionState& p0) {
  if (counts.size() != p0.size()) throw StructuralError("born_test: counts and p0 differ in length");
  BornResult out;
  for (std::size_t c : counts) out.total += c;
  if (out.total < 100 * counts.size()) {
    throw InsufficientDataError("born_test: " + std::to_string(out.total) + " outcomes, need at least " +
                                std::to_string(100 * counts.size()));
  }
  const auto total = static_cast<double>(out.total);
  std::size_t support = 0;
  bool impossible = false;
  for (std::size_t n = 0; n < counts.size(); ++n) {
    out.frequencies.push_back(static_cast<double>(counts[n]) / total);
    if (p0[n] > 0.0) {
      ++support;
      const double expected = total * p0[n];
      const double d = static_cast<double>(counts[n]) - expected;
      out.chi_square += d * d / expected;
    } else if (counts[n] > 0) {
      impossible = true;
    }
  }
  out.dof = support > 0 ? support - 1 : 0;
  if (impossible) {
    out.chi_square = std::numeric_limits<double>::infinity();
    out.p_value = 0.0;
  } else if (out.dof == 0) {
    out.p_value = 1.0;
  } else {
    const boost::math::chi_squared_distribution<double> law(static_cast<double>(out.dof));
    out.p_value = boost::math::cdf(boost::math::complement(law, out.chi_square));
  }
  return out;
}

BornResult born_test(const EnsembleStats& stats, const SuperpositionState& p0) {
  return born_test(std::span<const std::size_t>(stats.outcome_counts), p0);
}

MartingaleResult martingale_check(const EnsembleStats& stats, const SuperpositionState& p0) {
  if (stats.macro_count != p0.size()) throw StructuralError("martingale_check: macrostate count mismatch");
  MartingaleResult out;
  for (std::size_t t = 0; t < stats.times.size(); ++t) {
    for (std::size_t n = 0; n < p0.size(); ++n) {
      const double dev = std::abs(stats.mean_p[t][n] - p0[n]);
      const double se = stats.se_p[t][n];
      double z = 0.0;
      if (se > 0.0) {
        z = dev / se;
      } else if (dev > 1e-12) {
        z = std::numeric_limits<double>::infinity();
      }
      if (z > out.max_z) {
        out.max_z = z;
        out.worst_time = t;
        out.worst_state = n;
      }
    }
  }
  out.pass = out.max_z <= 4.0;
  return out;
}

RealMatrix collapse_time_estimate(const RealMatrix& sigma, double hbar) {
  if (!(hbar > 0.0)) throw UsageError("collapse_time_estimate: hbar must be positive");
  RealMatrix out(sigma.rows(), sigma.cols());
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    for (Eigen::Index j = 0; j < sigma.cols(); ++j) {
      const double s = sigma(i, j);
      out(i, j) = (i != j && s > 0.0) ? hbar * hbar / (s * s) : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

double collapse_time_order_form(double delta_e, double v_bar, double hbar) {
  if (!(delta_e > 0.0) || !(v_bar > 0.0) || !(hbar > 0.0)) {
    throw UsageError("collapse_time_order_form: inputs must be positive");
  }
  return hbar * delta_e / (v_bar * v_bar);
}

double collapse_time_from_coupling(double delta_e, double v_bar, double hbar) {
  return collapse_time_order_form(delta_e, v_bar, hbar) / std::numbers::pi;
}

RegimeReport causality_report(double delta_x, double delta_e, double v_max, double hbar, double threshold,
                              double c) {
  if (!(delta_x > 0.0) || !(delta_e > 0.0) || !(v_max > 0.0) || !(hbar > 0.0) || !(threshold > 0.0) ||
      !(c > 0.0)) {
    throw UsageError("causality_report: inputs must be positive");
  }
  RegimeReport r;
  r.delta_x = delta_x;
  r.delta_e = delta_e;
  r.v_max = v_max;
  r.threshold = threshold;
  r.tau_c = hbar / delta_e;
  r.tau_r = delta_x / v_max;
  r.ratio = delta_x * delta_e / (hbar * v_max);
  r.ito_valid = r.ratio >= threshold;
  r.relativistic_ratio = delta_x * delta_e / (hbar * c);
  r.relativistic_valid = r.relativistic_ratio >= threshold;
  return r;
}

CoherentProduct coherent_state_product(double mass, double omega, double energy, double hbar) {
  if (!(mass > 0.0) || !(omega > 0.0) || !(energy > 0.0) || !(hbar > 0.0)) {
    throw UsageError("coherent_state_product: inputs must be positive");
  }
  if (energy < hbar * omega) throw UsageError("coherent_state_product: need E >= hbar omega");
  CoherentProduct out;
  out.sigma_e = std::sqrt(hbar * omega * energy);
  out.sigma_x = std::sqrt(hbar / (2.0 * mass * omega));
  out.product = out.sigma_e * out.sigma_x;
  out.closed_form = hbar * std::sqrt(energy / (2.0 * mass));
  out.half_hbar_v0 = 0.5 * hbar * std::sqrt(2.0 * energy / mass);
  const double rel = std::abs(out.product - out.closed_form) / out.closed_form;
  if (rel > kIdentityTolerance) {
    throw IntegrationError("coherent_state_product: identity violated by " + std::to_string(rel));
  }
  return out;
}

}  // namespace collapse
