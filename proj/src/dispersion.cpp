#include "collapse/dispersion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "collapse/errors.hpp"

namespace collapse {

namespace {

bool close_relative(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

// Coarse frequency of the strongest line: Hann window, 8x zero padding,
// parabolic interpolation of the log magnitude around the peak bin.
double coarse_peak(std::span<const Complex> x, double h) {
  const std::size_t n = x.size();
  std::size_t padded = 1;
  while (padded < 8 * n) padded <<= 1;
  std::vector<Complex> in(padded, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    in[i] = w * x[i];
  }
  std::vector<Complex> out;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  std::size_t best = 0;
  for (std::size_t k = 1; k < padded; ++k) {
    if (std::abs(out[k]) > std::abs(out[best])) best = k;
  }
  const double m0 = std::log(std::abs(out[(best + padded - 1) % padded]) + 1e-300);
  const double m1 = std::log(std::abs(out[best]) + 1e-300);
  const double m2 = std::log(std::abs(out[(best + 1) % padded]) + 1e-300);
  const double denom = m0 - 2.0 * m1 + m2;
  const double shift = denom != 0.0 ? 0.5 * (m0 - m2) / denom : 0.0;
  double bin = static_cast<double>(best) + shift;
  if (bin > static_cast<double>(padded) / 2.0) bin -= static_cast<double>(padded);
  // X_k = sum x_n e^{-2 pi i k n / N} peaks where -w h = 2 pi k / N.
  return -2.0 * std::numbers::pi * bin / (static_cast<double>(padded) * h);
}

struct Projection {
  Eigen::VectorXcd amplitudes;
  Eigen::VectorXcd residual;
};

Projection project(const Eigen::VectorXcd& s, const Eigen::VectorXd& t, const std::vector<double>& omegas) {
  Eigen::MatrixXcd E(s.size(), static_cast<Eigen::Index>(omegas.size()));
  for (Eigen::Index k = 0; k < E.cols(); ++k) {
    for (Eigen::Index i = 0; i < s.size(); ++i) E(i, k) = std::polar(1.0, -omegas[static_cast<std::size_t>(k)] * t(i));
  }
  Projection p;
  p.amplitudes = E.colPivHouseholderQr().solve(s);
  p.residual = s - E * p.amplitudes;
  return p;
}

void gauss_newton(const Eigen::VectorXcd& s, const Eigen::VectorXd& t, std::vector<double>& omegas) {
  const auto k_count = static_cast<Eigen::Index>(omegas.size());
  for (int iter = 0; iter < 100; ++iter) {
    const Projection p = project(s, t, omegas);
    // Model derivative d/dw_k of a_k e^{-i w_k t} = -i t a_k e^{-i w_k t}.
    Eigen::MatrixXcd J(s.size(), k_count);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        J(i, k) = Complex(0.0, -t(i)) * p.amplitudes(k) * std::polar(1.0, -omegas[static_cast<std::size_t>(k)] * t(i));
      }
    }
    const Eigen::MatrixXd normal = (J.adjoint() * J).real();
    const Eigen::VectorXd rhs = (J.adjoint() * p.residual).real();
    const Eigen::VectorXd step = normal.ldlt().solve(rhs);
    double biggest = 0.0;
    for (Eigen::Index k = 0; k < k_count; ++k) {
      omegas[static_cast<std::size_t>(k)] += step(k);
      biggest = std::max(biggest, std::abs(step(k)) / std::max(std::abs(omegas[static_cast<std::size_t>(k)]), 1e-300));
    }
    if (!(biggest > 1e-15)) break;
  }
}

}  // namespace

ModeConfig ModeConfig::from_physical(double mass, double k, double c, double hbar) {
  if (!(mass > 0.0) || !(c > 0.0) || !(hbar > 0.0) || !std::isfinite(k)) {
    throw UsageError("ModeConfig: mass, c and hbar must be positive");
  }
  ModeConfig cfg;
  cfg.tau0 = hbar / (2.0 * mass * c * c);
  cfg.omega_k = hbar * k * k / (2.0 * mass);
  cfg.physical = PhysicalMode{mass, k, c, hbar};
  return cfg;
}

void ModeConfig::validate() const {
  if (!(tau0 > 0.0) || !std::isfinite(tau0)) throw UsageError("ModeConfig: tau0 must be positive");
  if (!(omega_k >= 0.0) || !std::isfinite(omega_k)) throw UsageError("ModeConfig: omega_k must be nonnegative");
  if (physical) {
    const PhysicalMode& ph = *physical;
    const double t = ph.hbar / (2.0 * ph.mass * ph.c * ph.c);
    const double o = ph.hbar * ph.k * ph.k / (2.0 * ph.mass);
    if (!close_relative(tau0, t, kIdentityTolerance) || !(close_relative(omega_k, o, kIdentityTolerance))) {
      throw UsageError("ModeConfig: tau0 / omega_k inconsistent with the physical inputs");
    }
  }
}

Spectrum spectrum(const ModeConfig& cfg) {
  cfg.validate();
  Spectrum s;
  s.omega_plus = 2.0 * cfg.omega_k / (1.0 + std::sqrt(1.0 + 4.0 * cfg.omega_k * cfg.tau0));
  s.omega_minus = -1.0 / cfg.tau0 - s.omega_plus;
  if (cfg.physical) {
    const PhysicalMode& ph = *cfg.physical;
    const double rest = ph.mass * ph.c * ph.c;
    const double pc = ph.hbar * ph.k * ph.c;
    const double root = std::sqrt(rest * rest + pc * pc);
    const double e_plus = pc * pc / (rest + root);  // -mc^2 + root without cancellation
    const double e_minus = -rest - root;
    if (!close_relative(ph.hbar * s.omega_plus, e_plus, kIdentityTolerance) ||
        !close_relative(ph.hbar * s.omega_minus, e_minus, kIdentityTolerance)) {
      throw IntegrationError("spectrum: mode and relativistic forms disagree");
    }
  }
  return s;
}

double characteristic_residual(const ModeConfig& cfg, double omega) {
  const double quad = cfg.tau0 * omega * omega;
  const double scale = quad + std::abs(omega) + cfg.omega_k;
  if (scale == 0.0) return 0.0;
  return std::abs(quad + omega - cfg.omega_k) / scale;
}

FrequencyFit fit_frequencies(std::span<const Complex> signal, double h, std::size_t max_components) {
  if (signal.size() < 16) throw UsageError("fit_frequencies: need at least 16 samples");
  if (!(h > 0.0)) throw UsageError("fit_frequencies: sample spacing must be positive");
  if (max_components == 0) throw UsageError("fit_frequencies: max_components must be >= 1");
  const auto n = static_cast<Eigen::Index>(signal.size());
  const Eigen::VectorXcd s = Eigen::Map<const Eigen::VectorXcd>(signal.data(), n);
  // Centered time axis keeps the Gauss-Newton normal equations well scaled.
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = (static_cast<double>(i) - 0.5 * static_cast<double>(n - 1)) * h;
  const double norm = s.norm();
  if (norm == 0.0) throw UsageError("fit_frequencies: signal is identically zero");

  FrequencyFit out;
  std::vector<double> omegas;
  Eigen::VectorXcd residual = s;
  for (std::size_t c = 0; c < max_components; ++c) {
    std::vector<Complex> r(residual.data(), residual.data() + residual.size());
    omegas.push_back(coarse_peak(r, h));
    gauss_newton(s, t, omegas);
    residual = project(s, t, omegas).residual;
    if (residual.norm() <= 1e-10 * norm) break;
  }
  const Projection p = project(s, t, omegas);
  std::vector<std::size_t> order(omegas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return omegas[a] > omegas[b]; });
  for (std::size_t i : order) {
    out.omegas.push_back(omegas[i]);
    // Undo the centering so amplitudes refer to the first sample.
    const double t0 = -0.5 * static_cast<double>(n - 1) * h;
    out.amplitudes.push_back(p.amplitudes(static_cast<Eigen::Index>(i)) * std::polar(1.0, -omegas[i] * t0));
  }
  out.relative_residual = p.residual.norm() / norm;
  return out;
}

TimeDomainCheck time_domain_check(const ModeConfig& cfg, double t_max, double dt, Complex b0, Complex bdot0) {
  TimeDomainCheck out;
  out.expected = spectrum(cfg);
  const double gap = std::abs(out.expected.omega_plus - out.expected.omega_minus);
  if (!(dt > 0.0) || dt > cfg.tau0 / 50.0 * (1.0 + 1e-12)) {
    throw UsageError("time_domain_check: dt must be in (0, tau0/50]");
  }
  if (!(t_max >= 20.0 / gap)) {
    throw UsageError("time_domain_check: t_max must be at least 20/|w+ - w-| = " + std::to_string(20.0 / gap));
  }
  // Sample fast enough to resolve any root: |w| <= 1/tau0 + omega_k.
  const double w_bound = 1.0 / cfg.tau0 + cfg.omega_k;
  const double h_max = std::numbers::pi / (2.0 * w_bound);
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(h_max / dt)));
  const auto steps = static_cast<std::size_t>(std::llround(t_max / dt));

  const Complex i(0.0, 1.0);
  const double inv_tau = 1.0 / cfg.tau0;
  auto accel = [&](Complex b, Complex u) { return (i * u - cfg.omega_k * b) * inv_tau; };
  Complex b = b0;
  Complex u = bdot0;
  std::vector<Complex> samples{b};
  for (std::size_t s = 1; s <= steps; ++s) {
    const Complex kb1 = u, ku1 = accel(b, u);
    const Complex kb2 = u + 0.5 * dt * ku1, ku2 = accel(b + 0.5 * dt * kb1, kb2);
    const Complex kb3 = u + 0.5 * dt * ku2, ku3 = accel(b + 0.5 * dt * kb2, kb3);
    const Complex kb4 = u + dt * ku3, ku4 = accel(b + dt * kb3, kb4);
    b += dt / 6.0 * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4);
    u += dt / 6.0 * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4);
    if (s % stride == 0) samples.push_back(b);
  }
  out.steps = steps;
  out.fit = fit_frequencies(samples, static_cast<double>(stride) * dt, 2);

  auto nearest = [&](double target) {
    double best = out.fit.omegas.front();
    for (double w : out.fit.omegas) {
      if (std::abs(w - target) < std::abs(best - target)) best = w;
    }
    return best;
  };
  auto rel = [](double got, double want, double scale) { return std::abs(got - want) / scale; };
  // omega_plus can be 0 (k = 0); measure its error against the gap instead.
  out.omega_plus = nearest(out.expected.omega_plus);
  out.rel_err_plus = rel(out.omega_plus, out.expected.omega_plus,
                         out.expected.omega_plus != 0.0 ? std::abs(out.expected.omega_plus) : gap);
  if (out.fit.omegas.size() >= 2) {
    out.omega_minus = nearest(out.expected.omega_minus);
    out.rel_err_minus = rel(out.omega_minus, out.expected.omega_minus, std::abs(out.expected.omega_minus));
  } else {
    out.omega_minus = std::numeric_limits<double>::quiet_NaN();
    out.rel_err_minus = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace collapse
