#include "collapse/sde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "collapse/errors.hpp"
#include "collapse/parallel.hpp"

namespace collapse {

namespace {

std::size_t rounded_steps(double t_max, double dt) {
  return static_cast<std::size_t>(std::llround(t_max / dt));
}

std::vector<double> sample_grid(std::size_t steps, std::size_t every, double dt) {
  std::vector<double> out;
  for (std::size_t s = 0; s <= steps; s += every) out.push_back(static_cast<double>(s) * dt);
  if (steps % every != 0) out.push_back(static_cast<double>(steps) * dt);
  return out;
}

bool is_sample_step(std::size_t s, std::size_t steps, std::size_t every) {
  return s % every == 0 || s == steps;
}

void check_finite(std::span<const double> p, double t) {
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (!std::isfinite(p[n])) {
      throw IntegrationError("run_trajectory: p_" + std::to_string(n) + " is not finite at t = " +
                             std::to_string(t));
    }
  }
}

// Index of a weight >= 1 - eps, if any.
std::optional<std::size_t> near_vertex(std::span<const double> p, double eps) {
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (p[n] >= 1.0 - eps) return n;
  }
  return std::nullopt;
}

bool is_vertex(std::span<const double> p) {
  std::size_t ones = 0;
  for (double x : p) {
    if (x == 1.0) {
      ++ones;
    } else if (x != 0.0) {
      return false;
    }
  }
  return ones == 1;
}

// dp_n/dt = (2/hbar) sum_m sqrt(p_n p_m) Im W_nm
void smooth_rhs(std::span<const double> p, const ComplexMatrix& W, double hbar, std::vector<double>& out) {
  const std::size_t m_count = p.size();
  out.assign(m_count, 0.0);
  for (std::size_t n = 0; n < m_count; ++n) {
    for (std::size_t m = n + 1; m < m_count; ++m) {
      const double flow = 2.0 / hbar * std::sqrt(std::max(p[n], 0.0) * std::max(p[m], 0.0)) *
                          W(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)).imag();
      out[n] += flow;
      out[m] -= flow;
    }
  }
}

// db_n/dt = sum_m Im(W_nm) b_m / hbar on signed amplitudes.
void rotation_rhs(std::span<const double> b, const ComplexMatrix& W, double hbar, std::vector<double>& out) {
  const std::size_t m_count = b.size();
  out.assign(m_count, 0.0);
  for (std::size_t n = 0; n < m_count; ++n) {
    for (std::size_t m = 0; m < m_count; ++m) {
      if (m != n) out[n] += W(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)).imag() * b[m] / hbar;
    }
  }
}

// Heun on the signed amplitudes; renormalized to remove the O(dt^3) norm drift.
void heun_rotation(std::vector<double>& b, const ComplexMatrix& W0, const ComplexMatrix& W1, double hbar,
                   double dt, std::vector<double>& k1, std::vector<double>& k2, std::vector<double>& tmp) {
  rotation_rhs(b, W0, hbar, k1);
  tmp.resize(b.size());
  for (std::size_t n = 0; n < b.size(); ++n) tmp[n] = b[n] + dt * k1[n];
  rotation_rhs(tmp, W1, hbar, k2);
  double norm = 0.0;
  for (std::size_t n = 0; n < b.size(); ++n) {
    b[n] += 0.5 * dt * (k1[n] + k2[n]);
    norm += b[n] * b[n];
  }
  norm = std::sqrt(norm);
  for (double& x : b) x /= norm;
}

void require_white(const SdeConfig& cfg) {
  if (cfg.noise.kind != NoiseKind::White) throw UsageError("SdeConfig: Ito schemes need white noise");
}

}  // namespace

void SdeConfig::validate() const {
  noise.validate();
  if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError("SdeConfig: dt must be positive");
  if (!(t_max >= dt)) throw UsageError("SdeConfig: dt must not exceed t_max");
  const double s_max = noise.sigma.maxCoeff();
  if (dt * s_max * s_max / (noise.hbar * noise.hbar) > 0.01 + 1e-15) {
    throw UsageError("SdeConfig: dt * max(sigma^2) / hbar^2 must be <= 0.01");
  }
  if (!(collapse_epsilon > 0.0 && collapse_epsilon <= 0.1)) {
    throw UsageError("SdeConfig: collapse_epsilon must lie in (0, 0.1]");
  }
  if (sample_every == 0) throw UsageError("SdeConfig: sample_every must be >= 1");
  if (scheme == Scheme::StratonovichHeun) {
    if (noise.kind != NoiseKind::OrnsteinUhlenbeck) {
      throw UsageError("SdeConfig: the Stratonovich scheme needs OU noise");
    }
    if (dt > 1.0 / (20.0 * noise.lambda) * (1.0 + 1e-12)) {
      throw UsageError("SdeConfig: Stratonovich scheme needs dt <= 1 / (20 lambda)");
    }
  } else {
    require_white(*this);
  }
}

std::size_t SdeConfig::step_count() const { return rounded_steps(t_max, dt); }

std::vector<double> SdeConfig::sample_times() const {
  return sample_grid(step_count(), sample_every, dt);
}

std::vector<double> apply_ito_increment(std::span<const double> p, const ComplexMatrix& dW, double hbar) {
  if (static_cast<std::size_t>(dW.rows()) != p.size() || dW.rows() != dW.cols()) {
    throw StructuralError("apply_ito_increment: increment size does not match p");
  }
  std::vector<double> out(p.begin(), p.end());
  for (std::size_t n = 0; n < p.size(); ++n) {
    for (std::size_t m = n + 1; m < p.size(); ++m) {
      const double flow = 2.0 / hbar * std::sqrt(p[n] * p[m]) *
                          dW(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)).imag();
      out[n] += flow;
      out[m] -= flow;
    }
  }
  return out;
}

bool clamp_renormalize(std::vector<double>& p) {
  bool clamped = false;
  double sum = 0.0;
  for (double& x : p) {
    if (x < 0.0) {
      x = 0.0;
      clamped = true;
    }
    sum += x;
  }
  if (!(sum > 0.0)) throw IntegrationError("clamp_renormalize: all weights vanished");
  for (double& x : p) x = std::min(x / sum, 1.0);
  return clamped;
}

SuperpositionState step_ito_p(const SuperpositionState& p, const NoiseIncrement& dW, double hbar) {
  std::vector<double> next = apply_ito_increment(p.p(), dW.dW, hbar);
  clamp_renormalize(next);
  return SuperpositionState(std::move(next));
}

std::vector<double> step_ito_b(std::span<const double> b, const NoiseIncrement& dW, const NoiseSpec& spec) {
  const std::size_t m_count = b.size();
  if (static_cast<std::size_t>(dW.dW.rows()) != m_count || spec.size() != m_count) {
    throw StructuralError("step_ito_b: size mismatch between b, dW and sigma");
  }
  const double hbar = spec.hbar;
  std::vector<double> out(b.begin(), b.end());
  for (std::size_t n = 0; n < m_count; ++n) {
    if (b[n] < 0.0) throw UsageError("step_ito_b: amplitudes must be nonnegative");
    const double denom = std::max(b[n], kAmplitudeFloor);
    for (std::size_t m = 0; m < m_count; ++m) {
      if (m == n) continue;
      const auto ni = static_cast<Eigen::Index>(n);
      const auto mi = static_cast<Eigen::Index>(m);
      const double s2 = spec.sigma(ni, mi) * spec.sigma(ni, mi);
      out[n] += dW.dW(ni, mi).imag() * b[m] / hbar;
      out[n] -= s2 / (4.0 * hbar * hbar) * (b[m] * b[m] / denom) * dW.dt;
    }
  }
  return out;
}

SuperpositionState step_stratonovich_p(const SuperpositionState& p, const OuState& w_start,
                                       const OuState& w_end, const NoiseSpec& spec, double dt) {
  if (!(dt > 0.0)) throw UsageError("step_stratonovich_p: dt must be positive");
  if (spec.kind == NoiseKind::OrnsteinUhlenbeck && dt > 1.0 / (20.0 * spec.lambda) * (1.0 + 1e-12)) {
    throw UsageError("step_stratonovich_p: dt must be <= 1 / (20 lambda)");
  }
  std::vector<double> k1;
  std::vector<double> k2;
  smooth_rhs(p.p(), w_start.W, spec.hbar, k1);
  std::vector<double> predictor(p.p().begin(), p.p().end());
  for (std::size_t n = 0; n < predictor.size(); ++n) predictor[n] += dt * k1[n];
  clamp_renormalize(predictor);
  smooth_rhs(predictor, w_end.W, spec.hbar, k2);
  std::vector<double> out(p.p().begin(), p.p().end());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] += 0.5 * dt * (k1[n] + k2[n]);
  clamp_renormalize(out);
  return SuperpositionState(std::move(out));
}

SuperpositionState step_stratonovich_p(const SuperpositionState& p, const OuState& w,
                                       const NoiseSpec& spec, double dt) {
  return step_stratonovich_p(p, w, w, spec, dt);
}

TrajectoryResult run_trajectory(const SdeConfig& cfg, const SuperpositionState& p0, RngStream& rng) {
  cfg.validate();
  const std::size_t m_count = p0.size();
  if (cfg.noise.size() != m_count) throw StructuralError("run_trajectory: sigma size differs from p0");

  const std::size_t steps = cfg.step_count();
  const double dt = cfg.dt;
  const double hbar = cfg.noise.hbar;
  TrajectoryResult out;
  out.times = cfg.sample_times();
  out.path.reserve(out.times.size());

  std::vector<double> p(p0.p().begin(), p0.p().end());
  // The Stratonovich arm carries signed amplitudes: with smooth noise b_n
  // passes through zero, which the sqrt(p) form cannot represent.
  std::vector<double> b;
  std::vector<double> k1, k2, tmp;
  OuState w_now, w_next;
  if (cfg.scheme == Scheme::StratonovichHeun) {
    b.resize(m_count);
    for (std::size_t n = 0; n < m_count; ++n) b[n] = std::sqrt(p[n]);
    w_now = ou_init(cfg.noise, rng);
  } else if (cfg.scheme == Scheme::AmplitudeIto) {
    b.resize(m_count);
    for (std::size_t n = 0; n < m_count; ++n) b[n] = std::sqrt(p[n]);
  }
  NoiseIncrement inc;

  std::size_t streak = 0;
  std::optional<std::size_t> streak_index;
  double streak_start = 0.0;
  bool held = false;  // collapse confirmed and integration stopped

  auto observe = [&](std::size_t s) {
    if (out.outcome) return;
    const auto v = near_vertex(p, cfg.collapse_epsilon);
    if (v && v == streak_index) {
      ++streak;
    } else if (v) {
      streak_index = v;
      streak = 1;
      streak_start = static_cast<double>(s) * dt;
    } else {
      streak_index.reset();
      streak = 0;
    }
    if (streak >= kCollapseConfirmSteps) {
      out.outcome = streak_index;
      out.collapse_time = streak_start;
      if (!cfg.continue_after_collapse) {
        p.assign(m_count, 0.0);
        p[*streak_index] = 1.0;
        held = true;
      }
    }
  };

  out.path.push_back(p);
  observe(0);
  for (std::size_t s = 1; s <= steps; ++s) {
    const bool frozen = held || (cfg.scheme != Scheme::StratonovichHeun && is_vertex(p));
    if (!frozen) {
      switch (cfg.scheme) {
        case Scheme::ItoEulerMaruyama: {
          white_increment(cfg.noise, dt, rng, inc);
          std::vector<double> next = apply_ito_increment(p, inc.dW, hbar);
          if (clamp_renormalize(next)) ++out.clamp_events;
          p.swap(next);
          break;
        }
        case Scheme::AmplitudeIto: {
          white_increment(cfg.noise, dt, rng, inc);
          b = step_ito_b(b, inc, cfg.noise);
          bool clamped = false;
          double norm = 0.0;
          for (double& x : b) {
            if (x < 0.0) {
              x = 0.0;
              clamped = true;
            }
            norm += x * x;
          }
          if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw IntegrationError("run_trajectory: amplitude norm degenerate at t = " +
                                   std::to_string(static_cast<double>(s) * dt));
          }
          norm = std::sqrt(norm);
          for (std::size_t n = 0; n < m_count; ++n) {
            b[n] /= norm;
            p[n] = b[n] * b[n];
          }
          if (clamped) ++out.clamp_events;
          break;
        }
        case Scheme::StratonovichHeun: {
          w_next = ou_step(cfg.noise, w_now, dt, rng);
          heun_rotation(b, w_now.W, w_next.W, hbar, dt, k1, k2, tmp);
          std::swap(w_now, w_next);
          for (std::size_t n = 0; n < m_count; ++n) p[n] = b[n] * b[n];
          break;
        }
      }
      ++out.steps;
    }
    check_finite(p, static_cast<double>(s) * dt);
    observe(s);
    if (is_sample_step(s, steps, cfg.sample_every)) out.path.push_back(p);
  }
  return out;
}

void InertialConfig::validate() const {
  if (!(tau_r > 0.0) || !(lambda > 0.0) || !(hbar > 0.0) || !(sigma >= 0.0)) {
    throw UsageError("InertialConfig: tau_r, lambda, hbar must be positive and sigma nonnegative");
  }
  if (!(dt > 0.0) || !(t_max >= dt)) throw UsageError("InertialConfig: need 0 < dt <= t_max");
  const double limit = std::min(tau_r, 1.0 / lambda) / 20.0;
  if (dt > limit * (1.0 + 1e-12)) {
    throw UsageError("InertialConfig: dt = " + std::to_string(dt) + " exceeds min(tau_r, 1/lambda)/20 = " +
                     std::to_string(limit));
  }
  if (ensemble_size < 2 || ensemble_size % 2 != 0) {
    throw UsageError("InertialConfig: ensemble_size must be even and >= 2");
  }
  if (sample_every == 0) throw UsageError("InertialConfig: sample_every must be >= 1");
  if (has_window() && (window_start < 0.0 || window_end > t_max * (1.0 + 1e-12))) {
    throw UsageError("InertialConfig: drift window must lie inside [0, t_max]");
  }
}

std::size_t InertialConfig::step_count() const { return rounded_steps(t_max, dt); }

namespace {

// One realization of the inertial equation; writes b(t) - b(0) at sample steps.
void integrate_inertial(const InertialConfig& cfg, RngStream rng, double sign, std::vector<Complex>& delta) {
  const std::size_t steps = cfg.step_count();
  const double dt = cfg.dt;
  const double tau = cfg.tau_r;
  const double inv_hbar = 1.0 / cfg.hbar;
  const Complex i(0.0, 1.0);
  ScalarOu noise(cfg.sigma, cfg.lambda);
  noise.init(rng, sign);

  Complex b = cfg.b0;
  Complex u = cfg.bdot0_policy == BdotPolicy::SchrodingerConsistent ? -i * noise.value() * b * inv_hbar
                                                                      : Complex(0.0);
  auto accel = [&](Complex bb, Complex uu, double w) { return (i * uu - w * bb * inv_hbar) / tau; };

  delta.clear();
  delta.push_back(0.0);
  for (std::size_t s = 1; s <= steps; ++s) {
    const double w0 = noise.value();
    noise.step(dt / 2.0, rng, sign);
    const double wh = noise.value();
    noise.step(dt / 2.0, rng, sign);
    const double w1 = noise.value();

    const Complex kb1 = u;
    const Complex ku1 = accel(b, u, w0);
    const Complex kb2 = u + 0.5 * dt * ku1;
    const Complex ku2 = accel(b + 0.5 * dt * kb1, kb2, wh);
    const Complex kb3 = u + 0.5 * dt * ku2;
    const Complex ku3 = accel(b + 0.5 * dt * kb2, kb3, wh);
    const Complex kb4 = u + dt * ku3;
    const Complex ku4 = accel(b + dt * kb3, kb4, w1);
    b += dt / 6.0 * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4);
    u += dt / 6.0 * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4);
    if (!std::isfinite(b.real()) || !std::isfinite(b.imag())) {
      throw IntegrationError("run_inertial: non-finite amplitude at t = " +
                             std::to_string(static_cast<double>(s) * dt));
    }
    if (is_sample_step(s, steps, cfg.sample_every)) delta.push_back(b - cfg.b0);
  }
}

std::size_t sample_index(const std::vector<double>& times, double t) {
  const auto it = std::min_element(times.begin(), times.end(), [t](double a, double b) {
    return std::abs(a - t) < std::abs(b - t);
  });
  const double tol = 1e-9 * std::max(1.0, std::abs(t));
  if (std::abs(*it - t) > tol) {
    throw UsageError("run_inertial: window bound " + std::to_string(t) + " is not a sample time");
  }
  return static_cast<std::size_t>(it - times.begin());
}

}  // namespace

InertialResult run_inertial(const InertialConfig& cfg, std::uint64_t seed, unsigned threads) {
  cfg.validate();
  const std::size_t pairs = cfg.ensemble_size / 2;
  const std::size_t steps = cfg.step_count();
  InertialResult out;
  out.times = sample_grid(steps, cfg.sample_every, cfg.dt);
  const std::size_t n_t = out.times.size();
  const bool window = cfg.has_window();
  const std::size_t w0 = window ? sample_index(out.times, cfg.window_start) : 0;
  const std::size_t w1 = window ? sample_index(out.times, cfg.window_end) : 0;

  // Fixed chunking keeps the floating-point summation order independent of threads.
  const std::size_t chunks = std::min<std::size_t>(pairs, 64);
  struct Partial {
    std::vector<Complex> sum;
    std::vector<double> sq_re, sq_im;
    Complex win_sum = 0.0;
    double win_sq_re = 0.0, win_sq_im = 0.0;
  };
  std::vector<Partial> partial(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    Partial& acc = partial[c];
    acc.sum.assign(n_t, 0.0);
    acc.sq_re.assign(n_t, 0.0);
    acc.sq_im.assign(n_t, 0.0);
    std::vector<Complex> plus, minus;
    for (std::size_t j = c * pairs / chunks; j < (c + 1) * pairs / chunks; ++j) {
      const RngStream rng = seed_stream(seed, j);
      integrate_inertial(cfg, rng, 1.0, plus);
      integrate_inertial(cfg, rng, -1.0, minus);
      for (std::size_t k = 0; k < n_t; ++k) {
        const Complex a = 0.5 * (plus[k] + minus[k]);
        acc.sum[k] += a;
        acc.sq_re[k] += a.real() * a.real();
        acc.sq_im[k] += a.imag() * a.imag();
      }
      if (window) {
        const Complex d = 0.5 * (plus[w1] + minus[w1] - plus[w0] - minus[w0]);
        acc.win_sum += d;
        acc.win_sq_re += d.real() * d.real();
        acc.win_sq_im += d.imag() * d.imag();
      }
    }
  });

  std::vector<Complex> sum(n_t, 0.0);
  std::vector<double> sq_re(n_t, 0.0), sq_im(n_t, 0.0);
  Complex win_sum = 0.0;
  double win_sq_re = 0.0, win_sq_im = 0.0;
  for (const Partial& acc : partial) {
    win_sum += acc.win_sum;
    win_sq_re += acc.win_sq_re;
    win_sq_im += acc.win_sq_im;
    for (std::size_t k = 0; k < n_t; ++k) {
      sum[k] += acc.sum[k];
      sq_re[k] += acc.sq_re[k];
      sq_im[k] += acc.sq_im[k];
    }
  }
  const auto n = static_cast<double>(pairs);
  out.mean_delta_b.resize(n_t);
  out.se_re.resize(n_t);
  out.se_im.resize(n_t);
  for (std::size_t k = 0; k < n_t; ++k) {
    const Complex mean = sum[k] / n;
    out.mean_delta_b[k] = mean;
    const double var_re = pairs > 1 ? (sq_re[k] - n * mean.real() * mean.real()) / (n - 1.0) : 0.0;
    const double var_im = pairs > 1 ? (sq_im[k] - n * mean.imag() * mean.imag()) / (n - 1.0) : 0.0;
    out.se_re[k] = std::sqrt(std::max(var_re, 0.0) / n);
    out.se_im[k] = std::sqrt(std::max(var_im, 0.0) / n);
  }
  if (window) {
    const double span = out.times[w1] - out.times[w0];
    const Complex mean = win_sum / n;
    const double var_re = pairs > 1 ? (win_sq_re - n * mean.real() * mean.real()) / (n - 1.0) : 0.0;
    const double var_im = pairs > 1 ? (win_sq_im - n * mean.imag() * mean.imag()) / (n - 1.0) : 0.0;
    out.window_drift = mean / span;
    out.window_se_re = std::sqrt(std::max(var_re, 0.0) / n) / span;
    out.window_se_im = std::sqrt(std::max(var_im, 0.0) / n) / span;
  }
  return out;
}

Complex analytic_drift(double t, double lambda, double tau_r, double sigma, Complex b0, double hbar) {
  const Complex i(0.0, 1.0);
  const double lt = lambda * tau_r;
  const Complex A = 1.0 - std::exp(-lambda * t) * (1.0 - i * lt * (std::exp(i * t / tau_r) - 1.0));
  return -(sigma * sigma * b0 / (2.0 * hbar * hbar)) * A / (1.0 + i * lt);
}

Complex analytic_drift_integral(double t1, double t2, double lambda, double tau_r, double sigma,
                                Complex b0, double hbar) {
  const Complex i(0.0, 1.0);
  const double lt = lambda * tau_r;
  const Complex a(-lambda, 1.0 / tau_r);
  const Complex integral_A = (t2 - t1) -
                             (1.0 + i * lt) * (std::exp(-lambda * t1) - std::exp(-lambda * t2)) / lambda +
                             i * lt * (std::exp(a * t2) - std::exp(a * t1)) / a;
  return -(sigma * sigma * b0 / (2.0 * hbar * hbar)) * integral_A / (1.0 + i * lt);
}

}  // namespace collapse
