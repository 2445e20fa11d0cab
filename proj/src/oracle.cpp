#include "collapse/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "collapse/errors.hpp"

namespace collapse {

namespace {

using Vec = Eigen::VectorXcd;

void check_layout(const MicroHamiltonian& h, const MicroState& psi, const MacroConfig& cfg) {
  const auto offsets = cfg.offsets();
  if (h.macro_count() != cfg.macro_count() || psi.offsets != offsets ||
      psi.b.size() != offsets.back()) {
    throw StructuralError("oracle: state, Hamiltonian and MacroConfig block layouts differ");
  }
  for (std::size_t n = 0; n < h.macro_count(); ++n) {
    if (static_cast<std::size_t>(h.h0[n].size()) != cfg.micro_counts[n]) {
      throw StructuralError("oracle: H0 block size does not match MacroConfig");
    }
  }
}

void check_grid(std::span<const double> t_grid) {
  if (t_grid.empty() || t_grid.front() != 0.0) {
    throw UsageError("oracle: time grid must start at 0");
  }
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) throw UsageError("oracle: time grid must be increasing");
  }
}

Vec to_vec(const std::vector<Complex>& b) {
  return Eigen::Map<const Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
}

SuperpositionState weights(const Vec& b, const std::vector<std::size_t>& offsets) {
  std::vector<double> p(offsets.size() - 1, 0.0);
  double total = 0.0;
  for (std::size_t n = 0; n + 1 < offsets.size(); ++n) {
    p[n] = b.segment(static_cast<Eigen::Index>(offsets[n]),
                     static_cast<Eigen::Index>(offsets[n + 1] - offsets[n]))
               .squaredNorm();
    total += p[n];
  }
  // The state is normalized to 1e-7; renormalizing the projection keeps the
  // recorded weights on the simplex.
  for (double& x : p) x /= total;
  return SuperpositionState(std::move(p));
}

// z = V y using only the off-diagonal blocks.
void apply_coupling(const MicroHamiltonian& h, const std::vector<std::size_t>& offsets, const Vec& y,
                    Vec& z) {
  z.setZero();
  for (const CouplingBlock& c : h.couplings) {
    const auto on = static_cast<Eigen::Index>(offsets[c.n]);
    const auto om = static_cast<Eigen::Index>(offsets[c.m]);
    const auto nn = c.v.rows();
    const auto nm = c.v.cols();
    z.segment(on, nn).noalias() += c.v * y.segment(om, nm);
    z.segment(om, nm).noalias() += c.v.adjoint() * y.segment(on, nn);
  }
}

ComplexMatrix state_W(const MicroHamiltonian& h, const Vec& b_schrodinger,
                      const std::vector<std::size_t>& offsets) {
  const auto m_count = static_cast<Eigen::Index>(h.macro_count());
  ComplexMatrix W = ComplexMatrix::Zero(m_count, m_count);
  std::vector<double> p(h.macro_count());
  for (std::size_t n = 0; n < h.macro_count(); ++n) {
    p[n] = b_schrodinger
               .segment(static_cast<Eigen::Index>(offsets[n]),
                        static_cast<Eigen::Index>(offsets[n + 1] - offsets[n]))
               .squaredNorm();
  }
  for (const CouplingBlock& c : h.couplings) {
    if (p[c.n] <= 0.0 || p[c.m] <= 0.0) continue;
    const auto bn = b_schrodinger.segment(static_cast<Eigen::Index>(offsets[c.n]), c.v.rows());
    const auto bm = b_schrodinger.segment(static_cast<Eigen::Index>(offsets[c.m]), c.v.cols());
    const Complex w = bn.dot(c.v * bm) / std::sqrt(p[c.n] * p[c.m]);
    W(static_cast<Eigen::Index>(c.n), static_cast<Eigen::Index>(c.m)) = w;
    W(static_cast<Eigen::Index>(c.m), static_cast<Eigen::Index>(c.n)) = std::conj(w);
  }
  return W;
}

Vec phases(const Eigen::VectorXd& energies, double t, double hbar) {
  Vec out(energies.size());
  for (Eigen::Index i = 0; i < energies.size(); ++i) out(i) = std::polar(1.0, -energies(i) * t / hbar);
  return out;
}

}  // namespace

const CouplingBlock& MicroHamiltonian::coupling(std::size_t n, std::size_t m) const {
  for (const CouplingBlock& c : couplings) {
    if (c.n == n && c.m == m) return c;
  }
  throw StructuralError("MicroHamiltonian: no coupling block (" + std::to_string(n) + ", " +
                        std::to_string(m) + ")");
}

Eigen::VectorXd MicroHamiltonian::energies() const {
  Eigen::Index total = 0;
  for (const auto& e : h0) total += e.size();
  Eigen::VectorXd out(total);
  Eigen::Index pos = 0;
  for (const auto& e : h0) {
    out.segment(pos, e.size()) = e;
    pos += e.size();
  }
  return out;
}

double MicroHamiltonian::spectral_span() const {
  const Eigen::VectorXd e = energies();
  return e.size() == 0 ? 0.0 : e.maxCoeff() - e.minCoeff();
}

ComplexMatrix MicroHamiltonian::dense() const {
  const Eigen::VectorXd e = energies();
  ComplexMatrix H = ComplexMatrix::Zero(e.size(), e.size());
  H.diagonal() = e.cast<Complex>();
  std::vector<Eigen::Index> offsets(h0.size() + 1, 0);
  for (std::size_t n = 0; n < h0.size(); ++n) offsets[n + 1] = offsets[n] + h0[n].size();
  for (const CouplingBlock& c : couplings) {
    H.block(offsets[c.n], offsets[c.m], c.v.rows(), c.v.cols()) = c.v;
    H.block(offsets[c.m], offsets[c.n], c.v.cols(), c.v.rows()) = c.v.adjoint();
  }
  return H;
}

MicroHamiltonian build_hamiltonian(const MacroConfig& cfg, double v_bar, RngStream& rng) {
  cfg.validate();
  if (!(v_bar >= 0.0)) throw UsageError("build_hamiltonian: v_bar must be nonnegative");
  MicroHamiltonian h;
  h.coupling_scale = v_bar;
  h.h0.resize(cfg.macro_count());
  for (std::size_t n = 0; n < cfg.macro_count(); ++n) {
    auto& e = h.h0[n];
    e.resize(static_cast<Eigen::Index>(cfg.micro_counts[n]));
    const double lo = cfg.bin_energies[n] - cfg.bin_width;
    for (Eigen::Index k = 0; k < e.size(); ++k) e(k) = lo + 2.0 * cfg.bin_width * rng.uniform();
  }
  for (std::size_t n = 0; n < cfg.macro_count(); ++n) {
    for (std::size_t m = n + 1; m < cfg.macro_count(); ++m) {
      CouplingBlock c{n, m, ComplexMatrix(static_cast<Eigen::Index>(cfg.micro_counts[n]),
                                          static_cast<Eigen::Index>(cfg.micro_counts[m]))};
      for (Eigen::Index j = 0; j < c.v.cols(); ++j) {
        for (Eigen::Index i = 0; i < c.v.rows(); ++i) c.v(i, j) = v_bar * rng.complex_normal();
      }
      h.couplings.push_back(std::move(c));
    }
  }
  return h;
}

double sigma2_from_coupling(double v_bar, double bin_width, double hbar) {
  return std::numbers::pi * hbar * v_bar * v_bar / bin_width;
}

double max_oracle_step(const MicroHamiltonian& h, const MacroConfig& cfg) {
  double limit = std::numeric_limits<double>::infinity();
  const double span = h.spectral_span();
  if (span > 0.0) limit = cfg.hbar / (10.0 * span);
  const double s2 = sigma2_from_coupling(h.coupling_scale, cfg.bin_width, cfg.hbar);
  if (s2 > 0.0) limit = std::min(limit, (cfg.hbar * cfg.hbar / s2) / 1000.0);
  return limit;
}

OracleTrajectory evolve_exact(const MicroHamiltonian& h, const MicroState& psi0,
                              std::span<const double> t_grid, const MacroConfig& cfg,
                              const EvolveOptions& options) {
  cfg.validate();
  check_layout(h, psi0, cfg);
  check_grid(t_grid);
  const double max_step = max_oracle_step(h, cfg);
  if (options.dt < 0.0 || options.dt > max_step) {
    throw UsageError("evolve_exact: step " + std::to_string(options.dt) +
                     " exceeds the stability limit " + std::to_string(max_step));
  }
  const double dt_target = options.dt > 0.0 ? options.dt : max_step;
  const double hbar = cfg.hbar;
  const auto offsets = cfg.offsets();
  const Eigen::VectorXd energies = h.energies();
  const Eigen::Index dim = energies.size();

  OracleTrajectory out;
  out.times.assign(t_grid.begin(), t_grid.end());

  Vec b = to_vec(psi0.b);  // interaction picture; equals the Schrodinger state at t = 0
  const double norm0 = b.squaredNorm();
  if (std::abs(norm0 - 1.0) > kSumTolerance) throw UsageError("evolve_exact: psi0 is not normalized");

  Vec k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim), y(dim), z(dim);
  const Complex minus_i_over_hbar(0.0, -1.0 / hbar);

  // rhs = -(i/hbar) conj(ph) . V (ph . b), ph = e^{-iEt/hbar}
  auto rhs = [&](const Vec& ph, const Vec& state, Vec& result) {
    y = ph.cwiseProduct(state);
    apply_coupling(h, offsets, y, z);
    result = minus_i_over_hbar * ph.conjugate().cwiseProduct(z);
  };

  auto record = [&](double t) {
    out.p_of_t.push_back(weights(b, offsets));
    if (options.record_W) out.W_of_t.push_back(state_W(h, phases(energies, t, hbar).cwiseProduct(b), offsets));
  };

  record(0.0);
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    const double t0 = t_grid[i - 1];
    const double span = t_grid[i] - t0;
    const auto substeps = static_cast<std::size_t>(std::ceil(span / dt_target - 1e-9));
    const double step = span / static_cast<double>(std::max<std::size_t>(substeps, 1));
    const Vec half = phases(energies, step / 2.0, hbar);
    Vec ph = phases(energies, t0, hbar);
    for (std::size_t s = 0; s < substeps; ++s) {
      const Vec ph_mid = ph.cwiseProduct(half);
      const Vec ph_end = ph_mid.cwiseProduct(half);
      rhs(ph, b, k1);
      tmp = b + (step / 2.0) * k1;
      rhs(ph_mid, tmp, k2);
      tmp = b + (step / 2.0) * k2;
      rhs(ph_mid, tmp, k3);
      tmp = b + step * k3;
      rhs(ph_end, tmp, k4);
      b += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      ph = ph_end;
      ++out.steps;
    }
    const double norm = b.squaredNorm();
    if (!std::isfinite(norm)) {
      throw IntegrationError("evolve_exact: non-finite state at t = " + std::to_string(t_grid[i]));
    }
    const double drift = std::abs(norm - 1.0);
    out.max_norm_drift = std::max(out.max_norm_drift, drift);
    if (drift > 1e-4) {
      throw IntegrationError("evolve_exact: norm drift " + std::to_string(drift) + " at t = " +
                             std::to_string(t_grid[i]));
    }
    if (drift > 1e-7) {
      b /= std::sqrt(norm);
      ++out.renormalizations;
    }
    record(t_grid[i]);
  }
  return out;
}

OracleTrajectory evolve_spectral(const MicroHamiltonian& h, const MicroState& psi0,
                                 std::span<const double> t_grid, const MacroConfig& cfg,
                                 bool record_W) {
  cfg.validate();
  check_layout(h, psi0, cfg);
  check_grid(t_grid);
  const auto offsets = cfg.offsets();
  const Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h.dense());
  if (solver.info() != Eigen::Success) throw IntegrationError("evolve_spectral: eigensolver failed");
  const ComplexMatrix& U = solver.eigenvectors();
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  const Vec c = U.adjoint() * to_vec(psi0.b);

  OracleTrajectory out;
  out.times.assign(t_grid.begin(), t_grid.end());
  Vec rotated(c.size());
  Vec b(c.size());
  for (double t : t_grid) {
    for (Eigen::Index i = 0; i < c.size(); ++i) rotated(i) = std::polar(1.0, -lambda(i) * t / cfg.hbar) * c(i);
    b.noalias() = U * rotated;
    out.max_norm_drift = std::max(out.max_norm_drift, std::abs(b.squaredNorm() - 1.0));
    out.p_of_t.push_back(weights(b, offsets));
    if (record_W) out.W_of_t.push_back(state_W(h, b, offsets));
  }
  return out;
}

ComplexMatrix measure_W(const MicroHamiltonian& h, const MicroAmplitudes& eta, double t,
                        const MacroConfig& cfg) {
  if (eta.macro_count() != h.macro_count()) {
    throw StructuralError("measure_W: eta and Hamiltonian differ in macrostate count");
  }
  const auto m_count = static_cast<Eigen::Index>(h.macro_count());
  ComplexMatrix W = ComplexMatrix::Zero(m_count, m_count);
  for (const CouplingBlock& c : h.couplings) {
    if (eta.eta[c.n].size() != static_cast<std::size_t>(c.v.rows()) ||
        eta.eta[c.m].size() != static_cast<std::size_t>(c.v.cols())) {
      throw StructuralError("measure_W: eta block sizes do not match the Hamiltonian");
    }
    const Vec x = phases(h.h0[c.n], t, cfg.hbar).cwiseProduct(to_vec(eta.eta[c.n]));
    const Vec y = phases(h.h0[c.m], t, cfg.hbar).cwiseProduct(to_vec(eta.eta[c.m]));
    const Complex w = x.dot(c.v * y);
    W(static_cast<Eigen::Index>(c.n), static_cast<Eigen::Index>(c.m)) = w;
    W(static_cast<Eigen::Index>(c.m), static_cast<Eigen::Index>(c.n)) = std::conj(w);
  }
  return W;
}

ComplexMatrix measure_W_from_state(const MicroHamiltonian& h, const MicroState& state) {
  return state_W(h, to_vec(state.b), state.offsets);
}

CorrelatorEstimate estimate_correlator(const MicroHamiltonian& h, const MacroConfig& cfg,
                                       std::size_t n, std::size_t m, std::size_t ensemble_size,
                                       RngStream& rng, const CorrelatorOptions& options) {
  cfg.validate();
  if (n >= m || m >= cfg.macro_count()) throw UsageError("estimate_correlator: need n < m < M");
  if (ensemble_size == 0) throw UsageError("estimate_correlator: empty ensemble");
  if (options.lags_per_tau_c == 0 || options.series_factor < 5 || !(options.max_lag_tau_c > 0.0)) {
    throw UsageError("estimate_correlator: invalid options");
  }
  const CouplingBlock& c = h.coupling(n, m);
  const double tau_c = cfg.hbar / cfg.bin_width;
  const double step = tau_c / static_cast<double>(options.lags_per_tau_c);
  const auto max_lag = static_cast<std::size_t>(
      std::lround(options.max_lag_tau_c * static_cast<double>(options.lags_per_tau_c)));
  const std::size_t length = options.series_factor * max_lag;

  CorrelatorEstimate out;
  out.lag_step = step;
  out.correlator.assign(max_lag + 1, Complex(0.0));
  const Vec advance_n = phases(h.h0[n], step, cfg.hbar);
  const Vec advance_m = phases(h.h0[m], step, cfg.hbar);
  std::vector<Complex> series(length);
  Vec z(c.v.rows());
  for (std::size_t draw = 0; draw < ensemble_size; ++draw) {
    const MicroAmplitudes eta = sample_micro_amplitudes(cfg, rng);
    Vec x = to_vec(eta.eta[n]);
    Vec y = to_vec(eta.eta[m]);
    for (std::size_t j = 0; j < length; ++j) {
      z.noalias() = c.v * y;
      series[j] = x.dot(z);
      x = x.cwiseProduct(advance_n);
      y = y.cwiseProduct(advance_m);
    }
    const auto acf = estimate_autocorrelation(series, max_lag);
    for (std::size_t k = 0; k <= max_lag; ++k) out.correlator[k] += acf[k];
  }
  for (Complex& v : out.correlator) v /= static_cast<double>(ensemble_size);

  const double carrier = (cfg.bin_energies[n] - cfg.bin_energies[m]) / cfg.hbar;
  out.envelope.resize(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    out.envelope[k] = out.correlator[k] * std::polar(1.0, carrier * step * static_cast<double>(k));
  }
  // d(-tau) = conj(d(tau)): the full integral is twice the real half-line integral.
  double half_integral = 0.0;
  for (std::size_t k = 0; k <= max_lag; ++k) {
    const double w = (k == 0 || k == max_lag) ? 0.5 : 1.0;
    half_integral += w * out.envelope[k].real();
  }
  out.sigma2 = 2.0 * half_integral * step;

  const double peak = std::abs(out.correlator[0]);
  out.width = static_cast<double>(max_lag) * step;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    const double a = std::abs(out.correlator[k]);
    if (a <= peak / 2.0) {
      const double prev = std::abs(out.correlator[k - 1]);
      const double frac = (prev - peak / 2.0) / (prev - a);
      out.width = (static_cast<double>(k - 1) + frac) * step;
      break;
    }
  }
  return out;
}

RealMatrix estimate_sigma(const MicroHamiltonian& h, const MacroConfig& cfg, std::size_t ensemble_size,
                          RngStream& rng, const CorrelatorOptions& options) {
  if (ensemble_size < 100) throw UsageError("estimate_sigma: ensemble_size must be >= 100");
  const auto m_count = static_cast<Eigen::Index>(cfg.macro_count());
  RealMatrix out = RealMatrix::Zero(m_count, m_count);
  for (std::size_t n = 0; n < cfg.macro_count(); ++n) {
    for (std::size_t m = n + 1; m < cfg.macro_count(); ++m) {
      const double s2 = h.coupling_scale == 0.0
                            ? 0.0
                            : estimate_correlator(h, cfg, n, m, ensemble_size, rng, options).sigma2;
      out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) = s2;
      out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) = s2;
    }
  }
  return out;
}

}  // namespace collapse
