#include "collapse/noise.hpp"

#include <cmath>
#include <string>

#include "collapse/errors.hpp"

namespace collapse {

void NoiseSpec::validate() const {
  if (sigma.rows() != sigma.cols() || sigma.rows() < 1) {
    throw StructuralError("NoiseSpec: sigma must be a non-empty square matrix");
  }
  for (Eigen::Index n = 0; n < sigma.rows(); ++n) {
    if (sigma(n, n) != 0.0) throw UsageError("NoiseSpec: sigma must have zero diagonal");
    for (Eigen::Index m = 0; m < sigma.cols(); ++m) {
      if (!(sigma(n, m) >= 0.0) || !std::isfinite(sigma(n, m))) {
        throw UsageError("NoiseSpec: sigma entries must be finite and nonnegative");
      }
      if (sigma(n, m) != sigma(m, n)) throw UsageError("NoiseSpec: sigma must be symmetric");
    }
  }
  if (kind == NoiseKind::OrnsteinUhlenbeck && !(lambda > 0.0)) {
    throw UsageError("NoiseSpec: OU noise requires lambda > 0");
  }
  if (!(hbar > 0.0)) throw UsageError("NoiseSpec: hbar must be positive");
}

NoiseSpec NoiseSpec::uniform(std::size_t m, double sigma, NoiseKind kind, double lambda, double hbar) {
  NoiseSpec spec;
  spec.sigma = RealMatrix::Constant(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m), sigma);
  spec.sigma.diagonal().setZero();
  spec.kind = kind;
  spec.lambda = lambda;
  spec.hbar = hbar;
  return spec;
}

namespace {

void require_kind(const NoiseSpec& spec, NoiseKind kind, const char* op) {
  if (spec.kind != kind) {
    throw UsageError(std::string(op) + ": noise kind mismatch");
  }
}

// Fills the strict upper triangle with scale_nm * (x + i y), x, y ~ N(0, 1/2)
// scaled by `component_sd`, mirrors it, and zeroes the diagonal.
void fill_hermitian(const RealMatrix& sigma, double component_sd, RngStream& rng, ComplexMatrix& out) {
  const Eigen::Index m = sigma.rows();
  out.resize(m, m);
  for (Eigen::Index n = 0; n < m; ++n) {
    out(n, n) = 0.0;
    for (Eigen::Index k = n + 1; k < m; ++k) {
      const double s = sigma(n, k) * component_sd;
      if (s == 0.0) {
        out(n, k) = 0.0;
      } else {
        const double x = rng.normal();
        const double y = rng.normal();
        out(n, k) = std::complex<double>(s * x, s * y);
      }
      out(k, n) = std::conj(out(n, k));
    }
  }
}

}  // namespace

NoiseIncrement white_increment(const NoiseSpec& spec, double dt, RngStream& rng) {
  NoiseIncrement out;
  white_increment(spec, dt, rng, out);
  return out;
}

void white_increment(const NoiseSpec& spec, double dt, RngStream& rng, NoiseIncrement& out) {
  require_kind(spec, NoiseKind::White, "white_increment");
  if (!(dt > 0.0)) throw UsageError("white_increment: dt must be positive");
  fill_hermitian(spec.sigma, std::sqrt(dt / 2.0), rng, out.dW);
  out.dt = dt;
}

OuState ou_init(const NoiseSpec& spec, RngStream& rng) {
  require_kind(spec, NoiseKind::OrnsteinUhlenbeck, "ou_init");
  OuState out;
  // E|W|^2 = sigma^2 lambda / 2, split evenly over the real and imaginary parts.
  fill_hermitian(spec.sigma, std::sqrt(spec.lambda / 4.0), rng, out.W);
  return out;
}

OuState ou_step(const NoiseSpec& spec, const OuState& state, double dt, RngStream& rng) {
  OuState out = state;
  ou_step_inplace(spec, out, dt, rng);
  return out;
}

void ou_step_inplace(const NoiseSpec& spec, OuState& state, double dt, RngStream& rng) {
  require_kind(spec, NoiseKind::OrnsteinUhlenbeck, "ou_step");
  if (!(dt >= 0.0)) throw UsageError("ou_step: dt must be nonnegative");
  if (dt == 0.0) return;
  const double decay = std::exp(-spec.lambda * dt);
  const double kick = std::sqrt(-std::expm1(-2.0 * spec.lambda * dt));
  const double component_sd = kick * std::sqrt(spec.lambda / 4.0);
  const Eigen::Index m = spec.sigma.rows();
  for (Eigen::Index n = 0; n < m; ++n) {
    state.W(n, n) = 0.0;
    for (Eigen::Index k = n + 1; k < m; ++k) {
      const double s = spec.sigma(n, k) * component_sd;
      std::complex<double> w = decay * state.W(n, k);
      if (s != 0.0) {
        const double x = rng.normal();
        const double y = rng.normal();
        w += std::complex<double>(s * x, s * y);
      }
      state.W(n, k) = w;
      state.W(k, n) = std::conj(w);
    }
  }
}

ScalarOu::ScalarOu(double sigma, double lambda) : sigma_(sigma), lambda_(lambda) {
  if (!(sigma >= 0.0)) throw UsageError("ScalarOu: sigma must be nonnegative");
  if (!(lambda > 0.0)) throw UsageError("ScalarOu: lambda must be positive");
}

void ScalarOu::init(RngStream& rng, double sign) {
  value_ = sign * std::sqrt(stationary_variance()) * rng.normal();
}

void ScalarOu::step(double dt, RngStream& rng, double sign) {
  if (dt == 0.0) return;
  const double decay = std::exp(-lambda_ * dt);
  const double kick = std::sqrt(-std::expm1(-2.0 * lambda_ * dt) * stationary_variance());
  value_ = decay * value_ + sign * kick * rng.normal();
}

std::vector<std::complex<double>> estimate_autocorrelation(
    std::span<const std::complex<double>> trace, std::size_t max_lag) {
  const std::size_t n = trace.size();
  if (n < 2 || n < 5 * std::max<std::size_t>(max_lag, 1)) {
    throw UsageError("estimate_autocorrelation: trace of length " + std::to_string(n) +
                     " is too short for max_lag " + std::to_string(max_lag));
  }
  std::vector<std::complex<double>> out(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) acc += trace[t] * std::conj(trace[t + k]);
    out[k] = acc / static_cast<double>(n - k);
  }
  return out;
}

}  // namespace collapse
