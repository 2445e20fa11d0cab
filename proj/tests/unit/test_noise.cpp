#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "collapse/errors.hpp"
#include "collapse/noise.hpp"
#include "ks.hpp"

using namespace collapse;
using testing_support::mean_z;
using Complex = std::complex<double>;

TEST(NoiseSpec, Validation) {
  NoiseSpec spec = NoiseSpec::uniform(2, 1.0);
  EXPECT_NO_THROW(spec.validate());
  spec.sigma(0, 0) = 0.1;
  EXPECT_THROW(spec.validate(), UsageError);
  spec = NoiseSpec::uniform(2, 1.0);
  spec.sigma(0, 1) = 2.0;
  EXPECT_THROW(spec.validate(), UsageError);
  EXPECT_THROW(NoiseSpec::uniform(2, 1.0, NoiseKind::OrnsteinUhlenbeck, 0.0).validate(), UsageError);
}

TEST(WhiteIncrement, ZeroSigmaGivesZero) {
  RngStream rng(1);
  const auto inc = white_increment(NoiseSpec::uniform(2, 0.0), 0.01, rng);
  EXPECT_EQ(inc.dW(0, 1), Complex(0.0));
  EXPECT_EQ(inc.dW(1, 0), Complex(0.0));
}

TEST(WhiteIncrement, HermitianWithZeroDiagonal) {
  RngStream rng(2);
  const auto spec = NoiseSpec::uniform(4, 0.8);
  for (int draw = 0; draw < 100; ++draw) {
    const auto inc = white_increment(spec, 0.01, rng);
    for (int n = 0; n < 4; ++n) {
      EXPECT_EQ(inc.dW(n, n), Complex(0.0));
      for (int m = 0; m < 4; ++m) EXPECT_EQ(inc.dW(n, m), std::conj(inc.dW(m, n)));
    }
  }
}

TEST(WhiteIncrement, SecondMoments) {
  RngStream rng(3);
  const double dt = 0.01;
  const auto spec = NoiseSpec::uniform(2, 1.0);
  std::vector<double> mod2, sq_re, sq_im, re;
  const int n = 1000000;
  mod2.reserve(n);
  sq_re.reserve(n);
  sq_im.reserve(n);
  NoiseIncrement inc;
  for (int i = 0; i < n; ++i) {
    white_increment(spec, dt, rng, inc);
    const Complex w = inc.dW(0, 1);
    mod2.push_back(std::norm(w));
    sq_re.push_back((w * w).real());
    sq_im.push_back((w * w).imag());
    re.push_back(w.real());
  }
  EXPECT_LT(std::abs(mean_z(mod2, dt)), 4.0);
  EXPECT_LT(std::abs(mean_z(sq_re, 0.0)), 4.0);
  EXPECT_LT(std::abs(mean_z(sq_im, 0.0)), 4.0);
  EXPECT_LT(std::abs(mean_z(re, 0.0)), 4.0);
}

TEST(WhiteIncrement, KindMismatch) {
  RngStream rng(4);
  EXPECT_THROW(white_increment(NoiseSpec::uniform(2, 1.0, NoiseKind::OrnsteinUhlenbeck, 10.0), 0.01, rng),
               UsageError);
  EXPECT_THROW(ou_init(NoiseSpec::uniform(2, 1.0), rng), UsageError);
}

TEST(OuProcess, ZeroSigmaIsZero) {
  RngStream rng(5);
  const auto spec = NoiseSpec::uniform(2, 0.0, NoiseKind::OrnsteinUhlenbeck, 10.0);
  EXPECT_EQ(ou_init(spec, rng).W(0, 1), Complex(0.0));
}

TEST(OuProcess, StationaryVariance) {
  RngStream rng(6);
  const auto spec = NoiseSpec::uniform(2, 1.0, NoiseKind::OrnsteinUhlenbeck, 100.0);
  std::vector<double> init, stepped;
  for (int i = 0; i < 100000; ++i) {
    const OuState w = ou_init(spec, rng);
    init.push_back(std::norm(w.W(0, 1)));
    stepped.push_back(std::norm(ou_step(spec, w, 0.003, rng).W(0, 1)));
  }
  EXPECT_LT(std::abs(mean_z(init, 50.0)), 4.0);
  // One exact transition keeps the stationary law.
  double s = 0.0;
  for (double x : stepped) s += x;
  EXPECT_NEAR(s / stepped.size() / 50.0, 1.0, 0.01);
}

TEST(OuProcess, ZeroStepIsIdentity) {
  RngStream rng(7);
  const auto spec = NoiseSpec::uniform(3, 1.0, NoiseKind::OrnsteinUhlenbeck, 5.0);
  const OuState w = ou_init(spec, rng);
  const OuState same = ou_step(spec, w, 0.0, rng);
  EXPECT_EQ(same.W, w.W);
}

TEST(OuProcess, AutocorrelationDecayRate) {
  const double lambda = 10.0, dt = 1e-3;
  const auto spec = NoiseSpec::uniform(2, 1.0, NoiseKind::OrnsteinUhlenbeck, lambda);
  RngStream rng(8);
  std::vector<Complex> trace(1000000);
  OuState w = ou_init(spec, rng);
  for (auto& x : trace) {
    x = w.W(0, 1);
    ou_step_inplace(spec, w, dt, rng);
  }
  const std::size_t lag_one = static_cast<std::size_t>(std::lround(1.0 / (lambda * dt)));
  const auto c = estimate_autocorrelation(trace, lag_one);

  // Least-squares slope of log Re c over lags up to 1 / lambda.
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t k = 0; k <= lag_one; ++k) {
    const double t = k * dt, y = std::log(c[k].real());
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double n = lag_one + 1.0;
  const double fitted = -(n * sty - st * sy) / (n * stt - st * st);
  EXPECT_NEAR(fitted / lambda, 1.0, 0.05);
  EXPECT_NEAR(c[lag_one].real() / (lambda / 2.0 * std::exp(-1.0)), 1.0, 0.05);
}

TEST(OuProcess, IntegratedWindowVarianceApproachesWhite) {
  // Var of the integral over T tends to sigma^2 T for lambda T >> 1.
  const double lambda = 100.0, total = 1.0, dt = 1e-3;
  const auto spec = NoiseSpec::uniform(2, 1.0, NoiseKind::OrnsteinUhlenbeck, lambda);
  RngStream rng(9);
  const int windows = 20000;
  const int steps = static_cast<int>(total / dt);
  std::vector<double> mod2;
  for (int i = 0; i < windows; ++i) {
    OuState w = ou_init(spec, rng);
    Complex integral = 0.0, prev = w.W(0, 1);
    for (int s = 0; s < steps; ++s) {
      ou_step_inplace(spec, w, dt, rng);
      integral += 0.5 * dt * (prev + w.W(0, 1));
      prev = w.W(0, 1);
    }
    mod2.push_back(std::norm(integral));
  }
  double s = 0.0;
  for (double x : mod2) s += x;
  EXPECT_NEAR(s / windows / total, 1.0, 0.05);
}

TEST(ScalarOuProcess, StationaryVariance) {
  ScalarOu ou(1.5, 4.0);
  RngStream rng(10);
  std::vector<double> sq;
  ou.init(rng);
  for (int i = 0; i < 200000; ++i) {
    ou.step(0.5, rng);
    sq.push_back(ou.value() * ou.value());
  }
  EXPECT_LT(std::abs(mean_z(sq, ou.stationary_variance())), 4.0);
}

TEST(ScalarOuProcess, MirroredDrawsCancel) {
  ScalarOu a(1.0, 2.0), b(1.0, 2.0);
  RngStream ra(11), rb(11);
  a.init(ra, 1.0);
  b.init(rb, -1.0);
  for (int i = 0; i < 100; ++i) {
    a.step(0.01, ra, 1.0);
    b.step(0.01, rb, -1.0);
    ASSERT_EQ(a.value(), -b.value());
  }
}

TEST(Autocorrelation, ConstantTrace) {
  const std::vector<Complex> trace(50, Complex(1.0, 2.0));
  const auto c = estimate_autocorrelation(trace, 10);
  for (const auto& x : c) EXPECT_NEAR(std::abs(x - Complex(5.0, 0.0)), 0.0, 1e-14);
}

TEST(Autocorrelation, WhiteTraceHasNoMemory) {
  RngStream rng(12);
  const auto spec = NoiseSpec::uniform(2, 1.0);
  const double dt = 0.01;
  std::vector<Complex> trace(200000);
  for (auto& x : trace) x = white_increment(spec, dt, rng).dW(0, 1) / std::sqrt(dt);
  const auto c = estimate_autocorrelation(trace, 5);
  const double se = 1.0 / std::sqrt(static_cast<double>(trace.size()));
  EXPECT_NEAR(c[0].real(), 1.0, 4.0 * std::sqrt(2.0) * se);
  for (std::size_t k = 1; k < c.size(); ++k) EXPECT_LT(std::abs(c[k]), 4.0 * se);
}

TEST(Autocorrelation, TooShort) {
  const std::vector<Complex> trace(49);
  EXPECT_THROW(estimate_autocorrelation(trace, 10), UsageError);
}
