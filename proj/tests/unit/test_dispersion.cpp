#include <gtest/gtest.h>

#include <cmath>

#include "collapse/dispersion.hpp"
#include "collapse/errors.hpp"

using namespace collapse;

TEST(Spectrum, ZeroMomentum) {
  const Spectrum s = spectrum(ModeConfig{0.25, 0.0, std::nullopt});
  EXPECT_EQ(s.omega_plus, 0.0);
  EXPECT_EQ(s.omega_minus, -4.0);
}

TEST(Spectrum, UnitPhysicalMode) {
  const ModeConfig cfg = ModeConfig::from_physical(1.0, 1.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(cfg.tau0, 0.5);
  EXPECT_DOUBLE_EQ(cfg.omega_k, 0.5);
  const Spectrum s = spectrum(cfg);
  EXPECT_NEAR(s.omega_plus, -1.0 + std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s.omega_minus, -1.0 - std::sqrt(2.0), 1e-12);
}

TEST(Spectrum, SmallMomentumExpansion) {
  // w+ = W - tau0 W^2 + 2 tau0^2 W^3 + O((W tau0)^3 W)
  const double tau0 = 1.0;
  for (double w : {1e-2, 1e-3, 1e-4}) {
    const double expansion = w - tau0 * w * w + 2.0 * tau0 * tau0 * w * w * w;
    EXPECT_NEAR(spectrum(ModeConfig{tau0, w, std::nullopt}).omega_plus / expansion, 1.0, 10.0 * std::pow(w * tau0, 3));
  }
}

TEST(Spectrum, ResidualVanishesOnGrid) {
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const ModeConfig cfg{std::pow(10.0, -4.0 + 8.0 * i / 9.0), std::pow(10.0, -4.0 + 8.0 * j / 9.0), std::nullopt};
      const Spectrum s = spectrum(cfg);
      worst = std::max({worst, characteristic_residual(cfg, s.omega_plus), characteristic_residual(cfg, s.omega_minus)});
    }
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Spectrum, PhysicalFormsAgree) {
  for (double k : {0.0, 0.1, 1.0, 10.0, 1e3}) {
    const ModeConfig cfg = ModeConfig::from_physical(2.0, k, 3.0, 0.7);
    const Spectrum s = spectrum(cfg);
    const double mc2 = 2.0 * 9.0;
    const double relativistic = -mc2 + std::sqrt(mc2 * mc2 + 0.49 * k * k * 9.0);
    EXPECT_NEAR(0.7 * s.omega_plus, relativistic, 1e-12 * std::max(1.0, std::abs(relativistic)));
  }
}

TEST(Spectrum, NonrelativisticLimit) {
  const double omega = 1.0;
  for (double tau0 : {1e-3, 1e-5, 1e-7}) {
    const Spectrum s = spectrum(ModeConfig{tau0, omega, std::nullopt});
    EXPECT_NEAR(s.omega_plus, omega, 2.0 * tau0);
    EXPECT_NEAR(s.omega_minus * tau0, -1.0, 2.0 * tau0);
  }
}

TEST(Spectrum, WrongFrequencyHasLargeResidual) {
  const ModeConfig cfg{0.5, 0.5, std::nullopt};
  EXPECT_GT(characteristic_residual(cfg, 0.5), 0.1);
}

TEST(ModeConfig, Validation) {
  EXPECT_THROW((ModeConfig{0.0, 1.0, std::nullopt}).validate(), UsageError);
  EXPECT_THROW((ModeConfig{1.0, -1.0, std::nullopt}).validate(), UsageError);
  EXPECT_THROW(ModeConfig::from_physical(0.0, 1.0, 1.0, 1.0), UsageError);
}

TEST(FitFrequencies, TwoTones) {
  const double h = 0.01;
  std::vector<Complex> x(4000);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double t = h * static_cast<double>(n);
    x[n] = 0.8 * std::polar(1.0, -1.3 * t) + Complex(0.1, 0.2) * std::polar(1.0, 7.1 * t);
  }
  const FrequencyFit f = fit_frequencies(x, h, 2);
  ASSERT_EQ(f.omegas.size(), 2u);
  EXPECT_NEAR(f.omegas[0], 1.3, 1e-9);
  EXPECT_NEAR(f.omegas[1], -7.1, 1e-9);
  EXPECT_LT(f.relative_residual, 1e-9);
}

TEST(FitFrequencies, RejectsDegenerateInput) {
  const std::vector<Complex> zeros(100);
  EXPECT_THROW(fit_frequencies(zeros, 0.1, 2), UsageError);
  const std::vector<Complex> tiny(8, Complex(1.0));
  EXPECT_THROW(fit_frequencies(tiny, 0.1, 2), UsageError);
}

TEST(TimeDomain, GenericInitialConditionShowsBothRoots) {
  const ModeConfig cfg{0.5, 0.5, std::nullopt};
  const TimeDomainCheck c = time_domain_check(cfg, 40.0, 0.01);
  EXPECT_LT(c.rel_err_plus, 1e-4);
  EXPECT_LT(c.rel_err_minus, 1e-4);
  EXPECT_NEAR(c.omega_plus, -1.0 + std::sqrt(2.0), 1e-4);
  EXPECT_NEAR(c.omega_minus, -1.0 - std::sqrt(2.0), 1e-4);
}

TEST(TimeDomain, EigenmodeHasSingleFrequency) {
  const ModeConfig cfg{0.5, 0.5, std::nullopt};
  const Spectrum s = spectrum(cfg);
  const TimeDomainCheck c = time_domain_check(cfg, 40.0, 0.01, 1.0, Complex(0.0, -s.omega_plus));
  EXPECT_LT(c.rel_err_plus, 1e-6);
  EXPECT_EQ(c.fit.omegas.size(), 1u);
  EXPECT_TRUE(std::isnan(c.omega_minus));
}

TEST(TimeDomain, AcrossMassScales) {
  for (double tau0 : {1.0, 0.1, 0.01}) {
    const ModeConfig cfg{tau0, 1.0, std::nullopt};
    const Spectrum s = spectrum(cfg);
    const double gap = s.omega_plus - s.omega_minus;
    const TimeDomainCheck c = time_domain_check(cfg, 40.0 / gap + 20.0 / std::max(s.omega_plus, gap / 20.0), tau0 / 50.0,
                                                1.0, Complex(0.0, -(s.omega_plus + s.omega_minus) / 2.0));
    EXPECT_LT(c.rel_err_plus, 1e-4) << "tau0 = " << tau0;
    EXPECT_LT(c.rel_err_minus, 1e-4) << "tau0 = " << tau0;
  }
}

TEST(TimeDomain, ResolutionPreconditions) {
  const ModeConfig cfg{0.5, 0.5, std::nullopt};
  EXPECT_THROW(time_domain_check(cfg, 40.0, 0.02), UsageError);
  EXPECT_THROW(time_domain_check(cfg, 5.0, 0.01), UsageError);
}
