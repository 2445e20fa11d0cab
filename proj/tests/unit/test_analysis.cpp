#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "collapse/analysis.hpp"
#include "collapse/errors.hpp"

using namespace collapse;

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return x;
}

EnsembleStats constant_ensemble(std::vector<double> p, std::size_t n) {
  const std::vector<double> times = {0.0, 0.5, 1.0};
  EnsembleOptions o;
  o.n_trajectories = n;
  o.batches = 1;
  return run_ensemble(times, p.size(), o, [&](std::size_t, RngStream&) {
    TrajectoryResult r;
    r.times = times;
    r.path.assign(times.size(), p);
    r.outcome = 0;
    return r;
  });
}

}  // namespace

TEST(DecayFit, RecoversExactExponential) {
  const auto t = linspace(0.0, 5.0, 51);
  std::vector<double> c, se(t.size(), 0.0);
  for (double x : t) c.push_back(0.25 * std::exp(-2.0 * x));
  const RateFit f = decay_fit(t, c, se);
  EXPECT_NEAR(f.rate / 2.0, 1.0, 1e-6);
  EXPECT_EQ(f.t_start, 0.1);
  EXPECT_EQ(f.points, 50u);
}

TEST(DecayFit, WindowStopsAtNoiseFloor) {
  const auto t = linspace(0.0, 5.0, 51);
  std::vector<double> c, se(t.size(), 0.01);
  for (double x : t) c.push_back(0.25 * std::exp(-2.0 * x));
  // 0.25 e^{-2t} falls below 10 se = 0.1 after t = 0.458.
  const RateFit f = decay_fit(t, c, se);
  EXPECT_EQ(f.points, 4u);
  EXPECT_NEAR(f.t_end, 0.4, 1e-15);
  EXPECT_NEAR(f.rate, 2.0, 1e-9);
  EXPECT_FALSE(f.jackknife);
  EXPECT_LE(f.ci_low, f.rate);
  EXPECT_GE(f.ci_high, f.rate);
}

TEST(DecayFit, TooFewPoints) {
  const auto t = linspace(0.0, 5.0, 51);
  std::vector<double> c, se(t.size(), 0.02);
  for (double x : t) c.push_back(0.25 * std::exp(-2.0 * x));
  EXPECT_THROW(decay_fit(t, c, se), InsufficientDataError);
  const std::vector<double> short_t = {0.0, 1.0};
  EXPECT_THROW(decay_fit(short_t, short_t, short_t), InsufficientDataError);
}

TEST(DecayFit, JackknifeOnEnsemble) {
  SdeConfig cfg;
  cfg.noise = NoiseSpec::uniform(2, 1.0);
  cfg.dt = 1e-3;
  cfg.t_max = 3.0;
  cfg.sample_every = 50;
  cfg.continue_after_collapse = true;
  EnsembleOptions o;
  o.n_trajectories = 4000;
  o.seed = 3;
  o.threads = 4;
  const auto stats = run_sde_ensemble(cfg, SuperpositionState({0.5, 0.5}), o);
  const RateFit f = decay_fit(stats, 0, 1);
  EXPECT_TRUE(f.jackknife);
  EXPECT_GT(f.se, 0.0);
  EXPECT_LT(std::abs(f.rate - 2.0), 5.0 * f.se);
}

TEST(BornTest, PerfectCollapseOntoCertainOutcome) {
  const std::vector<std::size_t> counts = {1000, 0};
  const BornResult r = born_test(counts, SuperpositionState({1.0, 0.0}));
  EXPECT_EQ(r.chi_square, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.dof, 0u);
}

TEST(BornTest, FrozenStatistics) {
  const std::vector<std::size_t> two = {2900, 7100};
  const BornResult a = born_test(two, SuperpositionState({0.3, 0.7}));
  EXPECT_NEAR(a.chi_square, 4.761904761904762, 1e-12);
  EXPECT_NEAR(a.p_value, 0.02909633174125221, 1e-10);
  const std::vector<std::size_t> three = {1950, 3050, 5000};
  const BornResult b = born_test(three, SuperpositionState({0.2, 0.3, 0.5}));
  EXPECT_NEAR(b.chi_square, 2.0833333333333335, 1e-12);
  EXPECT_NEAR(b.p_value, 0.3528660814588489, 1e-10);
  EXPECT_EQ(b.dof, 2u);
}

TEST(BornTest, RejectsWrongProbabilities) {
  const std::vector<std::size_t> counts = {5000, 5000};
  EXPECT_LT(born_test(counts, SuperpositionState({0.3, 0.7})).p_value, 1e-6);
  const std::vector<std::size_t> impossible = {999, 1};
  const BornResult r = born_test(impossible, SuperpositionState({1.0, 0.0}));
  EXPECT_TRUE(std::isinf(r.chi_square));
  EXPECT_EQ(r.p_value, 0.0);
}

TEST(BornTest, PermutationInvariant) {
  const std::vector<std::size_t> counts = {210, 290, 500};
  const std::vector<std::size_t> permuted = {500, 210, 290};
  const BornResult a = born_test(counts, SuperpositionState({0.2, 0.3, 0.5}));
  const BornResult b = born_test(permuted, SuperpositionState({0.5, 0.2, 0.3}));
  EXPECT_NEAR(a.chi_square, b.chi_square, 1e-12);
  EXPECT_NEAR(a.p_value, b.p_value, 1e-12);
}

TEST(BornTest, NeedsEnoughOutcomes) {
  const std::vector<std::size_t> counts = {90, 109};
  EXPECT_THROW(born_test(counts, SuperpositionState({0.5, 0.5})), InsufficientDataError);
  const std::vector<std::size_t> wrong = {100, 100, 100};
  EXPECT_THROW(born_test(wrong, SuperpositionState({0.5, 0.5})), StructuralError);
}

TEST(Martingale, CollapsedTrajectoryHasNoDeviation) {
  const auto stats = constant_ensemble({1.0, 0.0}, 1);
  const MartingaleResult r = martingale_check(stats, SuperpositionState({1.0, 0.0}));
  EXPECT_EQ(r.max_z, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(Martingale, DeterministicShiftIsHighlySignificant) {
  // The standard error of a constant is zero up to rounding in the sum of squares.
  const auto stats = constant_ensemble({0.6, 0.4}, 10);
  const MartingaleResult r = martingale_check(stats, SuperpositionState({0.5, 0.5}));
  EXPECT_GT(r.max_z, 1e6);
  EXPECT_FALSE(r.pass);
}

TEST(CollapseTime, DirectFormula) {
  RealMatrix sigma(2, 2);
  sigma << 0.0, 1.0, 1.0, 0.0;
  const RealMatrix t = collapse_time_estimate(sigma, 1.0);
  EXPECT_EQ(t(0, 1), 1.0);
  EXPECT_TRUE(std::isnan(t(0, 0)));
  sigma(0, 1) = sigma(1, 0) = 0.0;
  EXPECT_TRUE(std::isnan(collapse_time_estimate(sigma, 1.0)(0, 1)));
}

TEST(CollapseTime, OrderFormAndScaling) {
  EXPECT_NEAR(collapse_time_order_form(1e-12, 1.0, 1.0546e-34) / 1.0546e-46, 1.0, 1e-12);
  EXPECT_NEAR(collapse_time_from_coupling(2.0, 0.7, 1.3) / collapse_time_from_coupling(1.0, 0.7, 1.3), 2.0, 1e-15);
  EXPECT_NEAR(collapse_time_from_coupling(1.0, 1.0, 1.0), 1.0 / std::numbers::pi, 1e-16);
}

TEST(Causality, ThresholdIdentity) {
  const RegimeReport r = causality_report(2.0, 0.5, 1.0, 1.0);
  EXPECT_NEAR(r.ratio, 1.0, 1e-15);
  EXPECT_FALSE(r.ito_valid);
}

TEST(Causality, MicroAndMacroScales) {
  const RegimeReport marginal = causality_report(1e-13, 1e-12, kSpeedOfLight, kHbarSI);
  EXPECT_NEAR(marginal.ratio, 3.163028727119417, 1e-9);
  EXPECT_FALSE(marginal.ito_valid);
  const RegimeReport macro = causality_report(1e-3, 1.0, kSpeedOfLight, kHbarSI);
  EXPECT_NEAR(macro.ratio / 3.163028727119417e22, 1.0, 1e-12);
  EXPECT_TRUE(macro.ito_valid);
  EXPECT_TRUE(macro.relativistic_valid);
}

TEST(Causality, Monotonicity) {
  RngStream rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double dx = std::exp(10.0 * rng.uniform() - 5.0);
    const double de = std::exp(10.0 * rng.uniform() - 5.0);
    const double v = std::exp(10.0 * rng.uniform() - 5.0);
    const bool base = causality_report(dx, de, v, 1.0).ito_valid;
    if (base) {
      ASSERT_TRUE(causality_report(2.0 * dx, de, v, 1.0).ito_valid);
      ASSERT_TRUE(causality_report(dx, 2.0 * de, v, 1.0).ito_valid);
      ASSERT_TRUE(causality_report(dx, de, 0.5 * v, 1.0).ito_valid);
    } else {
      ASSERT_FALSE(causality_report(0.5 * dx, de, v, 1.0).ito_valid);
      ASSERT_FALSE(causality_report(dx, 0.5 * de, v, 1.0).ito_valid);
      ASSERT_FALSE(causality_report(dx, de, 2.0 * v, 1.0).ito_valid);
    }
  }
}

TEST(CoherentState, UnitCase) {
  const CoherentProduct c = coherent_state_product(1.0, 1.0, 1.0, 1.0);
  EXPECT_NEAR(c.product, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(c.half_hbar_v0, std::sqrt(2.0) / 2.0, 1e-15);
}

TEST(CoherentState, ScalingAndSIValue) {
  EXPECT_NEAR(coherent_state_product(1.0, 1.0, 4.0, 1.0).product / coherent_state_product(1.0, 1.0, 1.0, 1.0).product,
              2.0, 1e-14);
  const CoherentProduct si = coherent_state_product(1e-3, 1.0, 1e-3, kHbarSI);
  EXPECT_NEAR(si.product / 7.456948830489189e-35, 1.0, 1e-12);
}

TEST(CoherentState, IdentityHoldsAcrossInputs) {
  RngStream rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double mass = std::exp(6.0 * rng.uniform() - 3.0);
    const double omega = std::exp(6.0 * rng.uniform() - 3.0);
    const double energy = omega * (1.0 + 100.0 * rng.uniform());
    const CoherentProduct c = coherent_state_product(mass, omega, energy, 1.0);
    ASSERT_NEAR(c.product / c.half_hbar_v0, 1.0, 1e-12);
    ASSERT_NEAR(c.product / c.closed_form, 1.0, 1e-12);
  }
}

TEST(CoherentState, RejectsSubQuantumEnergy) {
  EXPECT_THROW(coherent_state_product(1.0, 2.0, 1.0, 1.0), UsageError);
  EXPECT_THROW(coherent_state_product(-1.0, 1.0, 1.0, 1.0), UsageError);
}
