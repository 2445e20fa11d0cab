#include <gtest/gtest.h>

#include <cmath>

#include "collapse/ensemble.hpp"
#include "collapse/errors.hpp"

using namespace collapse;

namespace {

SdeConfig small_config() {
  SdeConfig cfg;
  cfg.noise = NoiseSpec::uniform(3, 1.0);
  cfg.dt = 1e-3;
  cfg.t_max = 1.0;
  cfg.sample_every = 50;
  cfg.continue_after_collapse = true;
  return cfg;
}

EnsembleOptions options(std::size_t n, unsigned threads, std::uint64_t seed = 5) {
  EnsembleOptions o;
  o.n_trajectories = n;
  o.threads = threads;
  o.seed = seed;
  return o;
}

}  // namespace

TEST(Ensemble, ThreadCountDoesNotChangeResults) {
  const SuperpositionState p0({0.2, 0.3, 0.5});
  const auto a = run_sde_ensemble(small_config(), p0, options(500, 1));
  const auto b = run_sde_ensemble(small_config(), p0, options(500, 4));
  EXPECT_EQ(a.mean_p, b.mean_p);
  EXPECT_EQ(a.se_p, b.se_p);
  EXPECT_EQ(a.cross, b.cross);
  EXPECT_EQ(a.batch_cross_sum, b.batch_cross_sum);
  EXPECT_EQ(a.collapse_times, b.collapse_times);
  EXPECT_EQ(a.outcome_counts, b.outcome_counts);
}

TEST(Ensemble, BatchesPartitionTheTrajectories) {
  const SuperpositionState p0({0.2, 0.3, 0.5});
  const auto s = run_sde_ensemble(small_config(), p0, options(333, 2));
  std::size_t total = 0;
  for (std::size_t n : s.batch_sizes) total += n;
  EXPECT_EQ(total, 333u);
  EXPECT_EQ(s.batch_sizes.size(), 20u);
  for (std::size_t t = 0; t < s.times.size(); ++t) {
    for (std::size_t k = 0; k < s.pairs.size(); ++k) {
      double sum = 0.0;
      for (const auto& batch : s.batch_cross_sum) sum += batch[t][k];
      EXPECT_NEAR(sum / 333.0, s.cross[t][k], 1e-14);
    }
  }
  std::size_t outcomes = s.uncollapsed;
  for (std::size_t c : s.outcome_counts) outcomes += c;
  EXPECT_EQ(outcomes, 333u);
}

TEST(Ensemble, PairIndexLayout) {
  const auto s = run_sde_ensemble(small_config(), SuperpositionState({0.2, 0.3, 0.5}), options(20, 1));
  ASSERT_EQ(s.pairs.size(), 3u);
  EXPECT_EQ(s.pair_index(0, 1), 0u);
  EXPECT_EQ(s.pair_index(0, 2), 1u);
  EXPECT_EQ(s.pair_index(1, 2), 2u);
  EXPECT_THROW(s.pair_index(2, 2), UsageError);
}

TEST(Ensemble, InitialMomentsAreExact) {
  const SuperpositionState p0({0.2, 0.3, 0.5});
  const auto s = run_sde_ensemble(small_config(), p0, options(100, 1));
  EXPECT_EQ(s.mean_p[0][0], 0.2);
  EXPECT_NEAR(s.cross[0][s.pair_index(1, 2)], 0.15, 1e-15);
  EXPECT_LT(s.se_p[0][2], 1e-7);
}

TEST(Ensemble, StandardErrorScalesAsInverseRootN) {
  const SuperpositionState p0({0.2, 0.3, 0.5});
  const auto small = run_sde_ensemble(small_config(), p0, options(1000, 4, 7));
  const auto large = run_sde_ensemble(small_config(), p0, options(4000, 4, 8));
  const double ratio = large.se_p.back()[0] / small.se_p.back()[0];
  EXPECT_NEAR(ratio, 0.5, 0.1);
}

TEST(Ensemble, DumpsLeadingTrajectories) {
  EnsembleOptions o = options(30, 2);
  o.dump_trajectories = 3;
  const auto s = run_sde_ensemble(small_config(), SuperpositionState({0.2, 0.3, 0.5}), o);
  ASSERT_EQ(s.dumped.size(), 3u);
  EXPECT_EQ(s.dumped[0].path.size(), s.times.size());
}

TEST(Ensemble, RejectsRaggedTrajectories) {
  const std::vector<double> times = {0.0, 1.0};
  EXPECT_THROW(run_ensemble(times, 2, options(4, 1),
                            [](std::size_t, RngStream&) {
                              TrajectoryResult r;
                              r.times = {0.0};
                              r.path = {{0.5, 0.5}};
                              return r;
                            }),
               StructuralError);
  EXPECT_THROW(run_ensemble(times, 2, options(0, 1), nullptr), UsageError);
}
