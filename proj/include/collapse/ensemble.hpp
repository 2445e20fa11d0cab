#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "collapse/rng.hpp"
#include "collapse/sde.hpp"

namespace collapse {

/// Trajectory-ensemble moments on a common time grid.
///
/// Trajectories are split into `batches` contiguous index ranges. Each batch
/// is reduced sequentially and batches are merged in index order, so the
/// floating-point result does not depend on the thread count. Per-batch sums
/// of the cross moments are kept for jackknife error estimates.
struct EnsembleStats {
  std::vector<double> times;
  std::size_t macro_count = 0;
  std::size_t n_trajectories = 0;

  std::vector<std::vector<double>> mean_p;  // [t][n]
  std::vector<std::vector<double>> se_p;    // [t][n]

  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // k < m, lexicographic
  std::vector<std::vector<double>> cross;                  // [t][pair]
  std::vector<std::vector<double>> se_cross;               // [t][pair]

  std::vector<std::size_t> batch_sizes;
  std::vector<std::vector<std::vector<double>>> batch_cross_sum;  // [batch][t][pair]

  std::vector<std::size_t> outcome_counts;
  std::size_t uncollapsed = 0;
  std::vector<double> collapse_times;  // collapsed trajectories, in index order
  std::size_t clamp_events = 0;
  std::size_t steps = 0;

  std::vector<TrajectoryResult> dumped;  // first few trajectories, if requested

  std::size_t pair_index(std::size_t k, std::size_t m) const;
};

struct EnsembleOptions {
  std::size_t n_trajectories = 0;
  std::size_t batches = 20;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  std::size_t dump_trajectories = 0;
};

/// Produces trajectory `index` from its own stream; every result must share
/// the time grid passed to run_ensemble.
using TrajectoryFn = std::function<TrajectoryResult(std::size_t index, RngStream& rng)>;

/// Runs trajectories 0..n-1, trajectory i drawing from seed_stream(seed, i).
EnsembleStats run_ensemble(const std::vector<double>& times, std::size_t macro_count,
                           const EnsembleOptions& options, const TrajectoryFn& trajectory);

/// Convenience wrapper for the effective SDE.
EnsembleStats run_sde_ensemble(const SdeConfig& cfg, const SuperpositionState& p0,
                               const EnsembleOptions& options);

}  // namespace collapse
