#include "collapse/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "collapse/errors.hpp"
#include "collapse/parallel.hpp"

namespace collapse {

namespace {

struct BatchAccumulator {
  std::vector<std::vector<double>> sum_p, sq_p;          // [t][n]
  std::vector<std::vector<double>> sum_cross, sq_cross;  // [t][pair]
  std::vector<std::size_t> outcome_counts;
  std::size_t uncollapsed = 0;
  std::vector<double> collapse_times;
  std::size_t clamp_events = 0;
  std::size_t steps = 0;
  std::vector<TrajectoryResult> dumped;
};

std::vector<std::vector<double>> zeros(std::size_t rows, std::size_t cols) {
  return std::vector<std::vector<double>>(rows, std::vector<double>(cols, 0.0));
}

double standard_error(double sum, double sq, double n) {
  if (n < 2.0) return 0.0;
  const double mean = sum / n;
  const double var = (sq - n * mean * mean) / (n - 1.0);
  return std::sqrt(std::max(var, 0.0) / n);
}

}  // namespace

std::size_t EnsembleStats::pair_index(std::size_t k, std::size_t m) const {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].first == k && pairs[i].second == m) return i;
  }
  throw UsageError("EnsembleStats: no pair (" + std::to_string(k) + ", " + std::to_string(m) + ")");
}

EnsembleStats run_ensemble(const std::vector<double>& times, std::size_t macro_count,
                           const EnsembleOptions& options, const TrajectoryFn& trajectory) {
  if (options.n_trajectories == 0) throw UsageError("run_ensemble: n_trajectories must be >= 1");
  if (options.batches == 0) throw UsageError("run_ensemble: batches must be >= 1");
  if (times.empty()) throw UsageError("run_ensemble: empty time grid");
  const std::size_t n = options.n_trajectories;
  const std::size_t batches = std::min(options.batches, n);
  const std::size_t n_t = times.size();

  EnsembleStats out;
  out.times = times;
  out.macro_count = macro_count;
  out.n_trajectories = n;
  for (std::size_t k = 0; k < macro_count; ++k) {
    for (std::size_t m = k + 1; m < macro_count; ++m) out.pairs.emplace_back(k, m);
  }
  const std::size_t n_pairs = out.pairs.size();

  std::vector<BatchAccumulator> acc(batches);
  std::vector<std::size_t> begin(batches + 1);
  for (std::size_t b = 0; b <= batches; ++b) begin[b] = b * n / batches;

  parallel_for(batches, options.threads, [&](std::size_t b) {
    BatchAccumulator& a = acc[b];
    a.sum_p = zeros(n_t, macro_count);
    a.sq_p = zeros(n_t, macro_count);
    a.sum_cross = zeros(n_t, n_pairs);
    a.sq_cross = zeros(n_t, n_pairs);
    a.outcome_counts.assign(macro_count, 0);
    for (std::size_t i = begin[b]; i < begin[b + 1]; ++i) {
      RngStream rng = seed_stream(options.seed, i);
      TrajectoryResult r = trajectory(i, rng);
      if (r.path.size() != n_t) {
        throw StructuralError("run_ensemble: trajectory " + std::to_string(i) + " has " +
                              std::to_string(r.path.size()) + " samples, expected " + std::to_string(n_t));
      }
      for (std::size_t t = 0; t < n_t; ++t) {
        const std::vector<double>& p = r.path[t];
        if (p.size() != macro_count) throw StructuralError("run_ensemble: macrostate count mismatch");
        for (std::size_t k = 0; k < macro_count; ++k) {
          a.sum_p[t][k] += p[k];
          a.sq_p[t][k] += p[k] * p[k];
        }
        for (std::size_t j = 0; j < n_pairs; ++j) {
          const double c = p[out.pairs[j].first] * p[out.pairs[j].second];
          a.sum_cross[t][j] += c;
          a.sq_cross[t][j] += c * c;
        }
      }
      if (r.outcome) {
        ++a.outcome_counts[*r.outcome];
        a.collapse_times.push_back(r.collapse_time);
      } else {
        ++a.uncollapsed;
      }
      a.clamp_events += r.clamp_events;
      a.steps += r.steps;
      if (i < options.dump_trajectories) a.dumped.push_back(std::move(r));
    }
  });

  auto sum_p = zeros(n_t, macro_count);
  auto sq_p = zeros(n_t, macro_count);
  auto sum_cross = zeros(n_t, n_pairs);
  auto sq_cross = zeros(n_t, n_pairs);
  out.outcome_counts.assign(macro_count, 0);
  for (std::size_t b = 0; b < batches; ++b) {
    BatchAccumulator& a = acc[b];
    for (std::size_t t = 0; t < n_t; ++t) {
      for (std::size_t k = 0; k < macro_count; ++k) {
        sum_p[t][k] += a.sum_p[t][k];
        sq_p[t][k] += a.sq_p[t][k];
      }
      for (std::size_t j = 0; j < n_pairs; ++j) {
        sum_cross[t][j] += a.sum_cross[t][j];
        sq_cross[t][j] += a.sq_cross[t][j];
      }
    }
    for (std::size_t k = 0; k < macro_count; ++k) out.outcome_counts[k] += a.outcome_counts[k];
    out.uncollapsed += a.uncollapsed;
    out.collapse_times.insert(out.collapse_times.end(), a.collapse_times.begin(), a.collapse_times.end());
    out.clamp_events += a.clamp_events;
    out.steps += a.steps;
    for (auto& r : a.dumped) out.dumped.push_back(std::move(r));
    out.batch_sizes.push_back(begin[b + 1] - begin[b]);
    out.batch_cross_sum.push_back(std::move(a.sum_cross));
  }

  const auto dn = static_cast<double>(n);
  out.mean_p = zeros(n_t, macro_count);
  out.se_p = zeros(n_t, macro_count);
  out.cross = zeros(n_t, n_pairs);
  out.se_cross = zeros(n_t, n_pairs);
  for (std::size_t t = 0; t < n_t; ++t) {
    for (std::size_t k = 0; k < macro_count; ++k) {
      out.mean_p[t][k] = std::clamp(sum_p[t][k] / dn, 0.0, 1.0);
      out.se_p[t][k] = standard_error(sum_p[t][k], sq_p[t][k], dn);
    }
    for (std::size_t j = 0; j < n_pairs; ++j) {
      out.cross[t][j] = sum_cross[t][j] / dn;
      out.se_cross[t][j] = standard_error(sum_cross[t][j], sq_cross[t][j], dn);
    }
  }
  return out;
}

EnsembleStats run_sde_ensemble(const SdeConfig& cfg, const SuperpositionState& p0,
                               const EnsembleOptions& options) {
  cfg.validate();
  if (cfg.noise.size() != p0.size()) throw StructuralError("run_sde_ensemble: sigma size differs from p0");
  return run_ensemble(cfg.sample_times(), p0.size(), options,
                      [&](std::size_t, RngStream& rng) { return run_trajectory(cfg, p0, rng); });
}

}  // namespace collapse
