#include "collapse/hilbert.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "collapse/errors.hpp"

namespace collapse {

std::size_t MacroConfig::total_dim() const {
  return std::accumulate(micro_counts.begin(), micro_counts.end(), std::size_t{0});
}

std::vector<std::size_t> MacroConfig::offsets() const {
  std::vector<std::size_t> out(micro_counts.size() + 1, 0);
  for (std::size_t n = 0; n < micro_counts.size(); ++n) out[n + 1] = out[n] + micro_counts[n];
  return out;
}

void MacroConfig::validate() const {
  if (micro_counts.empty()) throw UsageError("MacroConfig: at least one macrostate required");
  if (bin_energies.size() != micro_counts.size()) {
    throw UsageError("MacroConfig: bin_energies must have one entry per macrostate");
  }
  for (std::size_t n = 0; n < micro_counts.size(); ++n) {
    if (micro_counts[n] < 1) {
      throw UsageError("MacroConfig: micro_counts[" + std::to_string(n) + "] must be >= 1");
    }
    if (!std::isfinite(bin_energies[n])) throw UsageError("MacroConfig: non-finite bin energy");
  }
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) {
    throw UsageError("MacroConfig: bin_width must be positive");
  }
  if (!(hbar > 0.0)) throw UsageError("MacroConfig: hbar must be positive");
  for (std::size_t n = 0; n < bin_energies.size(); ++n) {
    for (std::size_t m = n + 1; m < bin_energies.size(); ++m) {
      if (std::abs(bin_energies[n] - bin_energies[m]) <= 2.0 * bin_width) {
        throw UsageError("MacroConfig: bins " + std::to_string(n) + " and " + std::to_string(m) +
                         " overlap (centres must differ by more than 2*bin_width)");
      }
    }
  }
}

SuperpositionState::SuperpositionState(std::vector<double> p) : p_(std::move(p)) {
  if (p_.empty()) throw UsageError("SuperpositionState: empty weight vector");
  double sum = 0.0;
  for (double x : p_) {
    if (!(x >= 0.0 && x <= 1.0)) throw UsageError("SuperpositionState: weight outside [0, 1]");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw UsageError("SuperpositionState: weights sum to " + std::to_string(sum));
  }
}

double MicroState::norm_squared() const {
  double s = 0.0;
  for (const Complex& z : b) s += std::norm(z);
  return s;
}

void MicroAmplitudes::validate() const {
  for (std::size_t n = 0; n < eta.size(); ++n) {
    double s = 0.0;
    for (const Complex& z : eta[n]) s += std::norm(z);
    if (eta[n].empty() || std::abs(s - 1.0) > kSumTolerance) {
      throw UsageError("MicroAmplitudes: block " + std::to_string(n) + " is not normalized");
    }
  }
}

SuperpositionState project_macro(const MicroState& micro, const MacroConfig& cfg) {
  const auto offsets = cfg.offsets();
  if (micro.offsets != offsets || micro.b.size() != offsets.back()) {
    throw StructuralError("project_macro: micro state block layout does not match MacroConfig");
  }
  std::vector<double> p(cfg.macro_count(), 0.0);
  for (std::size_t n = 0; n < p.size(); ++n) {
    for (const Complex& z : micro.block(n)) p[n] += std::norm(z);
  }
  // Clip rounding excursions just past the simplex boundary.
  for (double& x : p) x = std::min(1.0, std::max(0.0, x));
  return SuperpositionState(std::move(p));
}

MicroAmplitudes sample_micro_amplitudes(const MacroConfig& cfg, RngStream& rng) {
  MicroAmplitudes out;
  out.eta.resize(cfg.macro_count());
  for (std::size_t n = 0; n < cfg.macro_count(); ++n) {
    auto& block = out.eta[n];
    block.resize(cfg.micro_counts[n]);
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (Complex& z : block) {
        z = rng.complex_normal();
        norm2 += std::norm(z);
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (Complex& z : block) z *= inv;
  }
  return out;
}

MicroState assemble_micro(const SuperpositionState& p, const MicroAmplitudes& eta) {
  if (p.size() != eta.macro_count()) {
    throw StructuralError("assemble_micro: p and eta have different numbers of macrostates");
  }
  MicroState out;
  out.offsets.assign(p.size() + 1, 0);
  for (std::size_t n = 0; n < p.size(); ++n) out.offsets[n + 1] = out.offsets[n] + eta.eta[n].size();
  out.b.reserve(out.offsets.back());
  for (std::size_t n = 0; n < p.size(); ++n) {
    const double amp = std::sqrt(p[n]);
    for (const Complex& z : eta.eta[n]) out.b.push_back(amp * z);
  }
  return out;
}

}  // namespace collapse
