#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "collapse/hilbert.hpp"
#include "collapse/noise.hpp"
#include "collapse/rng.hpp"

namespace collapse {

/// Off-diagonal coupling between macrostates n < m; rows index block n and
/// columns index block m. The (m, n) block is the adjoint.
struct CouplingBlock {
  std::size_t n = 0;
  std::size_t m = 0;
  ComplexMatrix v;
};

/// H = H0 + V in the H0 eigenbasis |n, k>: H0 diagonal per block, V purely
/// off-diagonal between blocks.
struct MicroHamiltonian {
  std::vector<Eigen::VectorXd> h0;
  std::vector<CouplingBlock> couplings;  // every pair n < m, lexicographic
  double coupling_scale = 0.0;

  std::size_t macro_count() const { return h0.size(); }
  const CouplingBlock& coupling(std::size_t n, std::size_t m) const;
  /// Concatenated H0 eigenvalues in block layout.
  Eigen::VectorXd energies() const;
  /// max - min of all H0 eigenvalues.
  double spectral_span() const;
  /// Dense Hermitian matrix H0 + V.
  ComplexMatrix dense() const;
};

/// Energies uniform on [E_n - dE, E_n + dE]; V entries circular complex
/// Gaussian with E|V|^2 = v_bar^2, Hermitian by construction.
MicroHamiltonian build_hamiltonian(const MacroConfig& cfg, double v_bar, RngStream& rng);

struct OracleTrajectory {
  std::vector<double> times;
  std::vector<SuperpositionState> p_of_t;
  std::vector<ComplexMatrix> W_of_t;  // empty unless requested
  std::size_t steps = 0;
  std::size_t renormalizations = 0;
  double max_norm_drift = 0.0;
};

struct EvolveOptions {
  double dt = 0.0;  // 0 = largest admissible step
  bool record_W = false;
};

/// Largest integration step allowed for h: min(hbar / (10 span), t_collapse / 1000)
/// with t_collapse = hbar dE / (pi v_bar^2).
double max_oracle_step(const MicroHamiltonian& h, const MacroConfig& cfg);

/// Fixed-step RK4 integration of the interaction-picture Schrodinger
/// equation, recording p(t) on t_grid.
///
/// Throws UsageError for a bad grid or a step above max_oracle_step(), and
/// IntegrationError when the norm drifts by more than 1e-4. Drifts above
/// 1e-7 are renormalized and counted.
OracleTrajectory evolve_exact(const MicroHamiltonian& h, const MicroState& psi0,
                              std::span<const double> t_grid, const MacroConfig& cfg,
                              const EvolveOptions& options = {});

/// Same observable by full diagonalization of H (O(D^3) once, then O(D^2)
/// per recorded time). Used to cross-check evolve_exact and for large
/// ensembles where the grid is long compared with D.
OracleTrajectory evolve_spectral(const MicroHamiltonian& h, const MicroState& psi0,
                                 std::span<const double> t_grid, const MacroConfig& cfg,
                                 bool record_W = false);

/// W_nm(t) = sum_{k,k'} conj(eta_n^k) V_{nk,mk'} eta_m^k' e^{i(E_k - E_k') t / hbar}.
ComplexMatrix measure_W(const MicroHamiltonian& h, const MicroAmplitudes& eta, double t,
                        const MacroConfig& cfg);

/// W_nm evaluated from a microscopic state: b_n^dagger V_nm b_m / sqrt(p_n p_m).
ComplexMatrix measure_W_from_state(const MicroHamiltonian& h, const MicroState& state);

struct CorrelatorOptions {
  std::size_t lags_per_tau_c = 8;
  double max_lag_tau_c = 10.0;
  std::size_t series_factor = 5;  // series length / max lag
};

/// Empirical correlator of one W_nm entry, averaged over eta draws.
struct CorrelatorEstimate {
  double lag_step = 0.0;
  std::vector<Complex> correlator;  // E[W(t) conj(W(t + k lag_step))]
  std::vector<Complex> envelope;    // correlator with the e^{-i(E_n - E_m)tau} carrier removed
  double sigma2 = 0.0;              // integral of the envelope over all lags
  double width = 0.0;               // half width at half maximum of |correlator|
  double effective_width() const { return 2.0 * width; }
};

CorrelatorEstimate estimate_correlator(const MicroHamiltonian& h, const MacroConfig& cfg,
                                       std::size_t n, std::size_t m, std::size_t ensemble_size,
                                       RngStream& rng, const CorrelatorOptions& options = {});

/// Matrix of sigma_nm^2 integrated from the empirical correlators.
/// Requires ensemble_size >= 100.
RealMatrix estimate_sigma(const MicroHamiltonian& h, const MacroConfig& cfg,
                          std::size_t ensemble_size, RngStream& rng,
                          const CorrelatorOptions& options = {});

/// pi hbar v_bar^2 / dE for a flat coupling profile.
double sigma2_from_coupling(double v_bar, double bin_width, double hbar);

}  // namespace collapse
