#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>

#include "collapse/analysis.hpp"
#include "collapse/cli.hpp"
#include "collapse/dispersion.hpp"
#include "collapse/ensemble.hpp"
#include "collapse/io.hpp"
#include "collapse/noise.hpp"
#include "collapse/oracle.hpp"
#include "collapse/sde.hpp"
#include "collapse/version.hpp"
#include "params.hpp"

namespace collapse::cli {

namespace {

using nlohmann::json;

struct Context {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  OutputMeta meta;
};

struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  json report = json::object();
};

using Plan = std::function<Outputs(const Context&)>;

json nullable(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

SuperpositionState read_p0(Fields& f, const std::string& key, std::optional<std::vector<double>> fallback = {}) {
  const std::vector<double> p = f.numbers(key, std::move(fallback));
  if (p.empty()) f.fail(key, "expected at least one weight");
  try {
    return SuperpositionState(p);
  } catch (const UsageError& e) {
    f.fail(key, e.what());
  }
}

std::string stats_csv(const EnsembleStats& s, const OutputMeta& meta) {
  std::vector<std::string> cols{"t"};
  for (std::size_t n = 0; n < s.macro_count; ++n) {
    cols.push_back("mean_p_" + std::to_string(n));
    cols.push_back("se_p_" + std::to_string(n));
  }
  for (const auto& [k, m] : s.pairs) {
    cols.push_back("cross_" + std::to_string(k) + "_" + std::to_string(m));
    cols.push_back("se_cross_" + std::to_string(k) + "_" + std::to_string(m));
  }
  std::string out = csv_preamble(meta, cols);
  for (std::size_t t = 0; t < s.times.size(); ++t) {
    std::vector<double> row{s.times[t]};
    for (std::size_t n = 0; n < s.macro_count; ++n) {
      row.push_back(s.mean_p[t][n]);
      row.push_back(s.se_p[t][n]);
    }
    for (std::size_t j = 0; j < s.pairs.size(); ++j) {
      row.push_back(s.cross[t][j]);
      row.push_back(s.se_cross[t][j]);
    }
    out += csv_row(row);
  }
  return out;
}

std::string trajectories_csv(const std::vector<TrajectoryResult>& runs, std::size_t macro_count,
                             const OutputMeta& meta) {
  std::vector<std::string> cols{"trajectory_id", "t"};
  for (std::size_t n = 0; n < macro_count; ++n) cols.push_back("p_" + std::to_string(n));
  std::string out = csv_preamble(meta, cols);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t t = 0; t < runs[i].times.size(); ++t) {
      std::vector<double> row{static_cast<double>(i), runs[i].times[t]};
      row.insert(row.end(), runs[i].path[t].begin(), runs[i].path[t].end());
      out += csv_row(row);
    }
  }
  return out;
}

json decay_json(const EnsembleStats& stats, std::size_t k, std::size_t m, double expected, double low, double high) {
  json j = {{"k", k}, {"m", m}, {"expected_rate", expected}};
  try {
    const RateFit f = decay_fit(stats, k, m);
    j["rate"] = f.rate;
    j["se"] = f.se;
    j["ci_low"] = f.ci_low;
    j["ci_high"] = f.ci_high;
    j["t_start"] = f.t_start;
    j["t_end"] = f.t_end;
    j["points"] = f.points;
    j["error_method"] = f.jackknife ? "jackknife" : "wls";
    j["accept_low"] = low;
    j["accept_high"] = high;
    j["pass"] = f.ci_high >= low && f.ci_low <= high;
  } catch (const InsufficientDataError& e) {
    j["error"] = e.what();
    j["pass"] = false;
  }
  return j;
}

json martingale_json(const EnsembleStats& stats, const SuperpositionState& p0) {
  const MartingaleResult m = martingale_check(stats, p0);
  return {{"max_z", nullable(m.max_z)},
          {"worst_t", stats.times[m.worst_time]},
          {"worst_state", m.worst_state},
          {"pass", m.pass}};
}

json born_json(const EnsembleStats& stats, const SuperpositionState& p0) {
  json j;
  try {
    const BornResult b = born_test(stats, p0);
    std::vector<json> z;
    bool within = true;
    for (std::size_t n = 0; n < p0.size(); ++n) {
      const double se = std::sqrt(p0[n] * (1.0 - p0[n]) / static_cast<double>(b.total));
      const double d = b.frequencies[n] - p0[n];
      const double zn = se > 0.0 ? d / se : (d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
      within = within && std::abs(zn) <= 3.0;
      z.push_back(nullable(zn));
    }
    j = {{"chi_square", nullable(b.chi_square)},
         {"p_value", b.p_value},
         {"dof", b.dof},
         {"total", b.total},
         {"frequencies", b.frequencies},
         {"binomial_z", z},
         {"pass", within && b.p_value > 0.01}};
  } catch (const InsufficientDataError& e) {
    j = {{"error", e.what()}, {"pass", false}};
  }
  return j;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// ---------------------------------------------------------------- sde / born

Plan plan_sde(Fields& f, bool born) {
  const SuperpositionState p0 = read_p0(f, "p0");
  SdeConfig cfg;
  const double sigma = f.number("sigma", 1.0);
  const double hbar = f.positive("hbar", 1.0);
  const std::string scheme = born ? f.choice("scheme", {"ito", "amplitude_ito"}, "ito")
                                  : f.choice("scheme", {"ito", "amplitude_ito", "stratonovich"}, "ito");
  cfg.scheme = scheme == "ito" ? Scheme::ItoEulerMaruyama
               : scheme == "amplitude_ito" ? Scheme::AmplitudeIto
                                           : Scheme::StratonovichHeun;
  const double lambda = cfg.scheme == Scheme::StratonovichHeun ? f.positive("lambda") : 0.0;
  cfg.noise = NoiseSpec::uniform(p0.size(), sigma,
                                 cfg.scheme == Scheme::StratonovichHeun ? NoiseKind::OrnsteinUhlenbeck : NoiseKind::White,
                                 lambda, hbar);
  cfg.dt = f.positive("dt", 5e-4);
  cfg.t_max = f.positive("t_max", 10.0);
  cfg.collapse_epsilon = f.number("collapse_epsilon", 1e-3);
  cfg.sample_every = f.count("sample_every", 100);
  cfg.continue_after_collapse = f.flag("continue_after_collapse", true);
  EnsembleOptions opts;
  opts.n_trajectories = f.count("n_trajectories", 10000);
  opts.batches = f.count("batches", 20);
  opts.dump_trajectories = f.count("dump_trajectories", 0);
  if (opts.n_trajectories == 0) f.fail("n_trajectories", "must be >= 1");
  if (opts.batches == 0) f.fail("batches", "must be >= 1");
  if (p0.size() < 2) f.fail("p0", "need at least two macrostates");
  cfg.validate();

  return [=](const Context& ctx) {
    EnsembleOptions o = opts;
    o.seed = ctx.seed;
    o.threads = ctx.threads;
    const EnsembleStats stats = run_sde_ensemble(cfg, p0, o);
    Outputs out;
    out.files.emplace_back("ensemble_stats.csv", stats_csv(stats, ctx.meta));
    if (!stats.dumped.empty()) {
      out.files.emplace_back("trajectories.csv", trajectories_csv(stats.dumped, p0.size(), ctx.meta));
    }
    json& r = out.report;
    r["scheme"] = scheme;
    r["n_trajectories"] = stats.n_trajectories;
    r["outcome_counts"] = stats.outcome_counts;
    r["uncollapsed"] = stats.uncollapsed;
    const double unc = static_cast<double>(stats.uncollapsed) / static_cast<double>(stats.n_trajectories);
    r["uncollapsed_fraction"] = unc;
    r["uncollapsed_flag"] = unc >= 0.01;
    r["clamp_events"] = stats.clamp_events;
    r["steps"] = stats.steps;
    r["clamp_fraction"] = stats.steps ? static_cast<double>(stats.clamp_events) / static_cast<double>(stats.steps) : 0.0;
    r["median_collapse_time"] = nullable(median(stats.collapse_times));
    r["collapse_time_scale"] = hbar * hbar / (sigma * sigma);
    r["born"] = born_json(stats, p0);
    const double expected = 2.0 * sigma * sigma / (hbar * hbar);
    json decays = json::array();
    for (const auto& [k, m] : stats.pairs) decays.push_back(decay_json(stats, k, m, expected, 0.95 * expected, 1.05 * expected));
    r["decay"] = decays;
    r["martingale"] = martingale_json(stats, p0);
    return out;
  };
}

// ---------------------------------------------------------------- oracle

Plan plan_oracle(Fields& f) {
  MacroConfig macro;
  for (std::uint64_t n : f.counts("micro_counts", std::vector<std::uint64_t>{200, 200})) {
    macro.micro_counts.push_back(static_cast<std::size_t>(n));
  }
  macro.bin_energies = f.numbers("bin_energies", std::vector<double>{0.0, 101.0});
  macro.bin_width = f.positive("bin_width", 50.0);
  macro.hbar = f.positive("hbar", 1.0);
  const double v_bar = f.number("v_bar", 1.0);
  if (v_bar < 0.0) f.fail("v_bar", "must be nonnegative");
  const SuperpositionState p0 = read_p0(f, "p0", std::vector<double>{0.5, 0.5});
  const std::size_t n_runs = f.count("n_runs", 200);
  const double t_max = f.positive("t_max", 24.0);
  const std::size_t n_times = f.count("n_times", 121);
  const std::string method = f.choice("method", {"spectral", "rk4"}, "spectral");
  const double dt = f.number("dt", 0.0);
  const std::size_t correlator_draws = f.count("correlator_draws", 100);
  const std::size_t batches = f.count("batches", 20);
  macro.validate();
  if (p0.size() != macro.macro_count()) f.fail("p0", "length must match micro_counts");
  if (n_runs == 0) f.fail("n_runs", "must be >= 1");
  if (n_times < 2) f.fail("n_times", "must be >= 2");
  if (dt < 0.0) f.fail("dt", "must be >= 0 (0 = automatic)");
  if (correlator_draws != 0 && correlator_draws < 100) f.fail("correlator_draws", "must be 0 or >= 100");
  if (batches == 0) f.fail("batches", "must be >= 1");

  return [=](const Context& ctx) {
    std::vector<double> grid(n_times);
    for (std::size_t i = 0; i < n_times; ++i) grid[i] = t_max * static_cast<double>(i) / static_cast<double>(n_times - 1);
    EnsembleOptions o;
    o.n_trajectories = n_runs;
    o.batches = batches;
    o.threads = ctx.threads;
    o.seed = ctx.seed;
    const EnsembleStats stats = run_ensemble(grid, macro.macro_count(), o, [&](std::size_t, RngStream& rng) {
      const MicroHamiltonian h = build_hamiltonian(macro, v_bar, rng);
      const MicroState psi0 = assemble_micro(p0, sample_micro_amplitudes(macro, rng));
      EvolveOptions eo;
      eo.dt = dt;
      const OracleTrajectory tr = method == "spectral" ? evolve_spectral(h, psi0, grid, macro)
                                                       : evolve_exact(h, psi0, grid, macro, eo);
      TrajectoryResult r;
      r.times = tr.times;
      for (const SuperpositionState& p : tr.p_of_t) r.path.emplace_back(p.p().begin(), p.p().end());
      r.steps = tr.steps;
      return r;
    });

    Outputs out;
    out.files.emplace_back("ensemble_stats.csv", stats_csv(stats, ctx.meta));
    json& r = out.report;
    const double sigma2 = sigma2_from_coupling(v_bar, macro.bin_width, macro.hbar);
    const double tau_c = macro.hbar / macro.bin_width;
    r["method"] = method;
    r["n_runs"] = n_runs;
    r["sigma2_formula"] = sigma2;
    r["tau_c"] = tau_c;
    const double expected = 2.0 * sigma2 / (macro.hbar * macro.hbar);
    json decays = json::array();
    for (const auto& [k, m] : stats.pairs) decays.push_back(decay_json(stats, k, m, expected, expected / 2.0, 2.0 * expected));
    r["decay"] = decays;
    r["martingale"] = martingale_json(stats, p0);
    if (correlator_draws > 0 && v_bar > 0.0 && macro.macro_count() >= 2) {
      RngStream rng = seed_stream(ctx.seed, n_runs);
      const MicroHamiltonian h = build_hamiltonian(macro, v_bar, rng);
      const CorrelatorEstimate c = estimate_correlator(h, macro, 0, 1, correlator_draws, rng);
      r["correlator"] = {{"pair", {0, 1}},
                         {"draws", correlator_draws},
                         {"lag_step", c.lag_step},
                         {"hwhm", c.width},
                         {"effective_width", c.effective_width()},
                         {"lag0", std::abs(c.correlator[0])},
                         {"lag0_expected", sigma2 / c.effective_width()},
                         {"sigma2", c.sigma2},
                         {"width_pass", c.width >= tau_c / 2.0 && c.width <= 2.0 * tau_c},
                         {"sigma2_pass", c.sigma2 >= sigma2 / 2.0 && c.sigma2 <= 2.0 * sigma2}};
    }
    return out;
  };
}

// ---------------------------------------------------------------- drift

Plan plan_drift(Fields& f) {
  const double lambda = f.positive("lambda", 1.0);
  const std::vector<double> products = f.numbers("lambda_tau_r", std::vector<double>{0.01, 0.1, 1.0, 10.0, 100.0});
  const double sigma = f.number("sigma", std::sqrt(1e-3));
  const std::vector<double> b0v = f.numbers("b0", std::vector<double>{1.0, 0.0});
  const double hbar = f.positive("hbar", 1.0);
  const double t_max = f.positive("t_max", 12.0);
  const std::vector<double> window = f.numbers("window", std::vector<double>{3.0, 12.0});
  const std::size_t realizations = f.count("n_realizations", 10000);
  const double divisor = f.number("dt_divisor", 20.0);
  const std::string policy = f.choice("bdot0_policy", {"schrodinger", "zero"}, "schrodinger");
  if (products.empty()) f.fail("lambda_tau_r", "expected at least one value");
  if (b0v.size() != 2) f.fail("b0", "expected [re, im]");
  if (window.size() != 2 || !(window[1] > window[0])) f.fail("window", "expected [t1, t2] with t2 > t1");
  if (!(divisor >= 20.0)) f.fail("dt_divisor", "must be >= 20");
  if (sigma < 0.0) f.fail("sigma", "must be nonnegative");

  std::vector<InertialConfig> points;
  for (double lt : products) {
    if (!(lt > 0.0)) f.fail("lambda_tau_r", "values must be positive");
    InertialConfig c;
    c.lambda = lambda;
    c.tau_r = lt / lambda;
    c.sigma = sigma;
    c.hbar = hbar;
    c.b0 = Complex(b0v[0], b0v[1]);
    c.bdot0_policy = policy == "schrodinger" ? BdotPolicy::SchrodingerConsistent : BdotPolicy::Zero;
    c.dt = std::min(c.tau_r, 1.0 / lambda) / divisor;
    c.t_max = t_max;
    c.ensemble_size = realizations;
    c.window_start = window[0];
    c.window_end = window[1];
    c.validate();
    // Window bounds must land on the step grid.
    for (double t : window) {
      const double steps = t / c.dt;
      if (std::abs(steps - std::round(steps)) > 1e-6) f.fail("window", "bounds must be multiples of every dt");
    }
    points.push_back(c);
  }

  return [=](const Context& ctx) {
    Outputs out;
    std::string csv = csv_preamble(ctx.meta, {"lambda_tau_r", "measured_re", "measured_im", "se_re", "se_im",
                                             "analytic_re", "analytic_im"});
    const Complex b0(b0v[0], b0v[1]);
    const Complex strat = -(sigma * sigma * b0) / (2.0 * hbar * hbar);
    json pts = json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
      const InertialConfig& c = points[i];
      // Each sweep point gets its own seed family.
      const InertialResult res = run_inertial(c, mix64(ctx.seed ^ mix64(i + 1)), ctx.threads);
      const Complex analytic = analytic_drift_integral(c.window_start, c.window_end, c.lambda, c.tau_r, c.sigma, c.b0,
                                                       c.hbar) / (c.window_end - c.window_start);
      const Complex m = res.window_drift;
      csv += csv_row({products[i], m.real(), m.imag(), res.window_se_re, res.window_se_im, analytic.real(),
                      analytic.imag()});
      const double z_re = res.window_se_re > 0 ? (m.real() - analytic.real()) / res.window_se_re : 0.0;
      const double z_im = res.window_se_im > 0 ? (m.imag() - analytic.imag()) / res.window_se_im : 0.0;
      pts.push_back({{"lambda_tau_r", products[i]},
                     {"dt", c.dt},
                     {"measured", {m.real(), m.imag()}},
                     {"analytic", {analytic.real(), analytic.imag()}},
                     {"z", {z_re, z_im}},
                     {"relative_to_stratonovich", std::abs(m) / std::abs(strat)},
                     {"pass", std::abs(z_re) <= 3.0 && std::abs(z_im) <= 3.0}});
    }
    out.files.emplace_back("drift_sweep.csv", csv);
    out.report["stratonovich_drift"] = {strat.real(), strat.imag()};
    out.report["points"] = pts;
    return out;
  };
}

// ---------------------------------------------------------------- dispersion

Plan plan_dispersion(Fields& f) {
  const double mass = f.positive("mass", 1.0);
  const double c = f.positive("c", 1.0);
  const double hbar = f.positive("hbar", 1.0);
  const double k_min = f.number("k_min", 0.0);
  const double k_max = f.number("k_max", 5.0);
  const std::size_t n_k = f.count("n_k", 51);
  const bool time_domain = f.flag("time_domain", true);
  if (n_k < 1) f.fail("n_k", "must be >= 1");
  if (k_max < k_min) f.fail("k_max", "must be >= k_min");

  return [=](const Context& ctx) {
    Outputs out;
    std::string csv = csv_preamble(ctx.meta, {"k", "omega_plus", "omega_minus"});
    double worst_residual = 0.0;
    double worst_fit = 0.0;
    json fits = json::array();
    for (std::size_t i = 0; i < n_k; ++i) {
      const double k = n_k == 1 ? k_min : k_min + (k_max - k_min) * static_cast<double>(i) / static_cast<double>(n_k - 1);
      const ModeConfig mode = ModeConfig::from_physical(mass, k, c, hbar);
      const Spectrum s = spectrum(mode);
      worst_residual = std::max({worst_residual, characteristic_residual(mode, s.omega_plus),
                                 characteristic_residual(mode, s.omega_minus)});
      csv += csv_row({k, s.omega_plus, s.omega_minus});
      if (time_domain) {
        const double gap = s.omega_plus - s.omega_minus;
        const double t_max = 40.0 / gap + 20.0 / std::max(s.omega_plus, gap / 20.0);
        // Equal weight on both branches: b(0) = 1, b'(0) = -i (w+ + w-)/2.
        const TimeDomainCheck td = time_domain_check(mode, t_max, mode.tau0 / 50.0, 1.0,
                                                     Complex(0.0, -0.5 * (s.omega_plus + s.omega_minus)));
        worst_fit = std::max({worst_fit, td.rel_err_plus, std::isnan(td.rel_err_minus) ? 1.0 : td.rel_err_minus});
        fits.push_back({{"k", k},
                        {"omega_plus", td.omega_plus},
                        {"omega_minus", nullable(td.omega_minus)},
                        {"rel_err_plus", td.rel_err_plus},
                        {"rel_err_minus", nullable(td.rel_err_minus)}});
      }
    }
    out.files.emplace_back("dispersion.csv", csv);
    out.report["tau0"] = hbar / (2.0 * mass * c * c);
    out.report["max_polynomial_residual"] = worst_residual;
    out.report["residual_pass"] = worst_residual <= 1e-12;
    if (time_domain) {
      out.report["time_domain"] = fits;
      out.report["max_time_domain_rel_err"] = worst_fit;
      out.report["time_domain_pass"] = worst_fit <= 1e-4;
    }
    return out;
  };
}

// ---------------------------------------------------------------- noise-validate

Plan plan_noise(Fields& f) {
  const double sigma = f.positive("sigma", 1.0);
  const double dt = f.positive("dt", 0.01);
  const std::size_t white_samples = f.count("white_samples", 1000000);
  const double lambda = f.positive("lambda", 10.0);
  const double ou_dt = f.positive("ou_dt", 0.001);
  const std::size_t ou_steps = f.count("ou_steps", 1000000);
  if (white_samples < 2) f.fail("white_samples", "must be >= 2");
  const auto max_lag = static_cast<std::size_t>(std::llround(2.0 / (lambda * ou_dt)));
  if (max_lag < 2) f.fail("ou_dt", "must resolve the correlation time (2 / (lambda ou_dt) >= 2)");
  if (ou_steps < 5 * max_lag) f.fail("ou_steps", "must be at least 5 x the lag window 2/(lambda ou_dt)");

  return [=](const Context& ctx) {
    Outputs out;
    const NoiseSpec white = NoiseSpec::uniform(2, sigma);
    RngStream rng = seed_stream(ctx.seed, 0);
    NoiseIncrement inc;
    double s1 = 0.0, s2 = 0.0;
    Complex unpaired = 0.0;
    for (std::size_t i = 0; i < white_samples; ++i) {
      white_increment(white, dt, rng, inc);
      const double a = std::norm(inc.dW(0, 1));
      s1 += a;
      s2 += a * a;
      unpaired += inc.dW(0, 1) * inc.dW(0, 1);
    }
    const auto n = static_cast<double>(white_samples);
    const double mean = s1 / n;
    const double se = std::sqrt(std::max(s2 / n - mean * mean, 0.0) / (n - 1.0));
    const double expected = sigma * sigma * dt;
    out.report["white"] = {{"mean_abs2", mean},
                           {"expected", expected},
                           {"z", (mean - expected) / se},
                           {"mean_unpaired", {unpaired.real() / n, unpaired.imag() / n}},
                           {"pass", std::abs(mean - expected) <= 4.0 * se}};

    const NoiseSpec ou = NoiseSpec::uniform(2, sigma, NoiseKind::OrnsteinUhlenbeck, lambda);
    RngStream ou_rng = seed_stream(ctx.seed, 1);
    OuState state = ou_init(ou, ou_rng);
    std::vector<Complex> trace(ou_steps);
    for (std::size_t i = 0; i < ou_steps; ++i) {
      trace[i] = state.W(0, 1);
      ou_step_inplace(ou, state, ou_dt, ou_rng);
    }
    const auto acf = estimate_autocorrelation(trace, max_lag);
    // Least-squares slope of log Re c_k over lags up to 1/lambda.
    const std::size_t fit_lags = max_lag / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k <= fit_lags; ++k) {
      const double x = static_cast<double>(k) * ou_dt;
      const double y = std::log(acf[k].real());
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double m = static_cast<double>(fit_lags + 1);
    const double lambda_fit = -(m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double stationary = sigma * sigma * lambda / 2.0;
    out.report["ou"] = {{"lag0", acf[0].real()},
                        {"stationary_expected", stationary},
                        {"lambda_fit", lambda_fit},
                        {"lambda", lambda},
                        {"lambda_pass", std::abs(lambda_fit - lambda) <= 0.05 * lambda},
                        {"at_one_over_lambda", acf[fit_lags].real()},
                        {"at_one_over_lambda_expected", stationary / std::numbers::e}};
    return out;
  };
}

// ---------------------------------------------------------------- regime

Plan plan_regime(Fields& f) {
  const double hbar = f.positive("hbar", kHbarSI);
  const double delta_x = f.positive("delta_x");
  const double delta_e = f.positive("delta_e");
  const double v_max = f.positive("v_max", kSpeedOfLight);
  const double threshold = f.positive("threshold", 100.0);
  std::optional<std::array<double, 3>> coherent;
  if (f.has("coherent")) {
    Fields c = f.sub("coherent");
    coherent = std::array<double, 3>{c.positive("mass"), c.positive("omega"), c.positive("energy")};
    c.finish();
    if ((*coherent)[2] < hbar * (*coherent)[1]) f.fail("coherent", "energy must be >= hbar * omega");
  }
  std::optional<std::array<double, 2>> collapse;
  if (f.has("collapse")) {
    Fields c = f.sub("collapse");
    collapse = std::array<double, 2>{c.positive("delta_e"), c.positive("v_bar")};
    c.finish();
  }

  return [=](const Context&) {
    Outputs out;
    const RegimeReport r = causality_report(delta_x, delta_e, v_max, hbar, threshold);
    out.report["causality"] = {{"delta_x", r.delta_x},
                               {"delta_e", r.delta_e},
                               {"v_max", r.v_max},
                               {"tau_r", r.tau_r},
                               {"tau_c", r.tau_c},
                               {"ratio", r.ratio},
                               {"threshold", r.threshold},
                               {"ito_valid", r.ito_valid},
                               {"relativistic_ratio", r.relativistic_ratio},
                               {"relativistic_valid", r.relativistic_valid}};
    if (coherent) {
      const CoherentProduct p = coherent_state_product((*coherent)[0], (*coherent)[1], (*coherent)[2], hbar);
      out.report["coherent"] = {{"sigma_e", p.sigma_e},
                                {"sigma_x", p.sigma_x},
                                {"product", p.product},
                                {"closed_form", p.closed_form},
                                {"half_hbar_v0", p.half_hbar_v0}};
    }
    if (collapse) {
      out.report["collapse_time"] = {
          {"order_form", collapse_time_order_form((*collapse)[0], (*collapse)[1], hbar)},
          {"from_coupling", collapse_time_from_coupling((*collapse)[0], (*collapse)[1], hbar)}};
    }
    return out;
  };
}

Plan make_plan(const ExperimentConfig& cfg) {
  Fields f(cfg.parameters, "parameters");
  Plan plan;
  try {
    if (cfg.experiment == "sde") plan = plan_sde(f, false);
    else if (cfg.experiment == "born") plan = plan_sde(f, true);
    else if (cfg.experiment == "oracle") plan = plan_oracle(f);
    else if (cfg.experiment == "drift") plan = plan_drift(f);
    else if (cfg.experiment == "dispersion") plan = plan_dispersion(f);
    else if (cfg.experiment == "noise-validate") plan = plan_noise(f);
    else if (cfg.experiment == "regime") plan = plan_regime(f);
    else throw ConfigError("experiment: unknown experiment '" + cfg.experiment + "'");
    f.finish();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("parameters: ") + e.what());
  }
  return plan;
}

}  // namespace

void validate(const ExperimentConfig& cfg) { make_plan(cfg); }

RunResult run_experiment(const ExperimentConfig& cfg) {
  const Plan plan = make_plan(cfg);
  Context ctx;
  ctx.seed = cfg.seed;
  ctx.threads = cfg.threads;
  ctx.meta = OutputMeta{config_hash(cfg), cfg.seed, kVersion};
  Outputs out = plan(ctx);

  json report = {{"experiment", cfg.experiment},
                 {"seed", cfg.seed},
                 {"config_hash", ctx.meta.config_hash},
                 {"version", ctx.meta.version}};
  report.update(out.report);

  RunResult result;
  std::filesystem::create_directories(cfg.output_dir);
  for (const auto& [name, content] : out.files) {
    const auto path = cfg.output_dir / name;
    write_atomic(path, content);
    result.files.push_back(path);
  }
  const auto report_path = cfg.output_dir / "report.json";
  write_atomic(report_path, report.dump(2) + "\n");
  result.files.push_back(report_path);
  result.report = std::move(report);
  return result;
}

int run(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& log) {
  try {
    ExperimentConfig cfg = load_config(config_path);
    if (overrides.seed) cfg.seed = *overrides.seed;
    if (overrides.threads) cfg.threads = *overrides.threads;
    if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;
    const RunResult r = run_experiment(cfg);
    for (const auto& p : r.files) log << "wrote " << p.string() << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IntegrationError& e) {
    log << "integration failure: " << e.what() << '\n';
    return kExitIntegration;
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    log << "failure: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace collapse::cli
