#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "collapse/cli.hpp"

using namespace collapse;
using namespace collapse::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("collapse_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::map<std::string, std::string> files_in(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

ExperimentConfig small_born(const fs::path& out, unsigned threads) {
  ExperimentConfig cfg = parse_config(R"({
    "experiment": "born", "seed": 5, "output_dir": "x",
    "parameters": {"p0": [0.3, 0.7], "dt": 0.001, "t_max": 4.0, "n_trajectories": 1000,
                   "sample_every": 100, "dump_trajectories": 2}
  })");
  cfg.output_dir = out;
  cfg.threads = threads;
  return cfg;
}

std::string error_of(const std::string& text) {
  try {
    validate(parse_config(text, "cfg.json"));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseConfig, ReportsLineAndColumn) {
  const std::string msg = error_of("{\n  \"experiment\": \"born\",\n  \"seed\": 1,,\n}");
  EXPECT_EQ(msg.rfind("cfg.json:3:", 0), 0u) << msg;
}

TEST(ParseConfig, UnknownTopLevelField) {
  const std::string msg = error_of(R"({"experiment": "regime", "seed": 1, "output_dir": "o", "colour": 1})");
  EXPECT_NE(msg.find("colour: unknown field"), std::string::npos) << msg;
}

TEST(ParseConfig, UnknownParameter) {
  const std::string msg = error_of(
      R"({"experiment": "born", "seed": 1, "output_dir": "o", "parameters": {"p0": [0.5, 0.5], "sigam": 1}})");
  EXPECT_NE(msg.find("parameters.sigam"), std::string::npos) << msg;
}

TEST(ParseConfig, MissingRequiredFields) {
  EXPECT_NE(error_of(R"({"seed": 1, "output_dir": "o"})").find("experiment"), std::string::npos);
  EXPECT_NE(error_of(R"({"experiment": "born", "output_dir": "o"})").find("seed"), std::string::npos);
  EXPECT_NE(error_of(R"({"experiment": "born", "seed": 1, "output_dir": "o", "parameters": {}})").find("p0"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"experiment": "teleport", "seed": 1, "output_dir": "o"})").find("unknown experiment"),
            std::string::npos);
}

TEST(ParseConfig, ModuleValidationSurfacesAsConfigError) {
  // dt * sigma^2 / hbar^2 above 0.01 is rejected before any work is done.
  EXPECT_NE(error_of(R"({"experiment": "born", "seed": 1, "output_dir": "o",
                         "parameters": {"p0": [0.5, 0.5], "dt": 0.1}})"),
            "");
  EXPECT_NE(error_of(R"({"experiment": "born", "seed": 1, "output_dir": "o",
                         "parameters": {"p0": [0.5, 0.6]}})"),
            "");
}

TEST(ConfigHash, IgnoresThreadsAndOutput) {
  const ExperimentConfig a = small_born("a", 1);
  ExperimentConfig b = small_born("b", 8);
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 6;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Run, MalformedConfigExitsTwoAndWritesNothing) {
  const fs::path dir = scratch("malformed");
  const fs::path cfg = dir / "bad.json";
  std::ofstream(cfg) << R"({"experiment": "born", "seed": 1, "output_dir": ")" << (dir / "out").string()
                     << R"(", "parameters": {"p0": [0.5, 0.5], "bogus": true}})";
  std::ostringstream log;
  EXPECT_EQ(run(cfg, {}, log), kExitValidation);
  EXPECT_FALSE(fs::exists(dir / "out"));
  EXPECT_EQ(run(dir / "missing.json", {}, log), kExitValidation);
}

TEST(Run, WritesExpectedFilesWithPreamble) {
  const fs::path dir = scratch("files");
  const RunResult r = run_experiment(small_born(dir, 2));
  const auto files = files_in(dir);
  ASSERT_TRUE(files.count("ensemble_stats.csv"));
  ASSERT_TRUE(files.count("trajectories.csv"));
  ASSERT_TRUE(files.count("report.json"));
  const std::string& csv = files.at("ensemble_stats.csv");
  EXPECT_EQ(csv.rfind("# config_hash=" + config_hash(small_born(dir, 2)) + "\n# seed=5\n# version=", 0), 0u);
  const auto report = nlohmann::json::parse(files.at("report.json"));
  EXPECT_EQ(report["experiment"], "born");
  EXPECT_EQ(report["seed"], 5);
  EXPECT_TRUE(report.contains("born"));
  EXPECT_TRUE(report.contains("config_hash"));
}

TEST(Run, ByteIdenticalAcrossThreadCounts) {
  const fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  run_experiment(small_born(a, 1));
  run_experiment(small_born(b, 4));
  run_experiment(small_born(c, 4));
  EXPECT_EQ(files_in(a), files_in(b));
  EXPECT_EQ(files_in(b), files_in(c));
}

TEST(Run, SeedOverrideChangesResults) {
  const fs::path dir = scratch("seed");
  const fs::path cfg = dir / "born.json";
  std::ofstream(cfg) << R"({"experiment": "born", "seed": 5, "output_dir": ")" << (dir / "a").string()
                     << R"(", "parameters": {"p0": [0.3, 0.7], "dt": 0.001, "t_max": 4.0, "n_trajectories": 1000}})";
  std::ostringstream log;
  ASSERT_EQ(run(cfg, {}, log), kExitOk);
  Overrides o;
  o.seed = 6;
  o.output_dir = dir / "b";
  ASSERT_EQ(run(cfg, o, log), kExitOk);
  EXPECT_NE(slurp(dir / "a" / "ensemble_stats.csv"), slurp(dir / "b" / "ensemble_stats.csv"));
}

TEST(Run, ShippedConfigsValidate) {
  for (const auto& e : fs::directory_iterator(COLLAPSE_CONFIGS)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(validate(load_config(e.path()))) << e.path();
  }
}

TEST(Run, SmallExperimentsOfEveryKind) {
  const fs::path dir = scratch("kinds");
  const std::pair<const char*, const char*> cases[] = {
      {"regime", R"({"delta_x": 1e-13, "delta_e": 1e-12})"},
      {"dispersion", R"({"n_k": 5, "k_max": 2})"},
      {"noise-validate", R"({"white_samples": 10000, "ou_steps": 100000})"},
      {"drift", R"({"lambda_tau_r": [1.0], "n_realizations": 200, "t_max": 4, "window": [1, 4]})"},
      {"oracle", R"({"micro_counts": [8, 8], "bin_energies": [0, 5], "bin_width": 2, "n_runs": 4,
                     "t_max": 2, "n_times": 5, "correlator_draws": 0, "batches": 2})"},
  };
  for (const auto& [kind, params] : cases) {
    ExperimentConfig cfg = parse_config(std::string(R"({"experiment": ")") + kind +
                                        R"(", "seed": 3, "output_dir": "x", "parameters": )" + params + "}");
    cfg.output_dir = dir / kind;
    const RunResult r = run_experiment(cfg);
    EXPECT_TRUE(fs::exists(cfg.output_dir / "report.json")) << kind;
    EXPECT_EQ(r.report["experiment"], kind);
  }
}
