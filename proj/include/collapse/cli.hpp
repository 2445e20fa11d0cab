#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "collapse/errors.hpp"

namespace collapse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIntegration = 3;

/// Schema violation, reported as "<source>:<line>:<col>: ..." for syntax
/// errors and "<source>: <field path>: ..." for bad fields.
class ConfigError : public UsageError {
 public:
  using UsageError::UsageError;
};

struct ExperimentConfig {
  std::string experiment;  // oracle, sde, drift, born, dispersion, noise-validate, regime
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::filesystem::path output_dir;
  nlohmann::json parameters = nlohmann::json::object();
};

ExperimentConfig parse_config(std::string_view text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the canonical JSON of {experiment, seed, parameters}.
/// threads and output_dir are excluded: they never change results.
std::string config_hash(const ExperimentConfig& cfg);

/// Parses every experiment parameter and runs the module-level validation
/// without doing any simulation work. Throws ConfigError.
void validate(const ExperimentConfig& cfg);

struct RunResult {
  std::vector<std::filesystem::path> files;
  nlohmann::json report;
};

/// Validates, runs, and writes all outputs into cfg.output_dir. Nothing is
/// written unless the whole experiment succeeds.
RunResult run_experiment(const ExperimentConfig& cfg);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::filesystem::path> output_dir;
};

/// Loads, applies overrides, runs, and maps failures to exit codes.
int run(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& log);

}  // namespace collapse::cli
