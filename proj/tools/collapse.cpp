#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "collapse/cli.hpp"
#include "collapse/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Ensemble simulations of macroscopic superposition reduction"};
  app.set_version_flag("--version", collapse::kVersion);
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  std::string config;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string output;
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed, "Master seed, overrides the config");
  CLI::Option* threads_opt = run->add_option("--threads", threads, "Worker threads, 0 = all cores");
  CLI::Option* output_opt = run->add_option("--output", output, "Output directory, overrides the config");

  CLI::App* check = app.add_subcommand("validate", "Check a config without running it");
  std::string check_config;
  check->add_option("--config", check_config, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : collapse::cli::kExitValidation;
  }

  if (*check) {
    try {
      collapse::cli::validate(collapse::cli::load_config(check_config));
      std::cout << check_config << ": ok\n";
      return collapse::cli::kExitOk;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return collapse::cli::kExitValidation;
    }
  }

  collapse::cli::Overrides overrides;
  if (*seed_opt) overrides.seed = seed;
  if (*threads_opt) overrides.threads = threads;
  if (*output_opt) overrides.output_dir = std::filesystem::path(output);
  return collapse::cli::run(config, overrides, std::cerr);
}
