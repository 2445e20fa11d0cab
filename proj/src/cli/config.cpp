#include <fstream>
#include <sstream>

#include "collapse/cli.hpp"
#include "collapse/io.hpp"

namespace collapse::cli {

namespace {

using nlohmann::json;

const char* const kExperiments[] = {"oracle", "sde", "drift", "born", "dispersion", "noise-validate", "regime"};

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is one past the offending character.
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": malformed JSON (" + e.what() + ")");
  }
  auto fail = [&](const std::string& field, const std::string& what) {
    throw ConfigError(source + ": " + field + ": " + what);
  };
  if (!doc.is_object()) fail("<root>", "expected an object");

  ExperimentConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "experiment") {
      if (!value.is_string()) fail(key, "expected a string");
      cfg.experiment = value.get<std::string>();
      bool known = false;
      for (const char* e : kExperiments) known = known || cfg.experiment == e;
      if (!known) {
        fail(key, "unknown experiment '" + cfg.experiment +
                      "' (oracle, sde, drift, born, dispersion, noise-validate, regime)");
      }
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) fail(key, "expected an unsigned 64-bit integer");
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "threads") {
      if (!value.is_number_unsigned() || value.get<std::uint64_t>() > 4096) {
        fail(key, "expected an integer in [0, 4096]");
      }
      cfg.threads = value.get<unsigned>();
    } else if (key == "output_dir") {
      if (!value.is_string() || value.get<std::string>().empty()) fail(key, "expected a non-empty path");
      cfg.output_dir = value.get<std::string>();
    } else if (key == "parameters") {
      if (!value.is_object()) fail(key, "expected an object");
      cfg.parameters = value;
    } else {
      fail(key, "unknown field");
    }
  }
  if (cfg.experiment.empty()) fail("experiment", "missing required field");
  if (!doc.contains("seed")) fail("seed", "missing required field");
  if (cfg.output_dir.empty()) fail("output_dir", "missing required field");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string config_hash(const ExperimentConfig& cfg) {
  const json canonical = {{"experiment", cfg.experiment}, {"parameters", cfg.parameters}, {"seed", cfg.seed}};
  return hex64(fnv1a(canonical.dump()));
}

}  // namespace collapse::cli
