#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "collapse/cli.hpp"

namespace collapse::cli {

/// Typed, path-aware access to one JSON object. Every accessor records the
/// key it consumed; finish() rejects whatever is left over.
class Fields {
 public:
  Fields(const nlohmann::json& obj, std::string path);

  double number(const std::string& key, std::optional<double> fallback = std::nullopt);
  double positive(const std::string& key, std::optional<double> fallback = std::nullopt);
  std::uint64_t count(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt);
  bool flag(const std::string& key, std::optional<bool> fallback = std::nullopt);
  std::string choice(const std::string& key, std::initializer_list<const char*> allowed,
                     std::optional<std::string> fallback = std::nullopt);
  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt);
  std::vector<std::uint64_t> counts(const std::string& key,
                                    std::optional<std::vector<std::uint64_t>> fallback = std::nullopt);
  bool has(const std::string& key) const { return obj_.contains(key); }
  Fields sub(const std::string& key);

  void finish() const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
  std::string where(const std::string& key) const { return path_ + "." + key; }

 private:
  const nlohmann::json* lookup(const std::string& key);

  const nlohmann::json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace collapse::cli
