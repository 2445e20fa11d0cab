#include "params.hpp"

#include <cmath>

namespace collapse::cli {

using nlohmann::json;

Fields::Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
  if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
}

void Fields::fail(const std::string& key, const std::string& what) const {
  throw ConfigError(where(key) + ": " + what);
}

const json* Fields::lookup(const std::string& key) {
  used_.insert(key);
  const auto it = obj_.find(key);
  return it == obj_.end() ? nullptr : &*it;
}

double Fields::number(const std::string& key, std::optional<double> fallback) {
  const json* v = lookup(key);
  if (!v) {
    if (!fallback) fail(key, "missing required field");
    return *fallback;
  }
  if (!v->is_number()) fail(key, "expected a number");
  const double x = v->get<double>();
  if (!std::isfinite(x)) fail(key, "expected a finite number");
  return x;
}

double Fields::positive(const std::string& key, std::optional<double> fallback) {
  const double x = number(key, fallback);
  if (!(x > 0.0)) fail(key, "expected a positive number");
  return x;
}

std::uint64_t Fields::count(const std::string& key, std::optional<std::uint64_t> fallback) {
  const json* v = lookup(key);
  if (!v) {
    if (!fallback) fail(key, "missing required field");
    return *fallback;
  }
  if (!v->is_number_unsigned()) fail(key, "expected a nonnegative integer");
  return v->get<std::uint64_t>();
}

bool Fields::flag(const std::string& key, std::optional<bool> fallback) {
  const json* v = lookup(key);
  if (!v) {
    if (!fallback) fail(key, "missing required field");
    return *fallback;
  }
  if (!v->is_boolean()) fail(key, "expected true or false");
  return v->get<bool>();
}

std::string Fields::choice(const std::string& key, std::initializer_list<const char*> allowed,
                           std::optional<std::string> fallback) {
  const json* v = lookup(key);
  std::string value;
  if (!v) {
    if (!fallback) fail(key, "missing required field");
    value = *fallback;
  } else {
    if (!v->is_string()) fail(key, "expected a string");
    value = v->get<std::string>();
  }
  std::string options;
  for (const char* a : allowed) {
    if (value == a) return value;
    options += options.empty() ? a : std::string(", ") + a;
  }
  fail(key, "'" + value + "' is not one of: " + options);
}

std::vector<double> Fields::numbers(const std::string& key, std::optional<std::vector<double>> fallback) {
  const json* v = lookup(key);
  if (!v) {
    if (!fallback) fail(key, "missing required field");
    return *fallback;
  }
  if (!v->is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const json& e = (*v)[i];
    if (!e.is_number() || !std::isfinite(e.get<double>())) {
      fail(key, "element " + std::to_string(i) + " is not a finite number");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::uint64_t> Fields::counts(const std::string& key,
                                          std::optional<std::vector<std::uint64_t>> fallback) {
  const json* v = lookup(key);
  if (!v) {
    if (!fallback) fail(key, "missing required field");
    return *fallback;
  }
  if (!v->is_array()) fail(key, "expected an array of integers");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const json& e = (*v)[i];
    if (!e.is_number_unsigned()) fail(key, "element " + std::to_string(i) + " is not a nonnegative integer");
    out.push_back(e.get<std::uint64_t>());
  }
  return out;
}

Fields Fields::sub(const std::string& key) {
  const json* v = lookup(key);
  static const json kEmpty = json::object();
  if (!v) return Fields(kEmpty, where(key));
  if (!v->is_object()) fail(key, "expected an object");
  return Fields(*v, where(key));
}

void Fields::finish() const {
  for (const auto& [key, value] : obj_.items()) {
    if (!used_.count(key)) fail(key, "unknown field");
  }
}

}  // namespace collapse::cli
