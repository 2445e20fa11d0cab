#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace collapse {

/// Shortest decimal that parses back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double x);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t x);

/// Writes to a sibling temporary file, flushes, then renames over `path`.
/// Readers see either the old file or the complete new one.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// Identification lines carried by every CSV output.
struct OutputMeta {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
};

/// "# config_hash=...\n# seed=...\n# version=...\n" followed by the header row.
std::string csv_preamble(const OutputMeta& meta, const std::vector<std::string>& columns);

/// One CSV row of shortest round-trip numbers.
std::string csv_row(const std::vector<double>& values);

}  // namespace collapse
