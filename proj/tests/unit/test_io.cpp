#include <gtest/gtest.h>

#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "collapse/io.hpp"
#include "collapse/rng.hpp"

using namespace collapse;
namespace fs = std::filesystem;

TEST(FormatDouble, RoundTrips) {
  RngStream rng(1);
  for (int i = 0; i < 100000; ++i) {
    std::uint64_t bits = rng.next_u64();
    double x;
    std::memcpy(&x, &bits, sizeof x);
    if (!std::isfinite(x)) continue;
    const std::string s = format_double(x);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    ASSERT_EQ(std::memcmp(&back, &x, sizeof x), 0) << s;
  }
}

TEST(FormatDouble, SpecialValues) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Fnv1a, ReferenceVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
  EXPECT_EQ(hex64(1), "0000000000000001");
}

TEST(WriteAtomic, ReplacesContentWithoutLeftovers) {
  const fs::path dir = fs::temp_directory_path() / "collapse_io_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path file = dir / "out.csv";
  write_atomic(file, "old\n");
  write_atomic(file, "new\n");
  std::ifstream in(file);
  std::stringstream buf;
  buf << in.rdbuf();
  EXPECT_EQ(buf.str(), "new\n");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  EXPECT_EQ(entries, 1u);
  fs::remove_all(dir);
}

TEST(Csv, PreambleAndRows) {
  const OutputMeta meta{"00ff", 42, "0.1.0"};
  EXPECT_EQ(csv_preamble(meta, {"t", "p_0"}), "# config_hash=00ff\n# seed=42\n# version=0.1.0\nt,p_0\n");
  EXPECT_EQ(csv_row({0.5, 1e-20, -3.0}), "0.5,1e-20,-3\n");
}
