#include "collapse/rng.hpp"

namespace collapse {

RngStream seed_stream(std::uint64_t master_seed, std::uint64_t trajectory_index) {
  // Two rounds of mixing so that neighbouring indices and neighbouring master
  // seeds land on unrelated engine seeds.
  const std::uint64_t key = mix64(master_seed) ^ mix64(trajectory_index * 0xD1B54A32D192ED03ULL + 1);
  return RngStream(mix64(key));
}

}  // namespace collapse
