#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace pst::rng {

// Philox4x32-10 keyed counter permutation. Pure function of (counter, key),
// which is what makes every stream reproducible regardless of execution
// order or thread count.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Mixes (seed, a, b) into a new 64-bit seed for nested Monte Carlo layers
// (e.g. one sub-seed per simulation replicate, then one stream per draw).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b = 0);

// One independent random stream per (seed, stream id). The id occupies half
// of the Philox counter, so distinct ids under the same seed never overlap.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1), 53-bit resolution.
  double next_double();
  // Standard normal via Box-Muller; pairs are cached.
  double next_normal();
  // Uniform integer in [0, bound), rejection-sampled to avoid modulo bias.
  std::uint32_t next_below(std::uint32_t bound);
  // Fisher-Yates shuffle of {0, ..., n-1}.
  std::vector<int> permutation(int n);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace pst::rng
