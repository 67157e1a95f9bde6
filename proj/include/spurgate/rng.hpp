#pragma once

#include <cstdint>

namespace spurgate {

// SplitMix64 stream with rejection-sampled bounded draws (no modulo bias).
//
// Streams are cheap value types. A run derives one stream per sample from the
// global seed, so work can be farmed out to any number of threads without
// changing a single output byte:
//
//   selection stream : seeded with the global seed itself
//   sample stream i  : seeded with global_seed XOR (i+1) * 0x9E3779B97F4A7C15
//
// (wrapping 64-bit arithmetic throughout).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform draw from [0, n). n == 0 or 1 returns 0 without consuming state.
  std::uint64_t bounded(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  static RngStream for_selection(std::uint64_t global_seed) {
    return RngStream(global_seed);
  }

  static RngStream for_sample(std::uint64_t global_seed, std::uint64_t sample_id) {
    return RngStream(global_seed ^ ((sample_id + 1) * 0x9E3779B97F4A7C15ULL));
  }

 private:
  std::uint64_t state_;
};

}  // namespace spurgate
