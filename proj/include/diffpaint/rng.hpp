#pragma once

#include <cstdint>
#include <random>

#include "diffpaint/tensor.hpp"

namespace diffpaint {

/// Seeded random stream with deterministic substream derivation. Substreams
/// are keyed off the parent seed only (not the parent's draw position), so
/// two components handed substreams with distinct keys never interleave.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }

  /// Independent stream derived from (seed, key); stable across draws.
  RngStream substream(uint64_t key) const { return RngStream(mix(seed_, key)); }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }

  ImageTensor normal_tensor(int channels, int height, int width) {
    ImageTensor out(channels, height, width);
    for (auto& v : out.data()) v = static_cast<float>(normal_(engine_));
    return out;
  }

  static uint64_t mix(uint64_t a, uint64_t b) {
    // splitmix64 finalizer over a combined state
    uint64_t z = a + 0x9E3779B97F4A7C15ULL + b * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace diffpaint
