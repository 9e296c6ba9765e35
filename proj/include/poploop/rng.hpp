#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace poploop {

// 64-bit finalizer from SplitMix64 (Steele, Lea, Flood 2014).
inline uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream derivation: every random decision in a run is drawn from a stream
// seeded as derive_stream(run_seed, part...). Session streams use
// (seed, iteration, session_id), so simulation order and thread count
// cannot change any draw.
inline uint64_t derive_stream(uint64_t seed, uint64_t a, uint64_t b = 0) {
  uint64_t s = mix64(seed ^ 0xA5A5A5A55A5A5A5AULL);
  s = mix64(s ^ mix64(a));
  s = mix64(s ^ mix64(b));
  return s;
}

// SplitMix64 generator. Hand-rolled (not std::mt19937 + std distributions)
// so that sequences are identical across standard libraries and platforms;
// the run outputs are required to be byte-stable.
class Rng {
 public:
  explicit Rng(uint64_t stream_seed) : state_(stream_seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_unit() < p; }

  // Uniform integer in [0, bound). Lemire's multiply-shift; bound > 0.
  uint64_t uniform_int(uint64_t bound) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Exponential with the given mean (mean > 0).
  double exponential(double mean) { return -mean * std::log1p(-next_unit()); }

  // Categorical draw by CDF inversion. probs must be nonnegative and sum to
  // ~1; the last index with positive mass absorbs floating-point remainder.
  size_t categorical(std::span<const double> probs) {
    const double u = next_unit();
    double acc = 0.0;
    size_t last_positive = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] > 0.0) last_positive = i;
      acc += probs[i];
      if (u < acc) return i;
    }
    return last_positive;
  }

  // First k entries of a uniformly random permutation of 0..n-1
  // (partial Fisher-Yates).
  std::vector<int32_t> sample_without_replacement(int32_t n, int32_t k) {
    std::vector<int32_t> idx(static_cast<size_t>(n));
    for (int32_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int32_t j = 0; j < k; ++j) {
      const auto r = j + static_cast<int32_t>(uniform_int(static_cast<uint64_t>(n - j)));
      std::swap(idx[static_cast<size_t>(j)], idx[static_cast<size_t>(r)]);
    }
    idx.resize(static_cast<size_t>(k));
    return idx;
  }

 private:
  uint64_t state_;
};

}  // namespace poploop
