#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

namespace kfminset {

/// Seeded random number generator with explicitly coded distributions.
///
/// std::normal_distribution and friends are implementation-defined, so two
/// standard libraries can emit different streams from the same seed.  All
/// randomness in this project flows through this class instead: mt19937_64
/// output is fully specified by the standard and the transforms below are
/// plain arithmetic, which makes every seeded run reproducible across
/// toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).  n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased for every n.
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  /// Standard normal via Box-Muller.  Draws two uniforms per call; nothing
  /// is cached, so the stream position is a simple function of call count.
  double normal() {
    double u1;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Zero-mean normal with the given standard deviation.
  double normal(double sigma) { return sigma * normal(); }

  /// Derive an independent generator; used to give each pipeline stage or
  /// method its own stream so their draws never interleave.
  Rng fork(std::uint64_t salt) {
    // splitmix64 of (fresh draw ^ salt) decorrelates the child stream.
    std::uint64_t z = engine_() ^ salt;
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Stable 64-bit hash of a string (FNV-1a); used to salt per-method seeds.
inline std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace kfminset
