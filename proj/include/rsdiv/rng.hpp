/**
 * @file rng.hpp
 * @brief Deterministic random-number generation.
 *
 * The engine is std::mt19937_64, whose output sequence is fully specified
 * by the C++ standard.  The distribution transforms (uniform double,
 * Box-Muller normal, inverse-CDF exponential) are implemented here because
 * the std:: distribution adaptors are implementation-defined and would
 * break bit-reproducibility across standard libraries.
 *
 * Independent per-path streams are derived from a single master seed by
 * splitmix64 mixing of (master, stream index), so results are identical
 * for any worker count and any path-scheduling order.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rsdiv {

/// splitmix64 finalizer; good avalanche, used only for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic RNG with explicit distribution transforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Seed for sub-stream `index` of master seed `master`.  Mixing twice
  /// decorrelates consecutive indices.
  static std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 1));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1].
  double uniform01_open_left() { return 1.0 - uniform01(); }

  /// Standard normal via Box-Muller; generates pairs, caches the spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01_open_left();  // > 0, log is finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

  /// Exponential with the given rate (mean 1/rate).
  double exponential(double rate) {
    return -std::log(uniform01_open_left()) / rate;
  }

  /// Raw 64-bit draw (used for Bernoulli decisions).
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace rsdiv
