/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pqaccel {

/// Seeded RNG with hand-rolled distributions on top of std::mt19937.
/// The engine sequence is pinned by the standard and the transforms below
/// are ours, so streams are identical across compilers and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(mix(seed)) {}

  uint32_t next_u32() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    uint64_t hi = next_u32();
    uint64_t lo = next_u32();
    return double(((hi << 32) | lo) >> 11) * (1.0 / 9007199254740992.0);
  }

  float uniform_float() { return float(uniform()); }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform index in [0, n). n must be >= 1.
  size_t uniform_index(size_t n) {
    return size_t(uniform() * double(n)) % n;  // modulo guards the 1.0-ulp edge
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double phi = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  float normal_float() { return float(normal()); }

  /// splitmix64-style stream derivation for sub-tasks (per subspace, per stage).
  static uint64_t derive(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static uint32_t mix(uint64_t seed) {
    uint64_t z = derive(seed, 0);
    return uint32_t(z ^ (z >> 32));
  }

  std::mt19937 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pqaccel
