#pragma once

#include <cmath>
#include <cstdint>

#include "rfmp/types.hpp"

namespace rfmp {

/// Deterministic SplitMix64 stream.
///
/// SplitMix64 (Steele, Lea & Flood, "Fast splittable pseudorandom number
/// generators") is fully defined by three multiply-xor-shift rounds over a
/// 64-bit counter, so identical seeds produce bit-identical streams on every
/// platform and are easy to reproduce in other languages. Gaussian variates
/// come from a cached Box-Muller transform rather than the (implementation
/// defined) std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  Scalar uniform() { return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53; }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  /// Standard normal via Box-Muller; consumes two uniforms per pair.
  Scalar normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    Scalar u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const Scalar u2 = uniform();
    const Scalar r = std::sqrt(-2.0 * std::log(u1));
    const Scalar a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  Vector normal_vector(int dim) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal();
    return v;
  }

  /// Child stream seeded from this one; streams do not overlap in practice.
  Rng split() { return Rng(next_u64()); }

 private:
  std::uint64_t state_;
  Scalar cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace rfmp
