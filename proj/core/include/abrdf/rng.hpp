#pragma once

#include <cstdint>
#include <random>

namespace abrdf {

/// Counter-based uniform generator (splitmix64 over a keyed counter).
/// Streams keyed by (seed, stream) are independent, and drawing the n-th
/// value never depends on evaluation order, so parallel consumers stay
/// reproducible.
class CounterRng {
 public:
  CounterRng() = default;
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ (0x9e3779b97f4a7c15ull * (stream + 1)))) {}

  /// n-th uniform in [0, 1) of this stream, order-independent.
  double uniform_at(std::uint64_t n) const {
    return to_unit(mix(key_ + 0x9e3779b97f4a7c15ull * (n + 1)));
  }

  /// Sequential draw in [0, 1).
  double uniform() { return uniform_at(counter_++); }

  /// Sequential draw in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Sequential integer draw in [0, n).
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Derive an independent stream (e.g. one per ray).
  CounterRng fork(std::uint64_t stream) const {
    CounterRng r;
    r.key_ = mix(key_ ^ (0xbf58476d1ce4e5b9ull * (stream + 1)));
    return r;
  }

  /// Standard normal via Box-Muller on sequential draws.
  double normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 <= 0) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  static double to_unit(std::uint64_t v) {
    return static_cast<double>(v >> 11) * (1.0 / 9007199254740992.0);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace abrdf
