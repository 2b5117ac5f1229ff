#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace aer {

/// Deterministic counter-based RNG (splitmix64 core).
///
/// Every consumer derives its own stream from (root seed, stream name), so
/// adding a consumer or reordering calls never perturbs other streams.
/// Distributions are implemented here rather than via <random> so that the
/// byte stream is identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ kGolden) {}

  /// Child stream keyed by name; independent of draws made on the parent.
  Rng stream(std::string_view name) const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
    for (char c : name) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 1099511628211ull;
    }
    return Rng(mix(state_ ^ h));
  }

  Rng stream(std::string_view name, std::uint64_t index) const {
    Rng s = stream(name);
    s.state_ = mix(s.state_ ^ (index * 0x9e3779b97f4a7c15ull));
    return s;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; one value per call, no cached spare.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace aer
