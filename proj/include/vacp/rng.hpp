#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "vacp/common.hpp"

namespace vacp {

/// SplitMix64 finalizer, used to derive independent stream seeds.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `stream` of master seed `seed`. Pure; streams are
/// independent of evaluation order, which keeps snapshot generation
/// parallelizable and byte-deterministic.
inline uint64_t stream_seed(uint64_t seed, uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream ^ 0xA02BDBF7BB3C0A7Aull));
}

/// Deterministic RNG. mt19937_64 is fully specified by the standard; all
/// value mappings below are explicit so results do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n).
  uint64_t below(uint64_t n) {
    require(n > 0, ErrorCode::contract, "Rng::below needs n > 0");
    const uint64_t bound = ~uint64_t{0} - ~uint64_t{0} % n;
    uint64_t x = next_u64();
    while (x >= bound) x = next_u64();
    return x % n;
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  /// Fisher-Yates with explicit draws.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace vacp
