#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace prefbandit {

// Deterministic RNG built on splitmix64. All transforms are implemented here
// (not via <random> distributions) so that a given seed yields the same stream
// on every standard library and platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer on [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Standard normal via Box-Muller; two uniforms per draw, no caching, so the
  // stream position is a pure function of the number of calls.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Beta(a, b) by Johnk's rejection method. Exact for the small shape
  // parameters used here; acceptance rate ~B(a+1, b+1)/(ab) stays practical
  // for a, b <= 1.
  double beta(double a, double b) {
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("beta: shapes must be positive");
    for (;;) {
      const double x = std::pow(uniform(), 1.0 / a);
      const double y = std::pow(uniform(), 1.0 / b);
      const double s = x + y;
      if (s > 0.0 && s <= 1.0) return x / s;
    }
  }

  // Index draw from an explicit probability vector by inverse CDF.
  // Probabilities must be non-negative; they are normalized by their sum.
  int categorical(const std::vector<double>& probs) {
    if (probs.empty()) throw std::invalid_argument("categorical: empty distribution");
    double total = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw std::invalid_argument("categorical: negative or NaN mass");
      total += p;
    }
    if (total <= 0.0) throw std::invalid_argument("categorical: zero total mass");
    return pick(probs, total, uniform());
  }

  // Same draw but with the uniform supplied by the caller. Used where common
  // random numbers must be shared across counterfactuals.
  static int pick(const std::vector<double>& probs, double total, double u) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i] / total;
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::uint64_t state_;
};

// Stable seed derivation: FNV-1a over the tag, mixed with the base seed and
// two optional indices through one splitmix64 round each.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  Rng mix(base ^ h);
  std::uint64_t s = mix.next_u64();
  s ^= Rng(a + 0x632be59bd9b4e019ULL).next_u64();
  s ^= Rng(b + 0x9e6c63d0876a9a47ULL).next_u64() << 1;
  return s;
}

}  // namespace prefbandit
