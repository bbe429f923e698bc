#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace covidsem {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for replicate `index` of a run keyed by `master`. Replicates get
// decorrelated streams and the mapping is stable across thread counts.
inline std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return splitmix64(s);
}

// mt19937_64 is fully specified by the standard, and the distributions here
// are hand-rolled, so streams are identical across platforms and stdlibs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double normal() {  // Box-Muller, one value per pair of uniforms
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Uniform integer in [0, n), n >= 1. Rejection keeps it unbiased.
  std::uint64_t bounded(std::uint64_t n) {
    std::uint64_t mask = ~0ULL;
    std::uint64_t limit = mask - mask % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace covidsem
