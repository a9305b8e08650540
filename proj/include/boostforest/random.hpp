#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace boostforest {

// Single splitmix64 scrambling step.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for the index-th worker derived from a master seed. Counter-based, so
// the stream a worker sees is independent of scheduling and thread count.
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

// Deterministic random source. mt19937_64 has a standard-mandated sequence;
// every distribution on top of it is implemented here by hand because the
// std::*_distribution classes are implementation-defined and would break
// bit-reproducibility across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection; n must be positive.
  int uniform_index(int n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) {
      x = next_u64();
    }
    return static_cast<int>(x % bound);
  }

  template <typename T>
  const T& pick(const std::vector<T>& pool) {
    return pool[uniform_index(static_cast<int>(pool.size()))];
  }

  // First k entries of a partial Fisher-Yates shuffle of 0..n-1, in draw
  // order.
  std::vector<int> sample_indices(int n, int k) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) {
      idx[i] = i;
    }
    if (k > n) {
      k = n;
    }
    for (int i = 0; i < k; ++i) {
      const int j = i + uniform_index(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

  // Standard normal via Box-Muller; always consumes exactly two uniforms.
  // u1 is drawn from (0, 1] so the log never sees zero.
  double normal() {
    const double u1 =
        static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace boostforest
