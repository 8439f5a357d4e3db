#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace mgda {

// Deterministic 64-bit generator (splitmix64). Distribution code is written
// out here because libstdc++'s <random> distributions are not pinned by the
// standard and byte-identical reruns are a contract of this project.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = ~0ULL - (~0ULL % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  std::size_t index(std::size_t n) { return std::size_t(uniform_int(n)); }

  bool bernoulli(double p) { return uniform01() < p; }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Geometric with success probability (1-gamma): P(k) = (1-gamma)*gamma^k.
  int geometric(double gamma) {
    const double u = uniform01();
    if (u <= 0.0) return 0;
    const int k = int(std::floor(std::log1p(-u) / std::log(gamma)));
    return k < 0 ? 0 : k;
  }

  // Independent substream for a named stage; keeps parallel workers and
  // optional pipeline stages from perturbing each other's draws.
  Rng derive(std::uint64_t stream) const {
    Rng r(state_ ^ (0xa0761d6478bd642fULL * (stream + 1)));
    r.next_u64();
    return r;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace mgda
