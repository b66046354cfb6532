#ifndef UACTN_RNG_HPP
#define UACTN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "uactn/numeric.hpp"

namespace uactn {

// Deterministic random source.
//
// Stream definition (reproducible in any language):
//   * raw 64-bit words come from MT19937-64 seeded with `seed`
//     (std::mt19937_64, identical to numpy's / the reference mt19937-64);
//   * uniform() = (word >> 11) * 2^-53, in [0, 1);
//   * normal() uses Box–Muller on u1 = 1 - uniform(), u2 = uniform():
//     r = sqrt(-2 ln u1), returns r cos(2π u2) and caches r sin(2π u2)
//     for the following call;
//   * index(n) rejects words >= floor(2^64 / n) * n and returns word % n.
//
// Single owner: copying is disabled so a stream is never silently forked.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;
  Rng(Rng&&) noexcept = default;
  Rng& operator=(Rng&&) noexcept = default;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
    std::uint64_t w = next_u64();
    while (w > limit) w = next_u64();
    return static_cast<std::size_t>(w % bound);
  }

  Matrix normal_matrix(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = normal();
    return m;
  }

  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo,
                        double hi) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = uniform(lo, hi);
    return m;
  }

  /// Fisher–Yates from the back.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace uactn

#endif  // UACTN_RNG_HPP
