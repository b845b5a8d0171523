#ifndef APLICUR_RNG_HPP
#define APLICUR_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "aplicur/error.hpp"

namespace aplicur {

namespace detail {

// splitmix64; used to derive independent substream seeds from one root seed.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

} // namespace detail

/// Substream identifiers; solver components draw from disjoint streams of a
/// single root seed so that consuming more randomness in one component does
/// not perturb another.
enum class RngStream : std::uint64_t {
  sketch = 1,
  probes = 2,
  problem = 3,
  rhs = 4,
  user = 5,
};

/// Deterministic random stream. Distribution transforms are written out
/// explicitly (instead of std::*_distribution) so seeded results are
/// bit-identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(detail::mix64(seed)) {}

  Rng(std::uint64_t root_seed, RngStream stream, std::uint64_t index = 0)
      : gen_(detail::mix64(detail::mix64(root_seed ^ (0x51ed2701a3c5e1bdULL *
                                                      static_cast<std::uint64_t>(stream))) +
                           index)) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (no spare caching, deterministic stream use).
  double gaussian() {
    double u1 = 1.0 - uniform(); // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Uniform integer in [0, n) via rejection sampling (unbiased).
  std::uint64_t below(std::uint64_t n) {
    detail::require(n > 0, ErrorKind::invalid_argument, "Rng::below: n must be positive");
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  /// Rademacher sign.
  double sign() { return (gen_() & 1ULL) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 gen_;
};

} // namespace aplicur

#endif
