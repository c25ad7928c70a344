#ifndef SISEPI_RNG_HPP
#define SISEPI_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace sisepi {

// splitmix64 step; used for seed mixing only, never as the main stream.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= stream * 0xda942042e4dd58b5ull;
  std::uint64_t b = splitmix64(s);
  return a ^ (b + 0x632be59bd9b4e019ull);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  // FNV-1a, for deriving named substreams.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Seeded random stream. Substreams are derived from the construction seed,
/// not from the consumed state, so `substream(i)` is the same stream no
/// matter how much the parent has been used. Samplers are explicit so that
/// every draw is reproducible and testable against exact distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix_seed(seed, 0)) {}

  std::uint64_t seed() const { return seed_; }

  Rng substream(std::uint64_t id) const { return Rng(mix_seed(seed_, id + 1)); }
  Rng substream(std::string_view tag) const { return Rng(mix_seed(seed_, hash_tag(tag))); }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0,1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n). n must be positive.
  std::int64_t uniform_int(std::int64_t n) {
    const auto un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::int64_t>(x % un);
  }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  double normal() {
    // Marsaglia polar method, second deviate discarded.
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
  }

  std::int64_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda > 32.0) {
      // Exact split: Poisson(a+b) = Poisson(a) + Poisson(b).
      const double half = lambda / 2.0;
      return poisson(half) + poisson(lambda - half);
    }
    const double l = std::exp(-lambda);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > l);
    return k - 1;
  }

  std::int64_t binomial(std::int64_t n, double p) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    std::int64_t k = 0;
    for (std::int64_t i = 0; i < n; ++i)
      if (uniform() < p) ++k;
    return k;
  }

  // Number of marked individuals in `draws` draws without replacement from a
  // population of size `total` containing `marked` marked ones.
  std::int64_t hypergeometric(std::int64_t total, std::int64_t marked, std::int64_t draws) {
    if (draws < 0 || draws > total || marked < 0 || marked > total)
      throw std::invalid_argument("hypergeometric: inconsistent arguments");
    std::int64_t k = 0;
    for (std::int64_t i = 0; i < draws; ++i) {
      if (uniform_int(total - i) < marked - k) ++k;
    }
    return k;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[static_cast<std::size_t>(uniform_int(static_cast<std::int64_t>(i)))]);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace sisepi

#endif
