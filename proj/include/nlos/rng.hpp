#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nlos {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and up to three
/// indices (frame, particle, purpose). Used so that parallel and serial
/// schedules draw from identical streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ (a + 0x632be59bd9b4e019ULL));
  s = splitmix64(s ^ (b + 0x9e6c63d0876a9a35ULL));
  s = splitmix64(s ^ (c + 0xd1b54a32d192ed03ULL));
  return s;
}

/// mt19937_64 with hand-rolled distributions. The engine's output sequence is
/// fixed by the standard and the distribution code below is ours, so equal
/// seeds give bit-equal draws on any platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Poisson draw by Knuth's product method, chunked so exp() never
  /// underflows for large means.
  std::uint64_t poisson(double lambda) {
    std::uint64_t count = 0;
    while (lambda > 0.0) {
      double chunk = std::min(lambda, 500.0);
      double limit = std::exp(-chunk);
      double prod = uniform();
      while (prod > limit) {
        ++count;
        prod *= uniform();
      }
      lambda -= chunk;
    }
    return count;
  }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nlos
