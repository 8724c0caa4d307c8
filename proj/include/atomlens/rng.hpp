#pragma once

#include <cmath>
#include <cstdint>

#include "errors.hpp"

namespace atomlens {

// Deterministic PRNG stack. Non-uniform draws from <random> are
// implementation-defined, so the samplers here are hand-rolled to keep
// simulated traces bit-reproducible across platforms and library versions.

struct SplitMix64 {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};

// xoshiro256++ core with splitmix-seeded state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    SplitMix64 sm{seed};
    for (auto& w : s_) w = sm.next();
  }

  // Independent substream for (master seed, stream index); used so parallel
  // traces stay reproducible regardless of scheduling.
  static Rng stream(std::uint64_t master_seed, std::uint64_t stream_index) {
    SplitMix64 sm{master_seed};
    const std::uint64_t base = sm.next();
    return Rng(base + 0x9e3779b97f4a7c15ull * (stream_index + 1));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double exponential(double mean) {
    // inverse CDF; uniform() < 1 strictly, so log1p argument stays > -1
    return -mean * std::log1p(-uniform());
  }

  double normal() {
    // Marsaglia polar method; the spare value is discarded so the draw count
    // per call is state-independent only of the accepted pair
    double v1, v2, s;
    do {
      v1 = 2.0 * uniform() - 1.0;
      v2 = 2.0 * uniform() - 1.0;
      s = v1 * v1 + v2 * v2;
    } while (s >= 1.0 || s == 0.0);
    return v1 * std::sqrt(-2.0 * std::log(s) / s);
  }

  // Knuth's product method; exact for the moderate means used here (counts
  // per 50 ms bin). Means above ~700 would underflow exp(-mean), far beyond
  // any rate in scope.
  long poisson(double mean) {
    if (mean < 0) throw input_error("poisson: negative mean");
    if (mean == 0) return 0;
    if (mean > 700) throw input_error("poisson: mean too large for product method");
    const double limit = std::exp(-mean);
    long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4]{};
};

}  // namespace atomlens
