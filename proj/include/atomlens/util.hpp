#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

#include "constants.hpp"

namespace atomlens {

using cplx = std::complex<double>;

inline double sqr(double x) { return x * x; }

// wrap an angle to [0, 2pi)
inline double wrap_2pi(double a) {
  double w = std::fmod(a, two_pi);
  return w < 0 ? w + two_pi : w;
}

// wrap an angle to [0, pi)
inline double wrap_pi(double a) {
  double w = std::fmod(a, pi);
  return w < 0 ? w + pi : w;
}

// wrap an angle to [-pi, pi) — signed distance to the nearest turn
inline double wrap_centered(double a) {
  double w = std::fmod(a + pi, two_pi);
  if (w < 0) w += two_pi;
  return w - pi;
}

// Chunked parallel loop over [0, n). Workers own disjoint contiguous index
// ranges, so results are deterministic regardless of thread count; n_threads
// <= 1 runs inline.
inline void parallel_for(std::size_t n, int n_threads,
                         const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  if (n_threads <= 1 || n < 2) {
    body(0, n);
    return;
  }
  const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(n_threads), n);
  const std::size_t chunk = (n + nt - 1) / nt;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < nt; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(body, lo, hi);
  }
  for (auto& th : pool) th.join();
}

}  // namespace atomlens
