#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "util.hpp"

namespace atomlens {

// Rates and timing of the load/probe cycle.
struct DynamicsParams {
  double load_rate_hz = 0;    // empty -> occupied while loading is on
  double lifetime_s = 0;      // mean occupied dwell (1/loss rate), always on
  double atom_rate_hz = 0;    // fluorescence rate of one trapped atom
  double bg_rate_hz = 0;      // background + stray rate
  double prep_s = 0;          // loading window at the start of each cycle
  double probe_s = 0;         // detection window after it
  bool load_during_probe = false;
  bool blockade = true;       // light-assisted collisions cap occupancy at 1

  void validate() const {
    if (load_rate_hz < 0 || atom_rate_hz < 0 || bg_rate_hz < 0)
      throw config_error("dynamics: rates must be >= 0");
    if (lifetime_s <= 0) throw config_error("dynamics: lifetime_s must be > 0");
    if (prep_s < 0 || probe_s <= 0)
      throw config_error("dynamics: prep_s must be >= 0 and probe_s > 0");
  }

  // canonical settings for the two detection arms
  static DynamicsParams metalens_preset() {
    DynamicsParams p;
    p.load_rate_hz = 1.0;
    p.lifetime_s = 10.0;
    p.atom_rate_hz = 296.0;
    p.bg_rate_hz = 30.0;
    p.prep_s = 2.0;
    p.probe_s = 2.0;
    return p;
  }
  static DynamicsParams objective_preset() {
    DynamicsParams p = metalens_preset();
    p.atom_rate_hz = 1168.0;
    return p;
  }
};

enum class TraceSource { simulated, ingested };

// Binned photon-count record across many load/probe cycles. For simulated
// traces the hidden occupancy (time-averaged atom number per bin) is kept for
// classifier benchmarking; ingested traces carry counts only.
struct TelegraphTrace {
  DynamicsParams params;
  double bin_s = 0;
  int bins_per_cycle = 0;
  int prep_bins = 0;
  int n_cycles = 0;
  std::uint64_t seed = 0;
  TraceSource source = TraceSource::simulated;
  std::vector<long> counts;
  std::vector<double> occupancy;  // empty for ingested traces

  int n_bins() const { return static_cast<int>(counts.size()); }
  double t_start(int bin) const { return bin * bin_s; }
  bool is_probe_bin(int bin) const { return bin % bins_per_cycle >= prep_bins; }
  int cycle_of(int bin) const { return bin / bins_per_cycle; }
};

namespace detail {

inline int bins_of(double window_s, double bin_s, const char* what) {
  const double ratio = window_s / bin_s;
  const int n = static_cast<int>(std::lround(ratio));
  if (std::abs(ratio - n) > 1e-9)
    throw config_error(std::string("simulate_trace: ") + what +
                       " must be an integer number of bins");
  return n;
}

}  // namespace detail

// Two-state (or birth-death, if blockade is off) continuous-time Markov
// simulation of trap occupancy, with Poisson photon counts per bin:
// mean = atom_rate * occupied-time-in-bin + bg_rate * bin. Occupancy carries
// across cycles (a surviving atom is still there when the next probe starts).
// Deterministic: same (params, cycles, bin, seed, stream) -> identical trace.
inline TelegraphTrace simulate_trace(const DynamicsParams& params, int cycles, double bin_s,
                                     std::uint64_t seed, std::uint64_t stream_index = 0) {
  params.validate();
  if (cycles <= 0) throw config_error("simulate_trace: cycles must be > 0");
  if (bin_s <= 0) throw config_error("simulate_trace: bin_s must be > 0");

  TelegraphTrace trace;
  trace.params = params;
  trace.bin_s = bin_s;
  trace.prep_bins = detail::bins_of(params.prep_s, bin_s, "prep_s");
  const int probe_bins = detail::bins_of(params.probe_s, bin_s, "probe_s");
  trace.bins_per_cycle = trace.prep_bins + probe_bins;
  trace.n_cycles = cycles;
  trace.seed = seed;

  const long total_bins = static_cast<long>(trace.bins_per_cycle) * cycles;
  trace.counts.reserve(total_bins);
  trace.occupancy.reserve(total_bins);

  Rng rng = Rng::stream(seed, stream_index);
  const double cycle_s = params.prep_s + params.probe_s;
  long atoms = 0;
  double t = 0;                      // global time
  double occupied_time = 0;          // accumulated atoms * dt in current bin
  double bin_end = bin_s;
  long bin_index = 0;
  // next scheduled transition, resampled whenever rates change
  double t_next = 0;
  bool have_event = false;

  auto loading_on = [&](double time) {
    const double in_cycle = std::fmod(time, cycle_s);
    return in_cycle < params.prep_s || params.load_during_probe;
  };
  auto total_rate = [&](double time) {
    double r = atoms / params.lifetime_s;
    if (loading_on(time) && (!params.blockade || atoms == 0)) r += params.load_rate_hz;
    return r;
  };
  auto next_rate_change = [&](double time) {
    // boundaries of the piecewise-constant rate: prep/probe edges; the nudge
    // keeps an exact boundary landing from re-returning the same instant
    const double nudged = time + 1e-12;
    const long k = static_cast<long>(std::floor(nudged / cycle_s));
    const double in_cycle = nudged - k * cycle_s;
    if (params.load_during_probe) return (k + 1) * cycle_s;  // rates never switch
    return in_cycle < params.prep_s ? k * cycle_s + params.prep_s : (k + 1) * cycle_s;
  };

  const double t_total = cycle_s * cycles;
  while (bin_index < total_bins) {
    if (!have_event) {
      const double rate = total_rate(t);
      t_next = rate > 0 ? t + rng.exponential(1.0 / rate) : t_total + 1.0;
      have_event = true;
    }
    // the event is only valid up to the next rate switch
    const double t_switch = next_rate_change(t);
    double t_stop = std::min(t_next, t_switch);

    // advance through bin boundaries up to t_stop
    while (bin_end <= t_stop + 1e-15 && bin_index < total_bins) {
      occupied_time += atoms * std::max(0.0, bin_end - t);
      t = bin_end;
      const double mean =
          std::max(0.0, params.atom_rate_hz * occupied_time + params.bg_rate_hz * bin_s);
      trace.counts.push_back(rng.poisson(mean));
      trace.occupancy.push_back(occupied_time / bin_s);
      occupied_time = 0;
      ++bin_index;
      bin_end = (bin_index + 1) * bin_s;  // exact product, no accumulation drift
    }
    if (bin_index >= total_bins) break;

    occupied_time += atoms * std::max(0.0, t_stop - t);
    t = t_stop;
    if (t_stop == t_next) {
      // fire the transition: pick loss vs load by rate share
      const double loss = atoms / params.lifetime_s;
      const double rate = total_rate(t);
      if (rate > 0 && rng.uniform() * rate < loss)
        --atoms;
      else if (loading_on(t) && (!params.blockade || atoms == 0))
        ++atoms;
      have_event = false;
    } else {
      // rate switch: exponential memorylessness allows a fresh draw
      have_event = false;
    }
  }
  return trace;
}

// --- histogram splitting ----------------------------------------------------

struct HistogramSummary {
  double bg_mean = 0;
  double atom_mean = 0;
  double threshold = 0;          // equal-likelihood valley between the peaks
  double occupancy_fraction = 0; // mixture weight of the upper component
  double misclassification = 0;  // expected error rate at the threshold
  bool single_peaked = false;
  long n_bins = 0;
};

namespace detail {

inline double log_poisson_pmf(long k, double lambda) {
  return k * std::log(lambda) - lambda - std::lgamma(static_cast<double>(k) + 1.0);
}

inline double poisson_cdf(double k_threshold, double lambda) {
  // P(K <= floor(k_threshold)); direct sum is fine at these means
  double p = std::exp(-lambda), cdf = 0;
  const long kmax = static_cast<long>(std::floor(k_threshold));
  for (long k = 0; k <= kmax; ++k) {
    cdf += p;
    p *= lambda / static_cast<double>(k + 1);
  }
  return std::min(1.0, cdf);
}

}  // namespace detail

// Two-component Poisson mixture via EM, with a BIC comparison against a
// single Poisson: a trace with no atoms (or no background excursions) is
// reported as single-peaked instead of a degenerate split.
inline HistogramSummary histogram(const std::vector<long>& counts) {
  if (counts.empty()) throw input_error("histogram: empty trace");
  const std::size_t n = counts.size();
  HistogramSummary h;
  h.n_bins = static_cast<long>(n);

  std::vector<long> sorted(counts);
  std::sort(sorted.begin(), sorted.end());
  double mean_all = 0;
  for (long c : counts) mean_all += c;
  mean_all /= n;

  // init from the lower/upper 30% quantiles
  auto chunk_mean = [&](std::size_t lo, std::size_t hi) {
    double s = 0;
    for (std::size_t i = lo; i < hi; ++i) s += sorted[i];
    return s / std::max<std::size_t>(1, hi - lo);
  };
  double lam_b = std::max(1e-3, chunk_mean(0, n * 3 / 10 + 1));
  double lam_a = std::max(lam_b + 1e-3, chunk_mean(n - n * 3 / 10 - 1, n));
  double w_a = 0.5;

  double loglik = -1e300;
  for (int it = 0; it < 500; ++it) {
    double sw = 0, swk = 0, s1 = 0, s1k = 0, ll = 0;
    for (long k : counts) {
      const double la = std::log(w_a) + detail::log_poisson_pmf(k, lam_a);
      const double lb = std::log1p(-w_a) + detail::log_poisson_pmf(k, lam_b);
      const double m = std::max(la, lb);
      const double denom = std::exp(la - m) + std::exp(lb - m);
      const double resp_a = std::exp(la - m) / denom;
      ll += m + std::log(denom);
      sw += resp_a;
      swk += resp_a * k;
      s1 += 1.0 - resp_a;
      s1k += (1.0 - resp_a) * k;
    }
    w_a = std::clamp(sw / n, 1e-9, 1.0 - 1e-9);
    lam_a = std::max(1e-6, swk / std::max(1e-12, sw));
    lam_b = std::max(1e-6, s1k / std::max(1e-12, s1));
    if (lam_a < lam_b) {
      std::swap(lam_a, lam_b);
      w_a = 1.0 - w_a;
    }
    if (ll - loglik < 1e-10 * std::abs(ll) && it > 3) {
      loglik = ll;
      break;
    }
    loglik = ll;
  }

  // single-Poisson alternative
  double loglik1 = 0;
  for (long k : counts) loglik1 += detail::log_poisson_pmf(k, std::max(1e-6, mean_all));
  const double bic2 = -2.0 * loglik + 3.0 * std::log(static_cast<double>(n));
  const double bic1 = -2.0 * loglik1 + 1.0 * std::log(static_cast<double>(n));

  if (bic1 <= bic2 || lam_a - lam_b < 2.0 * std::sqrt(std::max(lam_a, 1e-6))) {
    h.single_peaked = true;
    h.bg_mean = h.atom_mean = mean_all;
    h.threshold = sorted.back() + 1.0;
    h.occupancy_fraction = 0.0;
    h.misclassification = 0.0;
    return h;
  }

  h.bg_mean = lam_b;
  h.atom_mean = lam_a;
  h.occupancy_fraction = w_a;
  // equal-likelihood count between the two weighted components
  h.threshold = (lam_a - lam_b + std::log((1.0 - w_a) / w_a)) / std::log(lam_a / lam_b);
  h.misclassification = (1.0 - w_a) * (1.0 - detail::poisson_cdf(h.threshold, lam_b)) +
                        w_a * detail::poisson_cdf(h.threshold, lam_a);
  return h;
}

// Probe windows only: prep bins carry no signal and would just dilute the
// background component.
inline HistogramSummary histogram(const TelegraphTrace& trace) {
  std::vector<long> probe;
  probe.reserve(trace.counts.size());
  for (int b = 0; b < trace.n_bins(); ++b)
    if (trace.is_probe_bin(b)) probe.push_back(trace.counts[b]);
  return histogram(probe);
}

// Per-bin boolean occupancy from a count threshold.
inline std::vector<bool> threshold_classify(const std::vector<long>& counts, double threshold) {
  std::vector<bool> occ(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) occ[i] = counts[i] > threshold;
  return occ;
}

inline std::vector<bool> threshold_classify(const TelegraphTrace& trace, double threshold) {
  return threshold_classify(trace.counts, threshold);
}

// Cycle-level occupancy: a cycle counts as loaded if any probe bin is above
// threshold.
inline std::vector<bool> cycle_occupancy(const TelegraphTrace& trace,
                                         const std::vector<bool>& bin_occupancy) {
  std::vector<bool> cycles(trace.n_cycles, false);
  for (int b = 0; b < trace.n_bins(); ++b)
    if (trace.is_probe_bin(b) && bin_occupancy[b]) cycles[trace.cycle_of(b)] = true;
  return cycles;
}

}  // namespace atomlens
