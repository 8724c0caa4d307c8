#pragma once

#include <cmath>
#include <vector>

#include "errors.hpp"
#include "fitting.hpp"
#include "telegraph.hpp"
#include "util.hpp"

namespace atomlens {

// One occupied dwell: how long the atom stayed, and whether the probe window
// ended before the atom left (right-censoring).
struct Dwell {
  double duration_s = 0;
  bool censored = false;
};

// Occupied runs inside each probe window. A run that reaches the window edge
// is censored there; the exponential's memorylessness makes runs already in
// progress at the window start unbiased starts.
inline std::vector<Dwell> extract_dwells(const TelegraphTrace& trace,
                                         const std::vector<bool>& bin_occupancy) {
  if (static_cast<int>(bin_occupancy.size()) != trace.n_bins())
    throw input_error("extract_dwells: occupancy length mismatch");
  std::vector<Dwell> dwells;
  for (int cycle = 0; cycle < trace.n_cycles; ++cycle) {
    const int b0 = cycle * trace.bins_per_cycle + trace.prep_bins;
    const int b1 = (cycle + 1) * trace.bins_per_cycle;
    int run = 0;
    for (int b = b0; b < b1; ++b) {
      if (bin_occupancy[b]) {
        ++run;
      } else if (run > 0) {
        dwells.push_back({run * trace.bin_s, false});
        run = 0;
      }
    }
    if (run > 0) dwells.push_back({run * trace.bin_s, true});
  }
  return dwells;
}

struct LifetimeEstimate {
  double tau_s = 0;
  double ci_low_s = 0;   // 95% interval from the Fisher information of ln tau
  double ci_high_s = 0;
  long n_dwells = 0;
  long n_uncensored = 0;
};

// Censored-exponential maximum likelihood: tau = total observed time /
// number of observed (uncensored) endings.
inline LifetimeEstimate estimate_lifetime(const std::vector<Dwell>& dwells) {
  double total = 0;
  long ended = 0;
  for (const auto& d : dwells) {
    if (d.duration_s < 0) throw input_error("estimate_lifetime: negative dwell");
    total += d.duration_s;
    ended += d.censored ? 0 : 1;
  }
  if (ended < 10)
    throw input_error("estimate_lifetime: need >= 10 complete (uncensored) dwells");
  LifetimeEstimate e;
  e.tau_s = total / ended;
  e.n_dwells = static_cast<long>(dwells.size());
  e.n_uncensored = ended;
  const double half_width = 1.959963985 / std::sqrt(static_cast<double>(ended));
  e.ci_low_s = e.tau_s * std::exp(-half_width);
  e.ci_high_s = e.tau_s * std::exp(half_width);
  return e;
}

inline LifetimeEstimate dwell_time_lifetime(const TelegraphTrace& trace,
                                            const std::vector<bool>& bin_occupancy) {
  return estimate_lifetime(extract_dwells(trace, bin_occupancy));
}

// Mean counts versus time-in-cycle over probe windows, restricted to cycles
// that start the probe occupied; the decay of this curve tracks atom loss.
struct DecayCurve {
  std::vector<double> t_s;            // time from probe start, bin centers
  std::vector<double> mean_counts;
  long n_cycles_used = 0;
};

inline DecayCurve average_decay(const TelegraphTrace& trace,
                                const std::vector<bool>& bin_occupancy,
                                bool keep_only_initially_occupied = true) {
  if (static_cast<int>(bin_occupancy.size()) != trace.n_bins())
    throw input_error("average_decay: occupancy length mismatch");
  const int probe_bins = trace.bins_per_cycle - trace.prep_bins;
  DecayCurve curve;
  curve.t_s.resize(probe_bins);
  curve.mean_counts.assign(probe_bins, 0.0);
  for (int j = 0; j < probe_bins; ++j) curve.t_s[j] = (j + 0.5) * trace.bin_s;
  for (int cycle = 0; cycle < trace.n_cycles; ++cycle) {
    const int b0 = cycle * trace.bins_per_cycle + trace.prep_bins;
    if (keep_only_initially_occupied && !bin_occupancy[b0]) continue;
    ++curve.n_cycles_used;
    for (int j = 0; j < probe_bins; ++j)
      curve.mean_counts[j] += trace.counts[b0 + j];
  }
  if (curve.n_cycles_used < 100)
    throw input_error("average_decay: need >= 100 contributing cycles");
  for (double& m : curve.mean_counts) m /= curve.n_cycles_used;
  return curve;
}

// Expected atom contribution to the mean counts per bin once finite lifetime
// is taken into account: the atom survives on average tau (1 - e^{-T/tau}) of
// the probe window T, so counts approach atom_rate * bin from below.
inline double lifetime_count_consistency(double tau_s, double probe_s, double atom_rate_hz,
                                         double bin_s) {
  if (tau_s <= 0) throw input_error("lifetime_count_consistency: tau must be > 0");
  if (probe_s <= 0 || bin_s <= 0)
    throw input_error("lifetime_count_consistency: windows must be > 0");
  const double survived = tau_s * (1.0 - std::exp(-probe_s / tau_s));
  return atom_rate_hz * survived * bin_s / probe_s;
}

}  // namespace atomlens
