#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "constants.hpp"
#include "efficiency.hpp"
#include "errors.hpp"
#include "util.hpp"

namespace atomlens {

// Design prescription for the dual-wavelength geometric-phase lens.
struct LensPrescription {
  double focal_length_m = 1.930241e-3;  // hits NA 0.46 with the 2 mm aperture
  double diameter_m = 2.0e-3;
  double lambda1_m = 852e-9;
  double lambda2_m = 780e-9;
  double pitch_m = 400e-9;

  double na() const {
    const double r = 0.5 * diameter_m;
    return r / std::sqrt(sqr(r) + sqr(focal_length_m));
  }

  void validate() const {
    if (focal_length_m <= 0) throw config_error("prescription: focal_length_m must be > 0");
    if (diameter_m <= 0) throw config_error("prescription: diameter_m must be > 0");
    if (lambda1_m <= 0 || lambda2_m <= 0)
      throw config_error("prescription: wavelengths must be > 0");
    if (pitch_m <= 0) throw config_error("prescription: pitch_m must be > 0");
  }
};

// Phase profile of an aberration-free flat lens: equal optical path from
// every aperture point to the focus, wrapped to [0, 2pi).
inline double hyperbolic_phase(double x_m, double y_m, double f_m, double lambda_m) {
  if (f_m <= 0) throw input_error("hyperbolic_phase: f must be > 0");
  if (lambda_m <= 0) throw input_error("hyperbolic_phase: lambda must be > 0");
  const double path = f_m - std::sqrt(sqr(x_m) + sqr(y_m) + sqr(f_m));
  return wrap_2pi(two_pi / lambda_m * path);
}

// Deterministic two-coloring of the square lattice: the two brick families
// interleave in a checkerboard, so each family forms a sqrt(2)-pitch lattice
// rotated 45 degrees and fills exactly half of any row (+-1 site).
inline BrickClass assign_partition(long ix, long iy) {
  return ((ix + iy) & 1) == 0 ? BrickClass::lambda1 : BrickClass::lambda2;
}

inline const char* partition_tag() { return "checkerboard"; }

// Geometric phase is twice the brick rotation, so the required rotation is
// half the target phase; bricks are 180-degree symmetric, hence mod pi.
inline double rotation_from_phase(double phi) { return wrap_pi(0.5 * phi); }

// One placed nanobrick.
struct NanobrickSpec {
  double x_m = 0;
  double y_m = 0;
  BrickClass cls = BrickClass::lambda1;
  double theta_rad = 0;
  double len_m = 0;
  double wid_m = 0;
};

struct LayoutTable {
  LensPrescription prescription;
  std::string partition = partition_tag();
  std::vector<NanobrickSpec> sites;  // row-major: y ascending, then x ascending

  std::size_t count(BrickClass c) const {
    std::size_t n = 0;
    for (const auto& s : sites) n += s.cls == c ? 1 : 0;
    return n;
  }
};

// Brick footprints per class (fabricated dimensions for the two bands).
inline void brick_footprint(BrickClass cls, double& len_m, double& wid_m) {
  if (cls == BrickClass::lambda1) {
    len_m = 250e-9;
    wid_m = 140e-9;
  } else {
    len_m = 160e-9;
    wid_m = 110e-9;
  }
}

// Place a brick on every lattice site inside the aperture. Each brick's
// rotation encodes the hyperbolic phase at its own design wavelength, so the
// two interleaved sub-lenses share one focus.
inline LayoutTable generate_layout(const LensPrescription& p) {
  p.validate();
  LayoutTable table;
  table.prescription = p;
  const double radius = 0.5 * p.diameter_m;
  const double r2_max = sqr(radius);
  const long n_half = static_cast<long>(std::floor(radius / p.pitch_m));
  table.sites.reserve(static_cast<std::size_t>(pi * r2_max / sqr(p.pitch_m) * 1.02) + 16);
  for (long iy = -n_half; iy <= n_half; ++iy) {
    const double y = iy * p.pitch_m;
    for (long ix = -n_half; ix <= n_half; ++ix) {
      const double x = ix * p.pitch_m;
      if (sqr(x) + sqr(y) > r2_max) continue;
      NanobrickSpec s;
      s.x_m = x;
      s.y_m = y;
      s.cls = assign_partition(ix, iy);
      const double lam = s.cls == BrickClass::lambda1 ? p.lambda1_m : p.lambda2_m;
      s.theta_rad = rotation_from_phase(hyperbolic_phase(x, y, p.focal_length_m, lam));
      brick_footprint(s.cls, s.len_m, s.wid_m);
      table.sites.push_back(s);
    }
  }
  return table;
}

}  // namespace atomlens
