#pragma once

#include <cmath>
#include <vector>

#include "errors.hpp"
#include "util.hpp"

namespace atomlens {

// Complex scalar field sampled on an n x n grid, row-major, with the optical
// axis at index (n/2, n/2). Fields carry an arbitrary overall scale; every
// reported metric is a ratio, so only relative values matter.
struct SampledField {
  int n = 0;
  double pitch_m = 0;
  double lambda_m = 0;
  std::vector<cplx> amp;  // amp[iy * n + ix]

  static SampledField zeros(int n, double pitch_m, double lambda_m) {
    if (n < 4 || n % 2 != 0) throw config_error("SampledField: n must be even and >= 4");
    if (pitch_m <= 0) throw config_error("SampledField: pitch must be > 0");
    if (lambda_m <= 0) throw config_error("SampledField: lambda must be > 0");
    SampledField f;
    f.n = n;
    f.pitch_m = pitch_m;
    f.lambda_m = lambda_m;
    f.amp.assign(static_cast<std::size_t>(n) * n, cplx(0.0, 0.0));
    return f;
  }

  double coord(int i) const { return (i - n / 2) * pitch_m; }

  cplx& at(int ix, int iy) { return amp[static_cast<std::size_t>(iy) * n + ix]; }
  const cplx& at(int ix, int iy) const { return amp[static_cast<std::size_t>(iy) * n + ix]; }

  double intensity(int ix, int iy) const { return std::norm(at(ix, iy)); }

  double power() const {
    double p = 0;
    for (const auto& v : amp) p += std::norm(v);
    return p * sqr(pitch_m);
  }

  // bilinear intensity sample at physical (x, y); 0 outside the grid
  double intensity_at(double x_m, double y_m) const {
    const double fx = x_m / pitch_m + n / 2;
    const double fy = y_m / pitch_m + n / 2;
    const int ix = static_cast<int>(std::floor(fx));
    const int iy = static_cast<int>(std::floor(fy));
    if (ix < 0 || iy < 0 || ix + 1 >= n || iy + 1 >= n) return 0.0;
    const double tx = fx - ix, ty = fy - iy;
    const double i00 = intensity(ix, iy), i10 = intensity(ix + 1, iy);
    const double i01 = intensity(ix, iy + 1), i11 = intensity(ix + 1, iy + 1);
    return (1 - ty) * ((1 - tx) * i00 + tx * i10) + ty * ((1 - tx) * i01 + tx * i11);
  }
};

// Illumination profile across the lens aperture. The Gaussian radius is the
// 1/e^2 intensity radius (amplitude falls to 1/e there).
struct Illumination {
  enum class Profile { flat, gaussian };
  Profile profile = Profile::flat;
  double gauss_radius_m = 0;

  double amplitude(double x_m, double y_m) const {
    if (profile == Profile::flat) return 1.0;
    if (gauss_radius_m <= 0)
      throw config_error("Illumination: gaussian profile needs gauss_radius_m > 0");
    return std::exp(-(sqr(x_m) + sqr(y_m)) / sqr(gauss_radius_m));
  }

  static Illumination flat() { return {}; }
  static Illumination gaussian(double radius_m) {
    Illumination i;
    i.profile = Profile::gaussian;
    i.gauss_radius_m = radius_m;
    return i;
  }
};

}  // namespace atomlens
