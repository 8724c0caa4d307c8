#pragma once

#include <cmath>
#include <vector>

#include "efficiency.hpp"
#include "errors.hpp"
#include "fft.hpp"
#include "field.hpp"
#include "lens_design.hpp"
#include "util.hpp"

namespace atomlens {

// Angular-spectrum transfer function. `exact` uses the full dispersion
// relation kz = sqrt(k^2 - kx^2 - ky^2) with evanescent attenuation;
// `fresnel` is the paraxial quadratic kernel, the right choice when
// validating against closed-form Gaussian-beam expressions (which are
// themselves paraxial solutions).
enum class Kernel { exact, fresnel };

// --- source construction ---------------------------------------------------

// Sample the placed bricks onto a propagation grid: the cell nearest each
// brick carries the converted-channel amplitude sqrt(efficiency) times the
// illumination, with the geometric phase 2 theta; all other cells are zero.
inline SampledField synthesize_aperture_field(const LayoutTable& layout,
                                              const EfficiencyTable& table, double lambda_m,
                                              const Illumination& illum, int n,
                                              double grid_pitch_m) {
  SampledField f = SampledField::zeros(n, grid_pitch_m, lambda_m);
  if (grid_pitch_m >= layout.prescription.pitch_m)
    throw config_error(
        "synthesize_aperture_field: grid pitch must be finer than the brick lattice");
  if (n * grid_pitch_m < 2.0 * layout.prescription.diameter_m)
    throw config_error(
        "synthesize_aperture_field: grid must embed the aperture with >= 2x zero-padding");
  const double e1 = std::sqrt(modulation_efficiency(BrickClass::lambda1, lambda_m, table));
  const double e2 = std::sqrt(modulation_efficiency(BrickClass::lambda2, lambda_m, table));
  for (const auto& s : layout.sites) {
    const int ix = n / 2 + static_cast<int>(std::lround(s.x_m / grid_pitch_m));
    const int iy = n / 2 + static_cast<int>(std::lround(s.y_m / grid_pitch_m));
    if (ix < 0 || iy < 0 || ix >= n || iy >= n) continue;
    const double conv = s.cls == BrickClass::lambda1 ? e1 : e2;
    const double a = conv * illum.amplitude(s.x_m, s.y_m);
    f.at(ix, iy) = a * std::exp(cplx(0, 2.0 * s.theta_rad));
  }
  return f;
}

// Continuum design-limit source: the exact hyperbolic phase with unit
// conversion inside the aperture (no brick sampling), for studies of what
// the phase map alone can do.
inline SampledField ideal_lens_field(int n, double grid_pitch_m, double f_m, double lambda_m,
                                     double aperture_diameter_m, const Illumination& illum) {
  if (n * grid_pitch_m < 2.0 * aperture_diameter_m)
    throw config_error("ideal_lens_field: grid must embed the aperture with >= 2x zero-padding");
  SampledField f = SampledField::zeros(n, grid_pitch_m, lambda_m);
  const double r2_max = sqr(0.5 * aperture_diameter_m);
  for (int iy = 0; iy < n; ++iy) {
    const double y = f.coord(iy);
    for (int ix = 0; ix < n; ++ix) {
      const double x = f.coord(ix);
      if (sqr(x) + sqr(y) > r2_max) continue;
      const double phase = hyperbolic_phase(x, y, f_m, lambda_m);
      f.at(ix, iy) = illum.amplitude(x, y) * std::exp(cplx(0, phase));
    }
  }
  return f;
}

// Collimated Gaussian beam waist at the grid plane (for propagator
// validation against the closed-form beam).
inline SampledField gaussian_source_field(int n, double grid_pitch_m, double lambda_m,
                                          double w0_m) {
  if (w0_m <= 0) throw config_error("gaussian_source_field: w0 must be > 0");
  SampledField f = SampledField::zeros(n, grid_pitch_m, lambda_m);
  for (int iy = 0; iy < n; ++iy) {
    const double y = f.coord(iy);
    for (int ix = 0; ix < n; ++ix) {
      const double x = f.coord(ix);
      f.at(ix, iy) = std::exp(-(sqr(x) + sqr(y)) / sqr(w0_m));
    }
  }
  return f;
}

// --- propagation -----------------------------------------------------------

namespace detail {

// spatial frequency index in FFT ordering -> signed harmonic number
inline int signed_freq(int m, int n) { return m < n / 2 ? m : m - n; }

inline void apply_transfer(std::vector<cplx>& spectrum, int n, double pitch_m,
                           double lambda_m, double dz_m, Kernel kernel, int threads) {
  const double k = two_pi / lambda_m;
  const double dk = two_pi / (n * pitch_m);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t iy = lo; iy < hi; ++iy) {
      const double ky = dk * signed_freq(static_cast<int>(iy), n);
      for (int ix = 0; ix < n; ++ix) {
        const double kx = dk * signed_freq(ix, n);
        const double kperp2 = sqr(kx) + sqr(ky);
        cplx h;
        if (kernel == Kernel::fresnel) {
          h = std::exp(cplx(0, dz_m * (k - kperp2 / (2.0 * k))));
        } else {
          const double kz2 = sqr(k) - kperp2;
          h = kz2 >= 0 ? std::exp(cplx(0, dz_m * std::sqrt(kz2)))
                       : std::exp(cplx(-std::abs(dz_m) * std::sqrt(-kz2), 0));
        }
        spectrum[iy * n + ix] *= h;
      }
    }
  });
}

}  // namespace detail

inline SampledField angular_spectrum_propagate(const SampledField& field, double dz_m,
                                               Kernel kernel = Kernel::exact,
                                               int threads = 1) {
  if (!std::isfinite(dz_m)) throw input_error("angular_spectrum_propagate: dz must be finite");
  SampledField out = field;
  Fft2D fft(field.n);
  fft.forward(out.amp);
  detail::apply_transfer(out.amp, field.n, field.pitch_m, field.lambda_m, dz_m, kernel,
                         threads);
  fft.inverse(out.amp);
  return out;
}

// --- axial scanning --------------------------------------------------------

// Focal region survey: on-axis intensity over an ordered plane list, plus the
// fully sampled field at the (parabolically refined) best focus. Full fields
// at other planes are recomputed on demand by field_at().
struct FocalStack {
  SampledField source;
  Kernel kernel = Kernel::exact;
  int threads = 1;
  std::vector<double> z_m;
  std::vector<double> on_axis_intensity;
  int best_index = -1;
  double best_z_m = 0;
  SampledField best_field;

  SampledField field_at(std::size_t i) const {
    if (i >= z_m.size()) throw input_error("FocalStack: plane index out of range");
    return angular_spectrum_propagate(source, z_m[i], kernel, threads);
  }
};

inline FocalStack scan_axial(const SampledField& field, double z_min_m, double z_max_m,
                             int n_planes, Kernel kernel = Kernel::exact, int threads = 1) {
  if (n_planes < 3) throw config_error("scan_axial: n_planes must be >= 3");
  if (!(z_min_m < z_max_m)) throw config_error("scan_axial: need z_min < z_max");

  FocalStack stack;
  stack.source = field;
  stack.kernel = kernel;
  stack.threads = threads;
  stack.z_m.resize(n_planes);
  stack.on_axis_intensity.assign(n_planes, 0.0);
  const double dz = (z_max_m - z_min_m) / (n_planes - 1);
  for (int j = 0; j < n_planes; ++j) stack.z_m[j] = z_min_m + j * dz;

  std::vector<cplx> spectrum = field.amp;
  Fft2D fft(field.n);
  fft.forward(spectrum);

  // On-axis value per plane without a full inverse transform: the center
  // sample of the inverse FFT is (1/n^2) sum S(m,l) H(m,l) (-1)^{m+l}, and H
  // depends only on kx^2 + ky^2 — so bin the signed spectrum once by the
  // integer radius q^2 + p^2 and reduce each plane to a 1-D sum.
  const int n = field.n;
  const int half = n / 2;
  const double k = two_pi / field.lambda_m;
  const double dk = two_pi / (n * field.pitch_m);
  std::vector<cplx> by_radius(static_cast<std::size_t>(2) * half * half + 1, cplx(0, 0));
  for (int iy = 0; iy < n; ++iy) {
    const int q = detail::signed_freq(iy, n);
    for (int ix = 0; ix < n; ++ix) {
      const int p = detail::signed_freq(ix, n);
      const cplx s = spectrum[static_cast<std::size_t>(iy) * n + ix];
      const std::size_t v = static_cast<std::size_t>(q * q + p * p);
      by_radius[v] += ((q + p) & 1) ? -s : s;
    }
  }
  std::vector<std::size_t> radii;
  std::vector<cplx> weights;
  for (std::size_t v = 0; v < by_radius.size(); ++v)
    if (by_radius[v] != cplx(0, 0)) {
      radii.push_back(v);
      weights.push_back(by_radius[v]);
    }

  parallel_for(static_cast<std::size_t>(n_planes), threads,
               [&](std::size_t lo, std::size_t hi) {
                 for (std::size_t j = lo; j < hi; ++j) {
                   const double z = stack.z_m[j];
                   cplx acc(0, 0);
                   for (std::size_t i = 0; i < radii.size(); ++i) {
                     const double kperp2 = radii[i] * sqr(dk);
                     cplx h;
                     if (kernel == Kernel::fresnel) {
                       h = std::exp(cplx(0, z * (k - kperp2 / (2.0 * k))));
                     } else {
                       const double kz2 = sqr(k) - kperp2;
                       h = kz2 >= 0 ? std::exp(cplx(0, z * std::sqrt(kz2)))
                                    : std::exp(cplx(-std::abs(z) * std::sqrt(-kz2), 0));
                     }
                     acc += weights[i] * h;
                   }
                   acc /= static_cast<double>(n) * n;
                   stack.on_axis_intensity[j] = std::norm(acc);
                 }
               });

  int best = 0;
  for (int j = 1; j < n_planes; ++j)
    if (stack.on_axis_intensity[j] > stack.on_axis_intensity[best]) best = j;
  stack.best_index = best;

  // parabolic refinement when the maximum is interior
  stack.best_z_m = stack.z_m[best];
  if (best > 0 && best + 1 < n_planes) {
    const double y0 = stack.on_axis_intensity[best - 1];
    const double y1 = stack.on_axis_intensity[best];
    const double y2 = stack.on_axis_intensity[best + 1];
    const double denom = y0 - 2.0 * y1 + y2;
    if (denom < 0) stack.best_z_m += 0.5 * dz * (y0 - y2) / denom;
  }
  stack.best_field = angular_spectrum_propagate(field, stack.best_z_m, kernel, threads);
  return stack;
}

// --- focal-plane metrics ---------------------------------------------------

struct RadialProfile {
  std::vector<double> r_m;
  std::vector<double> intensity;  // azimuthal mean
};

inline RadialProfile radial_profile(const SampledField& field, double dr_m = 0,
                                    double r_max_m = 0, int n_theta = 256) {
  RadialProfile p;
  if (dr_m <= 0) dr_m = 0.5 * field.pitch_m;
  if (r_max_m <= 0) r_max_m = 0.25 * field.n * field.pitch_m;
  const int n_r = static_cast<int>(r_max_m / dr_m) + 1;
  p.r_m.resize(n_r);
  p.intensity.resize(n_r);
  for (int i = 0; i < n_r; ++i) {
    const double r = i * dr_m;
    p.r_m[i] = r;
    if (i == 0) {
      p.intensity[0] = field.intensity(field.n / 2, field.n / 2);
      continue;
    }
    double acc = 0;
    for (int t = 0; t < n_theta; ++t) {
      const double a = two_pi * t / n_theta;
      acc += field.intensity_at(r * std::cos(a), r * std::sin(a));
    }
    p.intensity[i] = acc / n_theta;
  }
  return p;
}

struct FocalMetrics {
  double best_z_m = 0;
  double w0_m = 0;                   // 1/e^2 intensity radius at best focus
  double zr_m = 0;                   // axial half-intensity half-width
  double gaussian_reference_zr_m = 0;  // pi w0^2 / lambda
  double t_aperture = 0;             // power within the 5 um focal aperture
  double side_lobe_ratio = 0;        // first ring peak / central peak
  double peak_on_axis = 0;           // max on-axis intensity (arbitrary units)
};

namespace detail {

// first outward crossing of intensity below `target`, interpolated linearly
// in (r^2, log I) — exact for a Gaussian profile
inline double radius_at_level(const RadialProfile& p, double target) {
  for (std::size_t i = 1; i < p.r_m.size(); ++i) {
    if (p.intensity[i] < target && p.intensity[i - 1] >= target) {
      const double i0 = p.intensity[i - 1], i1 = p.intensity[i];
      if (i1 <= 0)
        return p.r_m[i - 1] +
               (p.r_m[i] - p.r_m[i - 1]) * (i0 - target) / std::max(1e-300, i0 - i1);
      const double l0 = std::log(i0), l1 = std::log(i1), lt = std::log(target);
      const double r2 = sqr(p.r_m[i - 1]) +
                        (sqr(p.r_m[i]) - sqr(p.r_m[i - 1])) * (l0 - lt) / (l0 - l1);
      return std::sqrt(r2);
    }
  }
  throw input_error("focal_metrics: radial profile never falls below the target level");
}

inline double axial_half_crossing(const std::vector<double>& z, const std::vector<double>& y,
                                  int from, int step, double half) {
  for (int j = from + step; j >= 0 && j < static_cast<int>(z.size()); j += step) {
    if (y[j] <= half) {
      const int a = j - step, b = j;
      const double f = (y[a] - half) / std::max(1e-300, y[a] - y[b]);
      return z[a] + f * (z[b] - z[a]);
    }
  }
  throw input_error("focal_metrics: axial profile does not reach half maximum in range");
}

}  // namespace detail

inline FocalMetrics focal_metrics(const FocalStack& stack) {
  if (stack.best_index <= 0 ||
      stack.best_index + 1 >= static_cast<int>(stack.z_m.size()))
    throw input_error("focal_metrics: focus at scan boundary — widen the z range");

  FocalMetrics m;
  m.best_z_m = stack.best_z_m;
  m.peak_on_axis = stack.on_axis_intensity[stack.best_index];

  const RadialProfile prof = radial_profile(stack.best_field);
  const double center = prof.intensity[0];
  if (center <= 0) throw input_error("focal_metrics: zero central intensity");
  m.w0_m = detail::radius_at_level(prof, center * std::exp(-2.0));
  m.gaussian_reference_zr_m = pi * sqr(m.w0_m) / stack.source.lambda_m;

  const double half = 0.5 * m.peak_on_axis;
  const double z_lo = detail::axial_half_crossing(stack.z_m, stack.on_axis_intensity,
                                                  stack.best_index, -1, half);
  const double z_hi = detail::axial_half_crossing(stack.z_m, stack.on_axis_intensity,
                                                  stack.best_index, +1, half);
  m.zr_m = 0.5 * (z_hi - z_lo);

  // transmission through the fixed 5 um diameter aperture at the focus
  const double r_ap = 2.5e-6;
  const SampledField& bf = stack.best_field;
  double enclosed = 0;
  const int span = std::min(bf.n / 2 - 1, static_cast<int>(r_ap / bf.pitch_m) + 2);
  for (int iy = bf.n / 2 - span; iy <= bf.n / 2 + span; ++iy) {
    const double y = bf.coord(iy);
    for (int ix = bf.n / 2 - span; ix <= bf.n / 2 + span; ++ix) {
      const double x = bf.coord(ix);
      if (sqr(x) + sqr(y) <= sqr(r_ap)) enclosed += bf.intensity(ix, iy);
    }
  }
  const double incident = stack.source.power();
  m.t_aperture = incident > 0 ? enclosed * sqr(bf.pitch_m) / incident : 0.0;

  // side lobe: first local minimum outward, then the first local maximum
  std::size_t i_min = 0;
  for (std::size_t i = 1; i + 1 < prof.intensity.size(); ++i) {
    if (prof.intensity[i] < prof.intensity[i + 1]) {
      i_min = i;
      break;
    }
  }
  if (i_min > 0) {
    double lobe = 0;
    for (std::size_t i = i_min; i + 1 < prof.intensity.size(); ++i) {
      lobe = std::max(lobe, prof.intensity[i]);
      if (prof.intensity[i] > prof.intensity[i + 1] && prof.intensity[i] > lobe * 0.999)
        break;
    }
    m.side_lobe_ratio = lobe / center;
  }
  return m;
}

// --- unmodulated background ------------------------------------------------

struct BackgroundResult {
  double ratio = 0;            // residual on-axis intensity / converted peak
  double converted_peak = 0;   // arbitrary common units
  double residual_on_axis = 0;
};

// On-axis intensities of the converted (focusing) and residual (unmodulated,
// co-polarized) channels at the focal plane, by radial Fresnel quadrature.
// This stays tractable at full device scale, where a 2-D grid cannot resolve
// the aperture. Residual amplitude per class is the lossless bound
// sqrt(1 - efficiency); class weights follow the layout's actual mix.
inline BackgroundResult unmodulated_background(const LayoutTable& layout,
                                               const EfficiencyTable& table,
                                               double lambda_m) {
  const LensPrescription& p = layout.prescription;
  p.validate();
  const double radius = 0.5 * p.diameter_m;
  const double f = p.focal_length_m;
  const double k = two_pi / lambda_m;

  const std::size_t n1 = layout.count(BrickClass::lambda1);
  const std::size_t n2 = layout.count(BrickClass::lambda2);
  const double total = static_cast<double>(n1 + n2);
  if (total <= 0) throw input_error("unmodulated_background: empty layout");
  const double w1 = n1 / total, w2 = n2 / total;

  const double eff1 = modulation_efficiency(BrickClass::lambda1, lambda_m, table);
  const double eff2 = modulation_efficiency(BrickClass::lambda2, lambda_m, table);
  const double resid_amp = w1 * std::sqrt(1.0 - eff1) + w2 * std::sqrt(1.0 - eff2);

  // enough samples for the fastest Fresnel oscillation at the rim
  const double phase_span = k * sqr(radius) / (2.0 * f);
  int n_q = static_cast<int>(16.0 * phase_span / two_pi) + 4096;
  if (n_q % 2 == 1) ++n_q;  // Simpson needs an even interval count

  const double h = radius / n_q;
  cplx conv_sum(0, 0), resid_sum(0, 0);
  for (int i = 0; i <= n_q; ++i) {
    const double sigma = i * h;
    const double fresnel = k * sqr(sigma) / (2.0 * f);
    const double phi1 = hyperbolic_phase(sigma, 0.0, f, p.lambda1_m);
    const double phi2 = hyperbolic_phase(sigma, 0.0, f, p.lambda2_m);
    const cplx conv_integrand =
        (w1 * std::sqrt(eff1) * std::exp(cplx(0, phi1 + fresnel)) +
         w2 * std::sqrt(eff2) * std::exp(cplx(0, phi2 + fresnel))) *
        sigma;
    const cplx resid_integrand = resid_amp * std::exp(cplx(0, fresnel)) * sigma;
    const double weight = (i == 0 || i == n_q) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    conv_sum += weight * conv_integrand;
    resid_sum += weight * resid_integrand;
  }
  conv_sum *= h / 3.0;
  resid_sum *= h / 3.0;

  BackgroundResult r;
  r.converted_peak = std::norm(conv_sum);
  r.residual_on_axis = std::norm(resid_sum);
  if (r.converted_peak <= 0)
    throw input_error("unmodulated_background: converted channel vanished");
  r.ratio = r.residual_on_axis / r.converted_peak;
  return r;
}

}  // namespace atomlens
