#pragma once

#include <cmath>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"
#include "species.hpp"
#include "util.hpp"

namespace atomlens {

// Peak intensity of a Gaussian focus: I0 = 2 zeta P / (pi w0^2), with zeta
// the fraction of the incident power that ends up in the focal spot.
inline double peak_intensity(double power_w, double zeta, double w0_m) {
  if (power_w < 0) throw input_error("peak_intensity: P must be >= 0");
  if (zeta <= 0 || zeta > 1) throw input_error("peak_intensity: zeta must be in (0, 1]");
  if (w0_m <= 0) throw input_error("peak_intensity: w0 must be > 0");
  return 2.0 * zeta * power_w / (pi * sqr(w0_m));
}

// Ground-state AC Stark shift summed over the two D lines with their own
// linewidths, D2 weighted twice (line strength). Rotating-wave form
// U = (pi c^2 / 2) sum_i g_i Gamma_i / omega_i^3 * (1/Delta_i) * I with
// Delta_i = omega_trap - omega_i; the optional counter-rotating term replaces
// 1/Delta with 1/Delta - 1/(omega_trap + omega_i). Negative (attractive) for
// red detuning.
inline double dipole_potential(double intensity, double lambda_trap_m,
                               const AtomSpecies& species,
                               bool counter_rotating = false) {
  if (intensity < 0) throw input_error("dipole_potential: intensity must be >= 0");
  if (lambda_trap_m <= 0) throw input_error("dipole_potential: lambda must be > 0");
  const double omega = two_pi * c_light / lambda_trap_m;
  const struct {
    double lambda, gamma, weight;
  } lines[2] = {{species.d2_lambda_m, species.d2_gamma, 2.0},
                {species.d1_lambda_m, species.d1_gamma, 1.0}};
  double sum = 0;
  for (const auto& ln : lines) {
    const double omega_i = two_pi * c_light / ln.lambda;
    const double delta = omega - omega_i;
    if (std::abs(delta) < 1e-6 * omega_i)
      throw input_error("dipole_potential: trap wavelength resonant with a D line");
    double inv = 1.0 / delta;
    if (counter_rotating) inv -= 1.0 / (omega + omega_i);
    sum += ln.weight * ln.gamma / (omega_i * omega_i * omega_i) * inv;
  }
  return 0.5 * pi * sqr(c_light) * sum * intensity;
}

// Harmonic frequencies of a Gaussian-beam trap of depth |U0|:
// omega_r = sqrt(4|U0| / (m w0^2)), omega_z = sqrt(2|U0| / (m Z_R^2)).
inline void trap_frequencies(double u0_j, double w0_m, double zr_m, double mass_kg,
                             double& omega_r, double& omega_z) {
  if (u0_j == 0) throw input_error("trap_frequencies: |U0| must be > 0");
  if (w0_m <= 0 || zr_m <= 0 || mass_kg <= 0)
    throw input_error("trap_frequencies: w0, Z_R, mass must be > 0");
  const double depth = std::abs(u0_j);
  omega_r = std::sqrt(4.0 * depth / (mass_kg * sqr(w0_m)));
  omega_z = std::sqrt(2.0 * depth / (mass_kg * sqr(zr_m)));
}

enum class DipolePattern { isotropic, circular_dipole };

// Fraction of emitted photons inside the collection cone of the given NA.
// Isotropic: (1 - sqrt(1 - NA^2)) / 2. Circular dipole (sigma transitions,
// quantization axis along the optical axis): integral of the normalized
// (3/16pi)(1 + cos^2 theta) pattern over the cone.
inline double collection_efficiency(double na, DipolePattern pattern) {
  if (na <= 0 || na >= 1) throw input_error("collection_efficiency: NA must be in (0, 1)");
  const double cos_a = std::sqrt(1.0 - sqr(na));
  if (pattern == DipolePattern::isotropic) return 0.5 * (1.0 - cos_a);
  return 0.5 - (3.0 * cos_a + cos_a * cos_a * cos_a) / 8.0;
}

// End-to-end photon budget of one detection arm.
struct CollectionModel {
  double eta = 0;   // collection efficiency (measured or modeled)
  double t = 0;     // focal-aperture transmission
  double zeta = 0;  // power delivery fraction
  double path = 1;  // remaining path/detector efficiency product
};

// Expected count ratio between the two detection arms.
inline double count_ratio(const CollectionModel& metalens, const CollectionModel& objective) {
  const double num = metalens.eta * metalens.t * metalens.zeta * metalens.path;
  const double den = objective.eta * objective.t * objective.zeta * objective.path;
  if (den <= 0) throw input_error("count_ratio: objective budget must be > 0");
  return num / den;
}

// Vector-light-shift model: the circular component of the trap light acts as
// a magnetic field along the optical axis, linear in trap power.
struct FictitiousFieldModel {
  double beta_t_per_w = 0;  // field per effective trap power
  double w0_m = 0;          // length scale for the gradient estimate
};

struct FictitiousField {
  double b_t = 0;
  double gradient_t_per_m = 0;
};

inline FictitiousField fictitious_field(double effective_power_w,
                                        const FictitiousFieldModel& model) {
  if (model.w0_m <= 0) throw input_error("fictitious_field: model w0 must be > 0");
  FictitiousField f;
  f.b_t = model.beta_t_per_w * effective_power_w;
  f.gradient_t_per_m = f.b_t / model.w0_m;
  return f;
}

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double slope_se = 0;
  double intercept_se = 0;
  std::vector<double> residuals;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw input_error("linear_fit: need >= 2 (x, y) pairs");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += sqr(x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0) throw input_error("linear_fit: x values must be distinct");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.residuals.resize(n);
  double ssr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f.residuals[i] = y[i] - (f.intercept + f.slope * x[i]);
    ssr += sqr(f.residuals[i]);
  }
  if (n > 2) {
    const double var = ssr / (n - 2);
    f.slope_se = std::sqrt(var / sxx);
    f.intercept_se = std::sqrt(var * (1.0 / n + sqr(mx) / sxx));
  }
  return f;
}

// B_opt versus trap power, fitted as a straight line. The intercept is
// reported explicitly: a nonzero intercept means the optimal bias does not
// extrapolate to zero at zero power.
inline LinearFit optimal_bias_linear_fit(const std::vector<double>& power_w,
                                         const std::vector<double>& b_opt_t) {
  return linear_fit(power_w, b_opt_t);
}

}  // namespace atomlens
