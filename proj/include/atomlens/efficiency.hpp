#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "errors.hpp"
#include "util.hpp"

namespace atomlens {

// Which of the two interleaved brick families a site belongs to. Class 1
// bricks are designed for lambda1 of the prescription, class 2 for lambda2.
enum class BrickClass : int { lambda1 = 1, lambda2 = 2 };

// Polarization-conversion efficiency versus wavelength for the two brick
// classes, sampled on a common ascending wavelength grid with linear
// interpolation between knots.
struct EfficiencyTable {
  std::vector<double> lambda_m;
  std::vector<double> eff_class1;
  std::vector<double> eff_class2;

  // Built-in table modeled on measured dual-band behavior: each class has an
  // asymmetric (two-sided Gaussian) conversion peak. Class 1 peaks at its
  // 852 nm design wavelength; class 2 is tuned so its peak sits near 720 nm,
  // trading peak efficiency at 780 nm for cross-talk suppression. Both
  // classes keep a >3x conversion contrast at each design wavelength.
  static EfficiencyTable builtin() {
    EfficiencyTable t;
    const double lo = 600e-9, hi = 1000e-9, step = 2e-9;
    const int n = static_cast<int>(std::lround((hi - lo) / step)) + 1;
    t.lambda_m.reserve(n);
    t.eff_class1.reserve(n);
    t.eff_class2.reserve(n);
    for (int i = 0; i < n; ++i) {
      const double lam = lo + i * step;
      t.lambda_m.push_back(lam);
      t.eff_class1.push_back(two_sided_peak(lam, 0.48, 852e-9, 42e-9, 60e-9));
      t.eff_class2.push_back(two_sided_peak(lam, 0.55, 720e-9, 50e-9, 80e-9));
    }
    return t;
  }

  // Idealized table: unit conversion at every wavelength, for design-limit
  // studies (no residual channel).
  static EfficiencyTable ideal() {
    EfficiencyTable t;
    t.lambda_m = {200e-9, 2000e-9};
    t.eff_class1 = {1.0, 1.0};
    t.eff_class2 = {1.0, 1.0};
    return t;
  }

  double interpolate(BrickClass cls, double lam) const {
    if (lambda_m.size() < 2) throw input_error("EfficiencyTable: needs >= 2 knots");
    if (lam < lambda_m.front() || lam > lambda_m.back())
      throw input_error("EfficiencyTable: wavelength outside sampled range");
    const auto& e = cls == BrickClass::lambda1 ? eff_class1 : eff_class2;
    auto it = std::upper_bound(lambda_m.begin(), lambda_m.end(), lam);
    std::size_t hi = std::min<std::size_t>(lambda_m.size() - 1,
                                           static_cast<std::size_t>(it - lambda_m.begin()));
    if (hi == 0) hi = 1;
    const std::size_t lo = hi - 1;
    const double f = (lam - lambda_m[lo]) / (lambda_m[hi] - lambda_m[lo]);
    const double v = e[lo] + f * (e[hi] - e[lo]);
    return std::clamp(v, 0.0, 1.0);
  }

 private:
  static double two_sided_peak(double lam, double peak, double center,
                               double sigma_left, double sigma_right) {
    const double d = lam - center;
    const double s = d < 0 ? sigma_left : sigma_right;
    return peak * std::exp(-0.5 * sqr(d / s));
  }
};

inline double modulation_efficiency(BrickClass cls, double lambda_m,
                                    const EfficiencyTable& table) {
  return table.interpolate(cls, lambda_m);
}

}  // namespace atomlens
