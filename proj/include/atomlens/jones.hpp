#pragma once

#include <cmath>
#include <complex>

#include "constants.hpp"
#include "errors.hpp"
#include "util.hpp"

namespace atomlens {

// Jones calculus in the linear (x, y) basis.
//
// Circular-basis convention: e_L = (e_x + i e_y)/sqrt(2),
// e_R = (e_x - i e_y)/sqrt(2), so a_L = (a_x - i a_y)/sqrt(2) and
// a_R = (a_x + i a_y)/sqrt(2). With this choice S3 = 2 Im(conj(a_x) a_y)
// equals |a_L|^2 - |a_R|^2: positive S3 means left-handed.

struct JonesVector {
  cplx x{0.0, 0.0};
  cplx y{0.0, 0.0};

  double power() const { return std::norm(x) + std::norm(y); }

  cplx left() const { return (x - cplx(0, 1) * y) / std::sqrt(2.0); }
  cplx right() const { return (x + cplx(0, 1) * y) / std::sqrt(2.0); }

  static JonesVector from_circular(cplx a_l, cplx a_r) {
    const double inv = 1.0 / std::sqrt(2.0);
    return {(a_l + a_r) * inv, cplx(0, 1) * (a_l - a_r) * inv};
  }
  static JonesVector horizontal() { return {1.0, 0.0}; }
  static JonesVector vertical() { return {0.0, 1.0}; }
  static JonesVector lcp() { return from_circular(1.0, 0.0); }
  static JonesVector rcp() { return from_circular(0.0, 1.0); }
};

struct JonesMatrix {
  // row-major, acts on (x, y)
  cplx m[2][2]{{cplx(0), cplx(0)}, {cplx(0), cplx(0)}};

  JonesVector apply(const JonesVector& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y};
  }

  // matrix product: (*this) after other
  JonesMatrix after(const JonesMatrix& other) const {
    JonesMatrix r;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        r.m[i][j] = m[i][0] * other.m[0][j] + m[i][1] * other.m[1][j];
    return r;
  }

  // max |(M^dag M - I)_ij|
  double unitarity_defect() const {
    cplx g[2][2];
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        g[i][j] = std::conj(m[0][i]) * m[0][j] + std::conj(m[1][i]) * m[1][j];
    g[0][0] -= 1.0;
    g[1][1] -= 1.0;
    double d = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) d = std::max(d, std::abs(g[i][j]));
    return d;
  }

  // singular values (descending)
  void singular_values(double& s_max, double& s_min) const {
    // eigenvalues of the 2x2 Hermitian M^dag M
    const double a = std::norm(m[0][0]) + std::norm(m[1][0]);
    const double d = std::norm(m[0][1]) + std::norm(m[1][1]);
    const cplx b = std::conj(m[0][0]) * m[0][1] + std::conj(m[1][0]) * m[1][1];
    const double tr = a + d;
    const double disc = std::sqrt(std::max(0.0, sqr(a - d) + 4.0 * std::norm(b)));
    s_max = std::sqrt(std::max(0.0, 0.5 * (tr + disc)));
    s_min = std::sqrt(std::max(0.0, 0.5 * (tr - disc)));
  }

  static JonesMatrix identity() {
    JonesMatrix r;
    r.m[0][0] = r.m[1][1] = 1.0;
    return r;
  }

  // coordinate rotation R(a) = [[cos a, -sin a], [sin a, cos a]]
  static JonesMatrix rotator(double angle) {
    JonesMatrix r;
    const double c = std::cos(angle), s = std::sin(angle);
    r.m[0][0] = c;
    r.m[0][1] = -s;
    r.m[1][0] = s;
    r.m[1][1] = c;
    return r;
  }
};

// Retarder with the given retardance and fast-axis angle:
// R(axis) diag(1, e^{i delta}) R(-axis). The phase convention makes
// waveplate(pi, theta) exactly R(theta) diag(1, -1) R(-theta).
inline JonesMatrix waveplate(double retardance, double fast_axis) {
  JonesMatrix d;
  d.m[0][0] = 1.0;
  d.m[1][1] = std::exp(cplx(0, retardance));
  const JonesMatrix rot = JonesMatrix::rotator(fast_axis);
  return rot.after(d.after(JonesMatrix::rotator(-fast_axis)));
}

// Nanobrick as a lossy half-wave element rotated by `rotation`. In the
// circular basis it maps LCP -> conversion * e^{i 2 rotation} RCP plus
// residual * LCP (and the mirror action on RCP with conjugate geometric
// phase). The residual channel carries a fixed -i so that the matrix columns
// stay orthogonal and conversion = 1, residual = 0 reduces exactly to
// waveplate(pi, rotation); any unimodular factor there would satisfy the same
// power bookkeeping.
inline JonesMatrix nanobrick_element(double rotation, double conversion_amplitude,
                                     double residual_amplitude) {
  if (conversion_amplitude < 0 || residual_amplitude < 0)
    throw input_error("nanobrick_element: amplitudes must be non-negative");
  if (sqr(conversion_amplitude) + sqr(residual_amplitude) > 1.0 + 1e-12)
    throw input_error("nanobrick_element: conversion^2 + residual^2 exceeds 1");
  // Circular-basis matrix [[a, conv e^{-i2t}], [conv e^{+i2t}, a]] with
  // a = -i residual, transformed to the linear basis; the transform collapses
  // to the rotated half-wave form plus an isotropic residual term.
  const cplx a = cplx(0, -1) * residual_amplitude;
  const double c2 = std::cos(2.0 * rotation);
  const double s2 = std::sin(2.0 * rotation);
  JonesMatrix r;
  r.m[0][0] = a + conversion_amplitude * c2;
  r.m[0][1] = conversion_amplitude * s2;
  r.m[1][0] = conversion_amplitude * s2;
  r.m[1][1] = a - conversion_amplitude * c2;
  return r;
}

// Ellipticity angle from the two power readings behind a rotating
// quarter-wave plate + polarizing splitter: arccot(sqrt(P_p / P_s)),
// pi/4 for circular light, -> 0 (pi/2) for linear light along p (s).
inline double ellipticity_from_powers(double p_p, double p_s) {
  if (p_p < 0) throw input_error("ellipticity_from_powers: P_p < 0");
  if (p_s <= 0) throw input_error("ellipticity_from_powers: P_s must be > 0");
  return std::atan2(std::sqrt(p_s), std::sqrt(p_p));
}

enum class Handedness { linear, left, right };

struct PolarizationReport {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;  // Stokes parameters
  double ellipticity = 0;                 // chi in [0, pi/4]
  double orientation = 0;                 // psi in (-pi/2, pi/2]
  Handedness handedness = Handedness::linear;

  // state with this ellipse (unit power, global phase fixed)
  JonesVector reconstruct() const {
    const double chi =
        handedness == Handedness::right ? -ellipticity : ellipticity;
    JonesVector v{std::cos(chi), cplx(0, 1) * std::sin(chi)};
    const JonesMatrix rot = JonesMatrix::rotator(orientation);
    JonesVector out = rot.apply(v);
    const double scale = std::sqrt(s0);
    return {out.x * scale, out.y * scale};
  }
};

inline PolarizationReport analyze(const JonesVector& v) {
  const double s0 = v.power();
  if (s0 <= 0) throw input_error("analyze: zero state");
  PolarizationReport r;
  r.s0 = s0;
  r.s1 = std::norm(v.x) - std::norm(v.y);
  const cplx cross = std::conj(v.x) * v.y;
  r.s2 = 2.0 * cross.real();
  r.s3 = 2.0 * cross.imag();
  const double chi = 0.5 * std::asin(std::clamp(r.s3 / s0, -1.0, 1.0));
  r.ellipticity = std::abs(chi);
  r.orientation = 0.5 * std::atan2(r.s2, r.s1);
  if (std::abs(r.s3) / s0 < 1e-12)
    r.handedness = Handedness::linear;
  else
    r.handedness = chi > 0 ? Handedness::left : Handedness::right;
  return r;
}

}  // namespace atomlens
