#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"
#include "util.hpp"

namespace atomlens {

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> std_errors;
  double residual_norm = 0;  // sqrt(sum of squared residuals)
  int iterations = 0;
  bool converged = false;
  bool extrapolated = false;  // fitted optimum lies outside the data range

  double operator[](const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return params[i];
    throw input_error("FitResult: unknown parameter " + name);
  }
  double error_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return std_errors[i];
    throw input_error("FitResult: unknown parameter " + name);
  }
};

using ResidualFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;
using JacobianFn =
    std::function<void(const std::vector<double>&, std::vector<std::vector<double>>&)>;
using ValidFn = std::function<bool(const std::vector<double>&)>;

struct LmOptions {
  int max_iterations = 200;
  double rtol = 1e-10;
  double lambda0 = 1e-3;
};

namespace detail {

// Solve A x = b for small dense systems (Gaussian elimination, partial pivot).
inline bool solve_dense(std::vector<std::vector<double>> a, std::vector<double> b,
                        std::vector<double>& x) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-300) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return true;
}

inline void numeric_jacobian(const ResidualFn& residual, const std::vector<double>& p,
                             const std::vector<double>& r0,
                             std::vector<std::vector<double>>& jac) {
  const std::size_t np = p.size(), nr = r0.size();
  std::vector<double> pp = p, r1(nr);
  for (std::size_t j = 0; j < np; ++j) {
    const double h = 1e-7 * std::max(1.0, std::abs(p[j]));
    pp[j] = p[j] + h;
    residual(pp, r1);
    for (std::size_t i = 0; i < nr; ++i) jac[i][j] = (r1[i] - r0[i]) / h;
    pp[j] = p[j];
  }
}

}  // namespace detail

// Damped Gauss-Newton (Levenberg-Marquardt) with an optional analytic
// Jacobian and an optional parameter-validity predicate (steps landing on
// invalid parameters are rejected like uphill steps).
inline FitResult levenberg_marquardt(const ResidualFn& residual, std::size_t n_residuals,
                                     std::vector<double> p, const JacobianFn& jacobian = {},
                                     const ValidFn& valid = {}, LmOptions opt = {}) {
  const std::size_t np = p.size();
  if (n_residuals < np) throw input_error("levenberg_marquardt: more parameters than residuals");
  if (valid && !valid(p)) throw input_error("levenberg_marquardt: invalid initial guess");

  std::vector<double> r(n_residuals), r_try(n_residuals);
  std::vector<std::vector<double>> jac(n_residuals, std::vector<double>(np));
  residual(p, r);
  double chi2 = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
  double lambda = opt.lambda0;

  FitResult out;
  int iter = 0;
  while (iter < opt.max_iterations) {
    ++iter;
    if (jacobian)
      jacobian(p, jac);
    else
      detail::numeric_jacobian(residual, p, r, jac);

    // normal equations JtJ + lambda diag(JtJ)
    std::vector<std::vector<double>> a(np, std::vector<double>(np, 0.0));
    std::vector<double> g(np, 0.0);
    for (std::size_t i = 0; i < n_residuals; ++i)
      for (std::size_t j = 0; j < np; ++j) {
        g[j] -= jac[i][j] * r[i];
        for (std::size_t k = j; k < np; ++k) a[j][k] += jac[i][j] * jac[i][k];
      }
    for (std::size_t j = 0; j < np; ++j)
      for (std::size_t k = 0; k < j; ++k) a[j][k] = a[k][j];

    bool accepted = false;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      auto damped = a;
      for (std::size_t j = 0; j < np; ++j)
        damped[j][j] += lambda * std::max(a[j][j], 1e-300);
      std::vector<double> step;
      if (!detail::solve_dense(damped, g, step)) {
        lambda *= 10.0;
        continue;
      }
      std::vector<double> p_try(np);
      for (std::size_t j = 0; j < np; ++j) p_try[j] = p[j] + step[j];
      if (valid && !valid(p_try)) {
        lambda *= 10.0;
        continue;
      }
      residual(p_try, r_try);
      const double chi2_try =
          std::inner_product(r_try.begin(), r_try.end(), r_try.begin(), 0.0);
      if (chi2_try <= chi2) {
        double max_rel_step = 0;
        for (std::size_t j = 0; j < np; ++j)
          max_rel_step = std::max(max_rel_step,
                                  std::abs(step[j]) / std::max(1e-12, std::abs(p_try[j])));
        const bool tiny_improvement = (chi2 - chi2_try) <= opt.rtol * (chi2_try + 1e-300);
        p = std::move(p_try);
        r = r_try;
        chi2 = chi2_try;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (tiny_improvement || max_rel_step < 1e-12 || chi2 < 1e-28) {
          out.converged = true;
        }
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted || out.converged) break;
  }

  out.params = p;
  out.iterations = iter;
  out.residual_norm = std::sqrt(chi2);

  // covariance from the undamped normal equations at the solution
  out.std_errors.assign(np, 0.0);
  if (n_residuals > np) {
    if (jacobian)
      jacobian(p, jac);
    else
      detail::numeric_jacobian(residual, p, r, jac);
    std::vector<std::vector<double>> a(np, std::vector<double>(np, 0.0));
    for (std::size_t i = 0; i < n_residuals; ++i)
      for (std::size_t j = 0; j < np; ++j)
        for (std::size_t k = j; k < np; ++k) a[j][k] += jac[i][j] * jac[i][k];
    for (std::size_t j = 0; j < np; ++j)
      for (std::size_t k = 0; k < j; ++k) a[j][k] = a[k][j];
    const double sigma2 = chi2 / static_cast<double>(n_residuals - np);
    for (std::size_t j = 0; j < np; ++j) {
      std::vector<double> e(np, 0.0), col;
      e[j] = 1.0;
      if (detail::solve_dense(a, e, col) && col[j] > 0)
        out.std_errors[j] = std::sqrt(col[j] * sigma2);
    }
  }
  return out;
}

// --- concrete models -------------------------------------------------------

// y = offset + amplitude * exp(-t / tau)
inline FitResult fit_exponential(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  if (n != y.size() || n < 5) throw input_error("fit_exponential: need >= 5 points");
  const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  if (*ymax_it - *ymin_it <= 0) throw input_error("fit_exponential: y is constant");
  const auto [tmin_it, tmax_it] = std::minmax_element(t.begin(), t.end());

  // initial guess: offset from the late-time tail, amplitude from the start
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return t[a] < t[b]; });
  double tail = 0;
  const std::size_t n_tail = std::max<std::size_t>(1, n / 5);
  for (std::size_t i = n - n_tail; i < n; ++i) tail += y[order[i]];
  tail /= n_tail;
  double a0 = y[order[0]] - tail;
  if (std::abs(a0) < 1e-12 * (*ymax_it - *ymin_it)) a0 = *ymax_it - *ymin_it;
  std::vector<double> p0 = {tail, a0, std::max(1e-12, (*tmax_it - *tmin_it) / 3.0)};

  auto resid = [&](const std::vector<double>& p, std::vector<double>& r) {
    for (std::size_t i = 0; i < n; ++i)
      r[i] = p[0] + p[1] * std::exp(-t[i] / p[2]) - y[i];
  };
  auto jac = [&](const std::vector<double>& p, std::vector<std::vector<double>>& j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::exp(-t[i] / p[2]);
      j[i][0] = 1.0;
      j[i][1] = e;
      j[i][2] = p[1] * e * t[i] / sqr(p[2]);
    }
  };
  auto valid = [](const std::vector<double>& p) { return p[2] > 0; };
  FitResult f = levenberg_marquardt(resid, n, p0, jac, valid);
  f.names = {"offset", "amplitude", "tau"};
  return f;
}

// y = floor + (A/2) * (1 + erf((x - center) / (sqrt(2) width)))
inline FitResult fit_erf(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw input_error("fit_erf: size mismatch");
  std::vector<double> xs = x;
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  if (xs.size() < 4) throw input_error("fit_erf: need >= 4 distinct x values");

  const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  const double span = xs.back() - xs.front();
  // center guess: x where y crosses the midpoint
  const double mid = 0.5 * (*ymin_it + *ymax_it);
  double c0 = xs.front() + 0.5 * span;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  for (std::size_t i = 1; i < n; ++i) {
    const double y0 = y[order[i - 1]], y1 = y[order[i]];
    if ((y0 - mid) * (y1 - mid) <= 0 && y1 != y0) {
      c0 = x[order[i - 1]] + (mid - y0) / (y1 - y0) * (x[order[i]] - x[order[i - 1]]);
      break;
    }
  }
  std::vector<double> p0 = {*ymin_it, *ymax_it - *ymin_it, c0, std::max(1e-12, span / 6.0)};

  auto resid = [&](const std::vector<double>& p, std::vector<double>& r) {
    for (std::size_t i = 0; i < n; ++i) {
      const double z = (x[i] - p[2]) / (std::sqrt(2.0) * p[3]);
      r[i] = p[0] + 0.5 * p[1] * (1.0 + std::erf(z)) - y[i];
    }
  };
  auto jac = [&](const std::vector<double>& p, std::vector<std::vector<double>>& j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double z = (x[i] - p[2]) / (std::sqrt(2.0) * p[3]);
      const double gauss = std::exp(-z * z);
      j[i][0] = 1.0;
      j[i][1] = 0.5 * (1.0 + std::erf(z));
      j[i][2] = -p[1] * gauss / (std::sqrt(two_pi) * p[3]);
      j[i][3] = -p[1] * z * gauss / (std::sqrt(pi) * p[3]);
    }
  };
  auto valid = [](const std::vector<double>& p) { return p[3] > 0; };
  FitResult f = levenberg_marquardt(resid, n, p0, jac, valid);
  f.names = {"floor", "amplitude", "center", "width"};
  f.extrapolated = f.params[2] < xs.front() || f.params[2] > xs.back();
  return f;
}

// Phenomenological bias-lifetime peak: Gaussian in B_z, fitted in log-tau
// space because the lifetimes span an order of magnitude.
struct BiasLifetimeModel {
  double tau_floor_s = 0;
  double tau_max_s = 0;
  double b_opt_t = 0;
  double width_t = 0;

  double tau(double b_t) const {
    const double g = std::exp(-0.5 * sqr((b_t - b_opt_t) / width_t));
    return tau_floor_s * std::pow(tau_max_s / tau_floor_s, g);
  }
};

inline FitResult fit_bias_lifetime(const std::vector<double>& b_t,
                                   const std::vector<double>& tau_s) {
  const std::size_t n = b_t.size();
  if (n != tau_s.size()) throw input_error("fit_bias_lifetime: size mismatch");
  std::vector<double> bs = b_t;
  std::sort(bs.begin(), bs.end());
  bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
  if (bs.size() < 4) throw input_error("fit_bias_lifetime: need >= 4 distinct B_z values");
  for (double tau : tau_s)
    if (tau <= 0) throw input_error("fit_bias_lifetime: lifetimes must be > 0");

  std::size_t peak = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (tau_s[i] > tau_s[peak]) peak = i;
  const double tau_min = *std::min_element(tau_s.begin(), tau_s.end());
  std::vector<double> p0 = {std::max(tau_min, 1e-6), std::max(tau_s[peak], 2e-6),
                            b_t[peak], std::max(1e-12, (bs.back() - bs.front()) / 4.0)};
  if (p0[1] <= p0[0]) p0[1] = 2.0 * p0[0];

  auto resid = [&](const std::vector<double>& p, std::vector<double>& r) {
    const double l0 = std::log(p[0]), l1 = std::log(p[1]);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = std::exp(-0.5 * sqr((b_t[i] - p[2]) / p[3]));
      r[i] = l0 + (l1 - l0) * g - std::log(tau_s[i]);
    }
  };
  auto jac = [&](const std::vector<double>& p, std::vector<std::vector<double>>& j) {
    const double l0 = std::log(p[0]), l1 = std::log(p[1]);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = b_t[i] - p[2];
      const double g = std::exp(-0.5 * sqr(d / p[3]));
      j[i][0] = (1.0 - g) / p[0];
      j[i][1] = g / p[1];
      j[i][2] = (l1 - l0) * g * d / sqr(p[3]);
      j[i][3] = (l1 - l0) * g * sqr(d) / (p[3] * sqr(p[3]));
    }
  };
  auto valid = [](const std::vector<double>& p) {
    return p[0] > 0 && p[1] > 0 && p[3] > 0;
  };
  FitResult f = levenberg_marquardt(resid, n, p0, jac, valid);
  f.names = {"tau_floor", "tau_max", "b_opt", "width"};
  f.extrapolated = f.params[2] < bs.front() || f.params[2] > bs.back();
  return f;
}

}  // namespace atomlens
