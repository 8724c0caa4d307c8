#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "atomlens/fitting.hpp"
#include "atomlens/rng.hpp"

using namespace atomlens;

namespace {
bool close(double a, double b, double tol) { return std::abs(a - b) < tol; }

double erf_model(double x, double floor, double amp, double center, double width) {
  return floor + 0.5 * amp * (1.0 + std::erf((x - center) / (std::sqrt(2.0) * width)));
}
}  // namespace

TEST_CASE("exponential fit: exact recovery on clean data", "[fitting]") {
  std::vector<double> t, y;
  for (int i = 0; i < 40; ++i) {
    t.push_back(0.1 * i);
    y.push_back(1.0 + 10.0 * std::exp(-t.back() / 0.9));
  }
  const FitResult f = fit_exponential(t, y);
  REQUIRE(f.converged);
  REQUIRE(close(f["offset"], 1.0, 1e-8));
  REQUIRE(close(f["amplitude"], 10.0, 1e-8));
  REQUIRE(close(f["tau"], 0.9, 1e-8));
  REQUIRE(f.residual_norm < 1e-8);
  REQUIRE(f.iterations < 100);

  REQUIRE_THROWS_AS(fit_exponential({1, 2, 3}, {1, 2, 3}), input_error);
  REQUIRE_THROWS_AS(fit_exponential(std::vector<double>{1, 2, 3, 4, 5},
                                    std::vector<double>{2, 2, 2, 2, 2}),
                    input_error);
}

TEST_CASE("erf fit: exact recovery and extrapolation flag", "[fitting]") {
  std::vector<double> x, y;
  for (int i = 0; i <= 10; ++i) {
    x.push_back(10.0 + i);
    y.push_back(erf_model(x.back(), 0.2, 0.6, 13.9, 1.0));
  }
  const FitResult f = fit_erf(x, y);
  REQUIRE(f.converged);
  REQUIRE(close(f["floor"], 0.2, 1e-8));
  REQUIRE(close(f["amplitude"], 0.6, 1e-8));
  REQUIRE(close(f["center"], 13.9, 1e-8));
  REQUIRE(close(f["width"], 1.0, 1e-8));
  REQUIRE_FALSE(f.extrapolated);

  REQUIRE_THROWS_AS(fit_erf({1, 1, 2, 2}, {0, 0, 1, 1}), input_error);
  REQUIRE_THROWS_AS(fit_erf({1, 2}, {0, 1, 2}), input_error);
}

TEST_CASE("erf fit: center recovered through noise", "[fitting]") {
  Rng rng(2025);
  std::vector<double> x, y;
  for (int i = 0; i <= 10; ++i) {
    x.push_back(10.0 + i);
    y.push_back(erf_model(x.back(), 0.2, 0.6, 13.9, 1.0) + 0.03 * rng.normal());
  }
  const FitResult f = fit_erf(x, y);
  REQUIRE(f.converged);
  REQUIRE(close(f["center"], 13.9, 0.5));
  REQUIRE(f.error_of("center") > 0.005);
  REQUIRE(f.error_of("center") < 1.0);
}

TEST_CASE("bias-lifetime fit: exact recovery on a clean peak", "[fitting]") {
  BiasLifetimeModel model;
  model.tau_floor_s = 0.1;
  model.tau_max_s = 1.0;
  model.b_opt_t = 0.596;
  model.width_t = 0.05;
  std::vector<double> b, tau;
  for (int i = -4; i <= 4; ++i) {
    b.push_back(model.b_opt_t + 0.025 * i);
    tau.push_back(model.tau(b.back()));
  }
  const FitResult f = fit_bias_lifetime(b, tau);
  REQUIRE(f.converged);
  REQUIRE(close(f["tau_floor"], 0.1, 1e-6));
  REQUIRE(close(f["tau_max"], 1.0, 1e-6));
  REQUIRE(close(f["b_opt"], 0.596, 1e-8));
  REQUIRE(close(f["width"], 0.05, 1e-6));
  REQUIRE_FALSE(f.extrapolated);

  // model endpoints behave: far from the peak the lifetime sits on the floor
  REQUIRE(close(model.tau(model.b_opt_t), 1.0, 1e-12));
  REQUIRE(close(model.tau(model.b_opt_t + 10.0), 0.1, 1e-9));

  REQUIRE_THROWS_AS(fit_bias_lifetime({1, 2, 3}, {1, 2, 3, 4}), input_error);
  REQUIRE_THROWS_AS(fit_bias_lifetime({1, 1, 2, 2}, {1, 1, 2, 2}), input_error);
  REQUIRE_THROWS_AS(fit_bias_lifetime({1, 2, 3, 4}, {1.0, 2.0, -1.0, 1.0}), input_error);
}

TEST_CASE("monotone data push the fitted peak outside the scan", "[fitting]") {
  // strictly rising lifetimes: the best Gaussian puts its maximum beyond the
  // sampled range, and the fit must say so
  std::vector<double> b, tau;
  for (int i = 0; i <= 4; ++i) {
    b.push_back(0.25 * i);
    tau.push_back(std::exp(b.back()));
  }
  const FitResult f = fit_bias_lifetime(b, tau);
  REQUIRE(f["b_opt"] > b.back());
  REQUIRE(f.extrapolated);
}

TEST_CASE("reported errors shrink with sample size", "[fitting]") {
  double se[3] = {0, 0, 0};
  const int mult[3] = {1, 4, 16};
  for (int s = 0; s < 3; ++s) {
    Rng rng(88 + s);
    std::vector<double> x, y;
    for (int rep = 0; rep < mult[s]; ++rep)
      for (int i = 0; i <= 10; ++i) {
        x.push_back(10.0 + i);
        y.push_back(erf_model(x.back(), 0.2, 0.6, 13.9, 1.0) + 0.03 * rng.normal());
      }
    const FitResult f = fit_erf(x, y);
    REQUIRE(f.converged);
    se[s] = f.error_of("center");
  }
  // quadrupling the data roughly halves the reported error
  REQUIRE(se[1] / se[0] > 0.3);
  REQUIRE(se[1] / se[0] < 0.8);
  REQUIRE(se[2] / se[1] > 0.3);
  REQUIRE(se[2] / se[1] < 0.8);
}

TEST_CASE("optimizer plumbing", "[fitting]") {
  // numeric and analytic Jacobians land on the same solution
  std::vector<double> t, y;
  for (int i = 0; i < 30; ++i) {
    t.push_back(0.2 * i);
    y.push_back(3.0 * std::exp(-t.back() / 1.7));
  }
  auto resid = [&](const std::vector<double>& p, std::vector<double>& r) {
    for (std::size_t i = 0; i < t.size(); ++i)
      r[i] = p[0] * std::exp(-t[i] / p[1]) - y[i];
  };
  auto valid = [](const std::vector<double>& p) { return p[1] > 0; };
  const FitResult numeric =
      levenberg_marquardt(resid, t.size(), {1.0, 1.0}, {}, valid);
  REQUIRE(numeric.converged);
  REQUIRE(close(numeric.params[0], 3.0, 1e-6));
  REQUIRE(close(numeric.params[1], 1.7, 1e-6));

  // an iteration budget of 1 cannot converge from a distant start
  LmOptions strict;
  strict.max_iterations = 1;
  const FitResult cut =
      levenberg_marquardt(resid, t.size(), {1.0, 1.0}, {}, valid, strict);
  REQUIRE_FALSE(cut.converged);
  REQUIRE(cut.iterations == 1);

  // guards
  REQUIRE_THROWS_AS(levenberg_marquardt(resid, 1, {1.0, 1.0}), input_error);
  REQUIRE_THROWS_AS(levenberg_marquardt(resid, t.size(), {1.0, -1.0}, {}, valid),
                    input_error);

  FitResult named;
  named.names = {"a"};
  named.params = {1.0};
  named.std_errors = {0.1};
  REQUIRE(named["a"] == 1.0);
  REQUIRE(named.error_of("a") == 0.1);
  REQUIRE_THROWS_AS(named["b"], input_error);
}
