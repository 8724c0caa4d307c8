#pragma once

#include <fftw3.h>

#include <mutex>
#include <vector>

#include "errors.hpp"
#include "util.hpp"

namespace atomlens {

// RAII wrapper for double-precision c2c 2-D transforms. FFTW_ESTIMATE keeps
// the algorithm choice (and therefore the output bits) stable run to run;
// the planner is not thread-safe, so plan create/destroy serializes on one
// mutex. Transform execution on the private buffer is safe per instance.
class Fft2D {
 public:
  explicit Fft2D(int n) : n_(n), buf_(static_cast<std::size_t>(n) * n) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    auto* ptr = reinterpret_cast<fftw_complex*>(buf_.data());
    fwd_ = fftw_plan_dft_2d(n, n, ptr, ptr, FFTW_FORWARD, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_2d(n, n, ptr, ptr, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!fwd_ || !inv_) throw convergence_error("Fft2D: plan creation failed");
  }
  ~Fft2D() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  Fft2D(const Fft2D&) = delete;
  Fft2D& operator=(const Fft2D&) = delete;

  void forward(std::vector<cplx>& a) { run(fwd_, a); }

  // inverse includes the 1/n^2 normalization
  void inverse(std::vector<cplx>& a) {
    run(inv_, a);
    const double s = 1.0 / (static_cast<double>(n_) * n_);
    for (auto& v : a) v *= s;
  }

 private:
  void run(fftw_plan plan, std::vector<cplx>& a) {
    if (a.size() != buf_.size()) throw input_error("Fft2D: size mismatch");
    std::copy(a.begin(), a.end(), buf_.begin());
    fftw_execute(plan);
    std::copy(buf_.begin(), buf_.end(), a.begin());
  }
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }
  int n_;
  std::vector<cplx> buf_;
  fftw_plan fwd_;
  fftw_plan inv_;
};

}  // namespace atomlens
