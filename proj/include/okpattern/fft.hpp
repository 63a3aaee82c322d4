#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>

#include "torus_field.hpp"

namespace okpattern {

namespace detail {
// FFTW's planner is not re-entrant.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Real-to-half-complex transform pair on one grid.  Buffers come from
// fftw_malloc so alignment (and therefore the codelets FFTW picks) never
// varies between runs; plans use FFTW_ESTIMATE for the same reason.
class RealFft {
 public:
  using cplx = std::complex<double>;

  explicit RealFft(const GridSpec& g) : spec_(g) {
    g.validate();
    n_real_ = g.size();
    nc_last_ = g.n[g.dim - 1] / 2 + 1;
    n_cplx_ = n_real_ / g.n[g.dim - 1] * nc_last_;
    real_ = fftw_alloc_real(n_real_);
    cplx_ = fftw_alloc_complex(n_cplx_);
    int dims[3];
    for (int a = 0; a < g.dim; ++a) dims[a] = static_cast<int>(g.n[a]);
    std::lock_guard lock(detail::planner_mutex());
    fwd_ = fftw_plan_dft_r2c(g.dim, dims, real_, cplx_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r(g.dim, dims, cplx_, real_, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    {
      std::lock_guard lock(detail::planner_mutex());
      fftw_destroy_plan(fwd_);
      fftw_destroy_plan(bwd_);
    }
    fftw_free(real_);
    fftw_free(cplx_);
  }

  const GridSpec& spec() const { return spec_; }
  std::size_t real_size() const { return n_real_; }
  std::size_t complex_size() const { return n_cplx_; }
  std::size_t last_half() const { return nc_last_; }

  // Unnormalised forward transform; result stays in the complex buffer.
  void forward(const std::vector<double>& in) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(fwd_);
  }
  // Backward transform of the complex buffer, scaled by 1/N.
  void backward(std::vector<double>& out) {
    fftw_execute(bwd_);
    out.resize(n_real_);
    const double s = 1.0 / static_cast<double>(n_real_);
    for (std::size_t i = 0; i < n_real_; ++i) out[i] = real_[i] * s;
  }

  cplx* coeffs() { return reinterpret_cast<cplx*>(cplx_); }
  const cplx* coeffs() const { return reinterpret_cast<const cplx*>(cplx_); }

  // Signed integer frequency of complex index idx along every axis.  The last
  // axis runs over 0..n/2, the others over -n/2..n/2-1.
  std::array<long, 3> frequency(std::size_t idx) const {
    std::array<long, 3> xi{0, 0, 0};
    const int d = spec_.dim;
    std::size_t rest = idx;
    xi[d - 1] = static_cast<long>(rest % nc_last_);
    rest /= nc_last_;
    for (int a = d - 2; a >= 0; --a) {
      long n = static_cast<long>(spec_.n[a]);
      long i = static_cast<long>(rest % spec_.n[a]);
      rest /= spec_.n[a];
      xi[a] = i < n / 2 ? i : i - n;
    }
    return xi;
  }

  // Multiplicity of a half-spectrum entry in the full spectrum.
  double parseval_weight(std::size_t idx) const {
    std::size_t j = idx % nc_last_;
    std::size_t nl = spec_.n[spec_.dim - 1];
    return (j == 0 || 2 * j == nl) ? 1.0 : 2.0;
  }

  bool is_nyquist(long xi, int axis) const { return 2 * std::abs(xi) == static_cast<long>(spec_.n[axis]); }

 private:
  GridSpec spec_;
  std::size_t n_real_ = 0, n_cplx_ = 0, nc_last_ = 0;
  double* real_ = nullptr;
  fftw_complex* cplx_ = nullptr;
  fftw_plan fwd_{}, bwd_{};
};

}  // namespace okpattern

namespace okpattern {

// In-place unnormalised forward DFT of length n on complex data.
class ComplexFft1d {
 public:
  using cplx = std::complex<double>;

  explicit ComplexFft1d(std::size_t n) : n_(n) {
    buf_ = fftw_alloc_complex(n);
    std::lock_guard lock(detail::planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  ComplexFft1d(const ComplexFft1d&) = delete;
  ComplexFft1d& operator=(const ComplexFft1d&) = delete;
  ~ComplexFft1d() {
    {
      std::lock_guard lock(detail::planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(buf_);
  }

  std::size_t size() const { return n_; }
  cplx* data() { return reinterpret_cast<cplx*>(buf_); }
  void forward() { fftw_execute(plan_); }

 private:
  std::size_t n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan plan_{};
};

}  // namespace okpattern
