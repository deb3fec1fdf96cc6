#pragma once
// Thin FFTW wrapper: real <-> half-complex transforms on N-d boxes.
#include <fftw3.h>

#include <complex>
#include <memory>
#include <mutex>
#include <vector>

#include "errors.hpp"

namespace fkirch {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
struct FftwFree {
  void operator()(T* p) const { fftw_free(p); }
};
using RealBuf = std::unique_ptr<double[], FftwFree<double>>;
using CplxBuf = std::unique_ptr<fftw_complex[], FftwFree<fftw_complex>>;

// Plans are made once with FFTW_ESTIMATE (deterministic) and executed through the
// new-array interface, so one object can serve concurrent callers.
class RealFft {
 public:
  RealFft(int N, int m) : N_(N), m_(m) {
    n_real_ = 1;
    for (int d = 0; d < N; ++d) n_real_ *= std::size_t(m);
    n_cplx_ = n_real_ / std::size_t(m) * std::size_t(m / 2 + 1);
    int dims[3] = {m, m, m};
    RealBuf r = real_buffer();
    CplxBuf c = cplx_buffer();
    std::lock_guard<std::mutex> lk(fftw_planner_mutex());
    fwd_ = fftw_plan_dft_r2c(N, dims, r.get(), c.get(), FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r(N, dims, c.get(), r.get(), FFTW_ESTIMATE);
    if (!fwd_ || !bwd_) throw NumericalFailure("FFTW planning failed");
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    std::lock_guard<std::mutex> lk(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  std::size_t real_size() const { return n_real_; }
  std::size_t cplx_size() const { return n_cplx_; }
  int m() const { return m_; }
  int dim() const { return N_; }

  RealBuf real_buffer() const {
    return RealBuf(static_cast<double*>(fftw_malloc(sizeof(double) * n_real_)));
  }
  CplxBuf cplx_buffer() const {
    return CplxBuf(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_cplx_)));
  }
  // in is preserved; out has n_cplx entries
  void forward(const double* in, fftw_complex* out) const {
    RealBuf tmp = real_buffer();
    std::copy(in, in + n_real_, tmp.get());
    fftw_execute_dft_r2c(fwd_, tmp.get(), out);
  }
  // destroys in (which must come from cplx_buffer); unnormalized
  void backward(fftw_complex* in, double* out) const {
    RealBuf tmp = real_buffer();
    fftw_execute_dft_c2r(bwd_, in, tmp.get());
    std::copy(tmp.get(), tmp.get() + n_real_, out);
  }

 private:
  int N_, m_;
  std::size_t n_real_ = 0, n_cplx_ = 0;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

}  // namespace fkirch
