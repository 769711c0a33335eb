#include "torusheat/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace torusheat {

namespace {
// FFTW's planner mutates global state; executing plans is thread-safe but
// creating/destroying them is not. Ensemble code builds one RealFft per
// replica inside parallel regions, so planning must be serialized.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(int size) : size_(size) {
  if (size < 4 || size % 2 != 0) {
    throw std::invalid_argument("RealFft: size must be even and >= 4");
  }
  std::lock_guard<std::mutex> lock(planner_mutex());
  real_buf_ = fftw_alloc_real(size_);
  cplx_buf_ = fftw_alloc_complex(size_ / 2 + 1);
  plan_fwd_ = fftw_plan_dft_r2c_1d(size_, real_buf_,
                                   static_cast<fftw_complex*>(cplx_buf_),
                                   FFTW_ESTIMATE);
  plan_inv_ = fftw_plan_dft_c2r_1d(size_, static_cast<fftw_complex*>(cplx_buf_),
                                   real_buf_, FFTW_ESTIMATE);
  if (!plan_fwd_ || !plan_inv_) throw std::runtime_error("RealFft: planner failed");
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
  fftw_free(real_buf_);
  fftw_free(cplx_buf_);
}

void RealFft::forward(const double* data, std::complex<double>* spec) {
  std::memcpy(real_buf_, data, sizeof(double) * size_);
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  std::memcpy(spec, cplx_buf_, sizeof(fftw_complex) * (size_ / 2 + 1));
}

void RealFft::inverse(const std::complex<double>* spec, double* data) {
  std::memcpy(cplx_buf_, spec, sizeof(fftw_complex) * (size_ / 2 + 1));
  fftw_execute(static_cast<fftw_plan>(plan_inv_));
  std::memcpy(data, real_buf_, sizeof(double) * size_);
}

}  // namespace torusheat
