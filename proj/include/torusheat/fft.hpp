#pragma once

#include <complex>
#include <vector>

namespace torusheat {

// Thin wrapper over FFTW's 1-D real transforms with cached plans.
// Plans use FFTW_ESTIMATE only: measured plans may pick different
// algorithms from run to run, which would break byte-identical output.
//
// Conventions (J = size, even):
//   forward:  spec[k] = sum_j data[j] * exp(-2*pi*i*j*k/J), k = 0..J/2
//   inverse:  data[j] = spec[0] + 2*sum_{0<k<J/2} Re(spec[k] e^{2*pi*i*jk/J})
//                      + Re(spec[J/2]) * (-1)^j            (unnormalized)
class RealFft {
 public:
  explicit RealFft(int size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return size_; }

  // data: size_ reals; spec: size_/2+1 complex values. Both calls clobber
  // their input buffers (FFTW c2r destroys input).
  void forward(const double* data, std::complex<double>* spec);
  void inverse(const std::complex<double>* spec, double* data);

 private:
  int size_;
  void* plan_fwd_;
  void* plan_inv_;
  double* real_buf_;
  void* cplx_buf_;
};

}  // namespace torusheat
