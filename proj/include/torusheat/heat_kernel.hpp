#pragma once

#include <vector>

namespace torusheat {

// Truncation policy and bookkeeping for every series evaluation. On
// success tail_bound <= abs_tol and terms_used counts the summand
// evaluations (summed over sub-series for composite closed forms).
struct SeriesTruncation {
  double abs_tol = 1e-13;
  long max_terms = 4000000;
  long terms_used = 0;    // written back
  double tail_bound = 0;  // written back
};

// Heat kernel G_r(a,b) for d/dt - d^2/dx^2 on the circumference-2 circle.
// Two independent representations:
//   image sum:  (4 pi r)^{-1/2} sum_n exp(-(a-b+2n)^2 / (4r))
//   Fourier:    1/2 + sum_{n>=1} cos(pi n (a-b)) exp(-pi^2 n^2 r)
// They agree by Poisson summation; the image sum converges fast for small
// r, the Fourier sum for large r.
double kernel_image_sum(double r, double a, double b,
                        SeriesTruncation* trunc = nullptr);
double kernel_fourier(double r, double a, double b,
                      SeriesTruncation* trunc = nullptr);

// Representation chosen automatically by r vs 1/pi^2.
double kernel_value(double r, double a, double b,
                    SeriesTruncation* trunc = nullptr);

struct SupBoundsRow {
  double t;
  double sup;       // sup_{x,y} G_t = G_t(0,0)
  double lower;     // max(t^{-1/2}, 1) / 4
  double upper;     // 2 max(t^{-1/2}, 1)
};

// Verifies lower <= sup <= upper for each t and that G_t decays
// monotonically in dist (so the sup really sits on the diagonal).
// Throws BoundViolation on the first offending t.
std::vector<SupBoundsRow> kernel_sup_bounds_check(
    const std::vector<double>& t_grid);

// Var H_i(t,x) = int_0^t G_{2s}(0,0) ds
//             = t/2 + sum_{n>=1} (1 - e^{-2 pi^2 n^2 t}) / (2 pi^2 n^2).
double variance_of_H(double t, SeriesTruncation* trunc = nullptr);

// Cov(H_i(t,x), H_i(s,y)) = min(s,t)/2
//   + sum_{n>=1} cos(pi n (x-y)) (e^{-pi^2 n^2 |t-s|} - e^{-pi^2 n^2 (t+s)})
//     / (2 pi^2 n^2).
double covariance_of_H(double t, double x, double s, double y,
                       SeriesTruncation* trunc = nullptr);

// E (H_i(t,x) - H_i(t,z))^2
//   = sum_{n>=1} (1 - e^{-2 pi^2 t n^2}) (1 - cos(pi n (x-z))) / (pi^2 n^2)
//   = int_0^t int [G_s(x,y) - G_s(z,y)]^2 dy ds.
double spatial_increment_energy(double t, double x, double z,
                                SeriesTruncation* trunc = nullptr);

// E (H_i(t,x) - H_i(r,x))^2 restricted to the shared-noise window [0,r]:
//   sum_{n>=1} (1 - e^{-2 pi^2 r n^2}) (1 - e^{-pi^2 (t-r) n^2})^2
//     / (2 pi^2 n^2),  0 < r < t (independent of x).
double temporal_increment_energy(double r, double t,
                                 SeriesTruncation* trunc = nullptr);

// Exact partial sums matching an n_modes-truncated field; these are the
// closed forms the spectral sampler must reproduce.
double variance_of_H_truncated(double t, int n_modes);
double covariance_of_H_truncated(double t, double x, double s, double y,
                                 int n_modes);

struct ParabolicWeight {
  double value;  // int_0^t ds int dy G_s(0,y)^2 ((t-s)^{q/2} + dist(y,0)^q)
  double ratio;  // value / t^{(1+q)/2}
};

// Nested adaptive quadrature; throws QuadratureFailure if tolerance is not
// met.
ParabolicWeight parabolic_weight_integral(double t, double q);

}  // namespace torusheat
