#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace torusheat {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;  // standard error of the slope estimate
};

// Ordinary least squares y = a + b x. slope_stderr is the classical
// sqrt(SSR/(n-2) / Sxx); with n == 2 the fit is exact and the error is 0.
inline LinearFit least_squares(const std::vector<double>& x,
                               const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) {
    throw std::invalid_argument("least_squares: need >= 2 matching points");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("least_squares: degenerate x");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = y[i] - (fit.intercept + fit.slope * x[i]);
      ssr += r * r;
    }
    fit.slope_stderr = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

}  // namespace torusheat
