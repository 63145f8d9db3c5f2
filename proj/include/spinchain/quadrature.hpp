#pragma once

#include <functional>

namespace spinchain::quadrature {

struct Result {
  double value;
  double error_estimate;
  int evaluations;
};

// Adaptive Gauss-Kronrod 7/15 with interval bisection.
Result integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-10, double abs_tol = 1e-14, int max_intervals = 4000);

}  // namespace spinchain::quadrature
