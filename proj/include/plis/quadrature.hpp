#pragma once

#include <functional>
#include <vector>

namespace plis {

struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [a, b].
QuadRule gauss_legendre(int n, double a, double b);

// n-point rule for E[f(Z)] with Z standard normal: sum w_i f(z_i), weights
// summing to 1. Golub-Welsch on the Hermite Jacobi matrix.
QuadRule gauss_hermite_normal(int n);

// Adaptive Gauss-Kronrod 7/15 on (a, b). Recursively bisects until the
// embedded error estimate of each panel is below
//   max(abs_tol * |panel|/|a-b|, rel_tol * |integral so far|),
// or until max_depth. Integrand must be finite on the open interval;
// endpoints are never evaluated (all Kronrod nodes are interior).
double adaptive_gk(const std::function<double(double)>& f, double a, double b,
                   double abs_tol = 1e-12, double rel_tol = 1e-11,
                   int max_depth = 60);

}  // namespace plis
