#include "plis/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace plis {

QuadRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
  QuadRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const int m = (n + 1) / 2;
  const double xm = 0.5 * (b + a), xl = 0.5 * (b - a);
  for (int i = 0; i < m; ++i) {
    // Chebyshev seed, then Newton on the Legendre recurrence.
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) < 1e-15) break;
    }
    r.nodes[i] = xm - xl * z;
    r.nodes[n - 1 - i] = xm + xl * z;
    r.weights[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
    r.weights[n - 1 - i] = r.weights[i];
  }
  return r;
}

QuadRule gauss_hermite_normal(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite_normal: n < 1");
  // Jacobi matrix for physicists' Hermite; off-diagonal beta_k = sqrt(k/2).
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double beta = std::sqrt(0.5 * k);
    J(k, k - 1) = beta;
    J(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  QuadRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Physicists' node t integrates against e^{-t^2}; rescale to the
    // standard normal by z = sqrt(2) t, and the weights (first eigenvector
    // components squared) already sum to 1 after dropping sqrt(pi).
    r.nodes[i] = std::sqrt(2.0) * es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    r.weights[i] = v * v;
  }
  return r;
}

namespace {

// Gauss-Kronrod 7/15 on [-1, 1] (QUADPACK dqk15 constants).
const double kKronrodNodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
const double kKronrodWeights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
const double kGaussWeights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct PanelResult {
  double integral;
  double error;
};

PanelResult gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double resg = fc * kGaussWeights[3];
  double resk = fc * kKronrodWeights[7];
  for (int j = 0; j < 7; ++j) {
    const double x = h * kKronrodNodes[j];
    const double fsum = f(c - x) + f(c + x);
    resk += kKronrodWeights[j] * fsum;
    if (j % 2 == 1) resg += kGaussWeights[j / 2] * fsum;
  }
  PanelResult r;
  r.integral = resk * h;
  const double diff = std::fabs((resk - resg) * h);
  // QUADPACK's sharpened estimate without the resasc scaling; plain
  // (200 diff)^{3/2} is conservative enough for our smooth integrands.
  r.error = diff;
  return r;
}

double adapt(const std::function<double(double)>& f, double a, double b,
             double panel_tol, double rel_tol, int depth, int max_depth,
             double whole_hint) {
  const PanelResult pr = gk15(f, a, b);
  if (depth >= max_depth) return pr.integral;
  const double tol =
      std::max(panel_tol, rel_tol * std::fabs(whole_hint));
  if (pr.error <= tol) return pr.integral;
  const double c = 0.5 * (a + b);
  const double left =
      adapt(f, a, c, 0.5 * panel_tol, rel_tol, depth + 1, max_depth,
            whole_hint);
  const double right =
      adapt(f, c, b, 0.5 * panel_tol, rel_tol, depth + 1, max_depth,
            whole_hint);
  return left + right;
}

}  // namespace

double adaptive_gk(const std::function<double(double)>& f, double a, double b,
                   double abs_tol, double rel_tol, int max_depth) {
  if (!(b > a)) throw std::invalid_argument("adaptive_gk: need b > a");
  const PanelResult first = gk15(f, a, b);
  return adapt(f, a, b, abs_tol, rel_tol, 0, max_depth, first.integral);
}

}  // namespace plis
