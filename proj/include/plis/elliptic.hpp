#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "plis/posterior.hpp"
#include "plis/transport.hpp"

namespace plis {

double softplus(double x);
double softplus_inv(double k);
double sigmoid(double x);

// log-field values at the d element midpoints of (0,1) for a positive
// conductivity profile.
Vec field_from_profile(const std::function<double(double)>& kappa, int d);

// The piecewise-constant true conductivity of the 1D experiments.
double true_conductivity(double s);

struct EllipticData {
  Vec y;
  double sigma = 0.0;
  Vec x_true;
};

// 1D Poisson problem -d/ds(kappa du/ds) = f on (0,1), zero Dirichlet data,
// P1 elements on a uniform mesh of d = 2^level cells, kappa_i = softplus(x_i)
// per cell. Two point loads 1000 delta(s - 1/3) and 1000 delta(s - 2/3);
// observations of both solutions at the 31 points i/32, stacked (62 values).
class EllipticFem : public ForwardModel {
 public:
  explicit EllipticFem(int level);

  int level() const { return level_; }
  int elements() const { return d_; }
  int dim_x() const override { return d_; }
  int dim_y() const override { return 62; }

  // Empty when the stiffness solve is numerically infeasible (condition
  // estimate > 1e14 or pivot breakdown).
  std::optional<Vec> evaluate(const Vec& x) const override;
  Vec jacobian_transpose_apply(const Vec& x, const Vec& w) const override;

  // Interior nodal solution under one forcing (0 or 1); for verification
  // against the Green's function.
  std::optional<Vec> solve_nodal(const Vec& x, int forcing) const;

  // y = G(x_true) + noise with sigma = 0.1 x RMS of the noise-free data.
  // Deterministic given the seed; noise drawn on a dedicated stream.
  EllipticData generate_data(const std::function<double(double)>& kappa_true,
                             uint64_t seed) const;

 private:
  bool factor_and_solve(const Vec& kappa, Vec* rhs1, Vec* rhs2) const;

  int level_;
  int d_;
  double h_;
  Vec load1_, load2_;  // hat-function evaluations at the Dirac locations
  // Each observation row touches at most two interior nodes.
  struct ObsRow {
    int node0;
    double w0;
    int node1;
    double w1;
  };
  std::vector<ObsRow> obs_;
};

// x-field = Psi c with independent exponential-power coefficients c.
// Columns of Psi: the constant scaling function, then Haar wavelets by
// scale then shift, L2((0,1))-normalized (so Psi^T Psi = d I). level_decay
// s scales level-j columns by 2^{-j s}; 0 reproduces the plain iid prior.
std::shared_ptr<const Transport> make_besov_transport(int d, double p,
                                                      double lambda,
                                                      double level_decay = 0.0);
std::shared_ptr<const Transport> make_besov_transport(
    int d, const MarginalPrior& marginal, double level_decay = 0.0);
Mat haar_matrix(int d);

// First-order difference prior: increments (x_i - x_{i-1})/h independent
// Cauchy(gamma), realized as x = L z with L = h x lower-triangular ones.
std::shared_ptr<const Transport> make_difference_cauchy_transport(
    int d, double gamma);

}  // namespace plis
