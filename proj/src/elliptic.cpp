#include "plis/elliptic.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "plis/rng.hpp"

namespace plis {
namespace {

constexpr double kCondLimit = 1e14;
constexpr uint64_t kDataNoiseStream = 0x64617461;  // noise lives on its own stream
constexpr double kLoadScale = 1000.0;

// Hat-function weights of a point s in (0,1) on the interior nodes of a
// uniform mesh with d cells. At most two nodes are touched; a node index of
// -1 marks a contribution absorbed by the boundary.
void hat_weights(double s, int d, int* n0, double* w0, int* n1, double* w1) {
  const double t = s * d;
  int e = static_cast<int>(std::floor(t));
  if (e < 0) e = 0;
  if (e > d - 1) e = d - 1;
  const double frac = t - e;
  // Interior nodes are 1..d-1; element e has endpoints e and e+1.
  *n0 = (e >= 1 && e <= d - 1) ? e - 1 : -1;
  *w0 = 1.0 - frac;
  *n1 = (e + 1 <= d - 1) ? e : -1;
  *w1 = frac;
}

}  // namespace

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inv(double k) {
  if (!(k > 0.0)) throw std::invalid_argument("softplus_inv: need k > 0");
  if (k > 30.0) return k;
  return std::log(std::expm1(k));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec field_from_profile(const std::function<double(double)>& kappa, int d) {
  Vec x(d);
  for (int e = 0; e < d; ++e) {
    const double s = (e + 0.5) / d;
    x[e] = softplus_inv(kappa(s));
  }
  return x;
}

double true_conductivity(double s) {
  if (s < 0.2) return 5.0;
  if (s < 0.5) return 1.0;
  if (s < 0.75) return 3.0;
  return 5.0;
}

EllipticFem::EllipticFem(int level) : level_(level) {
  if (level < 1 || level > 24) {
    throw std::invalid_argument("EllipticFem: level out of range");
  }
  d_ = 1 << level;
  h_ = 1.0 / d_;
  const int n = d_ - 1;

  load1_ = Vec::Zero(n);
  load2_ = Vec::Zero(n);
  int n0, n1;
  double w0, w1;
  hat_weights(1.0 / 3.0, d_, &n0, &w0, &n1, &w1);
  if (n0 >= 0) load1_[n0] = kLoadScale * w0;
  if (n1 >= 0) load1_[n1] = kLoadScale * w1;
  hat_weights(2.0 / 3.0, d_, &n0, &w0, &n1, &w1);
  if (n0 >= 0) load2_[n0] = kLoadScale * w0;
  if (n1 >= 0) load2_[n1] = kLoadScale * w1;

  obs_.resize(31);
  for (int i = 1; i <= 31; ++i) {
    ObsRow row;
    hat_weights(i / 32.0, d_, &row.node0, &row.w0, &row.node1, &row.w1);
    obs_[i - 1] = row;
  }
}

// Thomas elimination of the tridiagonal stiffness system, shared by both
// right-hand sides. Returns false on pivot breakdown or when the condition
// estimate (Gershgorin row bound over smallest pivot) exceeds kCondLimit.
bool EllipticFem::factor_and_solve(const Vec& kappa, Vec* rhs1,
                                   Vec* rhs2) const {
  const int n = d_ - 1;
  Vec diag(n);
  Vec off(n > 1 ? n - 1 : 0);
  double bnorm = 0.0;
  for (int i = 0; i < n; ++i) {
    diag[i] = kappa[i] + kappa[i + 1];
    double row = diag[i];
    if (i > 0) row += kappa[i];
    if (i + 1 < n) {
      off[i] = -kappa[i + 1];
      row += kappa[i + 1];
    }
    bnorm = std::max(bnorm, row);
  }
  if (!std::isfinite(bnorm)) return false;

  Vec cfac(n > 1 ? n - 1 : 0);
  double minpiv = std::numeric_limits<double>::infinity();
  double piv = 0.0;
  for (int i = 0; i < n; ++i) {
    piv = (i == 0) ? diag[0] : diag[i] - off[i - 1] * cfac[i - 1];
    if (!(piv > 0.0) || !std::isfinite(piv)) return false;
    minpiv = std::min(minpiv, piv);
    if (i + 1 < n) cfac[i] = off[i] / piv;
    if (i == 0) {
      (*rhs1)[i] /= piv;
      if (rhs2 != nullptr) (*rhs2)[i] /= piv;
    } else {
      const double sub = off[i - 1];
      (*rhs1)[i] = ((*rhs1)[i] - sub * (*rhs1)[i - 1]) / piv;
      if (rhs2 != nullptr) {
        (*rhs2)[i] = ((*rhs2)[i] - sub * (*rhs2)[i - 1]) / piv;
      }
    }
  }
  if (bnorm / minpiv > kCondLimit) return false;
  for (int i = n - 2; i >= 0; --i) {
    (*rhs1)[i] -= cfac[i] * (*rhs1)[i + 1];
    if (rhs2 != nullptr) (*rhs2)[i] -= cfac[i] * (*rhs2)[i + 1];
  }
  if (!rhs1->allFinite()) return false;
  if (rhs2 != nullptr && !rhs2->allFinite()) return false;
  return true;
}

std::optional<Vec> EllipticFem::evaluate(const Vec& x) const {
  if (x.size() != d_) throw std::invalid_argument("EllipticFem: bad x size");
  Vec kappa(d_);
  for (int e = 0; e < d_; ++e) kappa[e] = softplus(x[e]);
  Vec u1 = h_ * load1_;
  Vec u2 = h_ * load2_;
  if (!factor_and_solve(kappa, &u1, &u2)) return std::nullopt;
  Vec y(62);
  for (int k = 0; k < 31; ++k) {
    const ObsRow& r = obs_[k];
    double v1 = 0.0, v2 = 0.0;
    if (r.node0 >= 0) {
      v1 += r.w0 * u1[r.node0];
      v2 += r.w0 * u2[r.node0];
    }
    if (r.node1 >= 0) {
      v1 += r.w1 * u1[r.node1];
      v2 += r.w1 * u2[r.node1];
    }
    y[k] = v1;
    y[31 + k] = v2;
  }
  return y;
}

std::optional<Vec> EllipticFem::solve_nodal(const Vec& x, int forcing) const {
  if (x.size() != d_) throw std::invalid_argument("EllipticFem: bad x size");
  if (forcing != 0 && forcing != 1) {
    throw std::invalid_argument("EllipticFem: forcing must be 0 or 1");
  }
  Vec kappa(d_);
  for (int e = 0; e < d_; ++e) kappa[e] = softplus(x[e]);
  Vec u = h_ * (forcing == 0 ? load1_ : load2_);
  if (!factor_and_solve(kappa, &u, nullptr)) return std::nullopt;
  return u;
}

Vec EllipticFem::jacobian_transpose_apply(const Vec& x, const Vec& w) const {
  if (x.size() != d_) throw std::invalid_argument("EllipticFem: bad x size");
  if (w.size() != 62) throw std::invalid_argument("EllipticFem: bad w size");
  const int n = d_ - 1;
  Vec kappa(d_);
  for (int e = 0; e < d_; ++e) kappa[e] = softplus(x[e]);

  Vec u1 = h_ * load1_;
  Vec u2 = h_ * load2_;
  if (!factor_and_solve(kappa, &u1, &u2)) {
    throw InfeasibleError("EllipticFem: gradient at infeasible point");
  }
  Vec p1 = Vec::Zero(n);
  Vec p2 = Vec::Zero(n);
  for (int k = 0; k < 31; ++k) {
    const ObsRow& r = obs_[k];
    if (r.node0 >= 0) {
      p1[r.node0] += r.w0 * w[k];
      p2[r.node0] += r.w0 * w[31 + k];
    }
    if (r.node1 >= 0) {
      p1[r.node1] += r.w1 * w[k];
      p2[r.node1] += r.w1 * w[31 + k];
    }
  }
  if (!factor_and_solve(kappa, &p1, &p2)) {
    throw InfeasibleError("EllipticFem: adjoint solve failed");
  }

  // d(w . y)/d kappa_e = -(du_e)(dp_e) summed over forcings, where du, dp
  // are nodal differences across element e (boundary values are zero).
  Vec grad(d_);
  for (int e = 0; e < d_; ++e) {
    const double ul1 = (e >= 1) ? u1[e - 1] : 0.0;
    const double ur1 = (e <= n - 1) ? u1[e] : 0.0;
    const double ul2 = (e >= 1) ? u2[e - 1] : 0.0;
    const double ur2 = (e <= n - 1) ? u2[e] : 0.0;
    const double pl1 = (e >= 1) ? p1[e - 1] : 0.0;
    const double pr1 = (e <= n - 1) ? p1[e] : 0.0;
    const double pl2 = (e >= 1) ? p2[e - 1] : 0.0;
    const double pr2 = (e <= n - 1) ? p2[e] : 0.0;
    const double dk =
        -((ur1 - ul1) * (pr1 - pl1) + (ur2 - ul2) * (pr2 - pl2));
    grad[e] = dk * sigmoid(x[e]);
  }
  return grad;
}

EllipticData EllipticFem::generate_data(
    const std::function<double(double)>& kappa_true, uint64_t seed) const {
  EllipticData data;
  data.x_true = field_from_profile(kappa_true, d_);
  const std::optional<Vec> clean = evaluate(data.x_true);
  if (!clean) {
    throw std::runtime_error("generate_data: true field is infeasible");
  }
  const double rms = std::sqrt(clean->squaredNorm() / clean->size());
  data.sigma = 0.1 * rms;
  Philox rng(seed, kDataNoiseStream);
  data.y = *clean;
  for (int i = 0; i < data.y.size(); ++i) data.y[i] += data.sigma * rng.gaussian();
  return data;
}

Mat haar_matrix(int d) {
  if (d < 1 || (d & (d - 1)) != 0) {
    throw std::invalid_argument("haar_matrix: d must be a power of two");
  }
  Mat psi = Mat::Zero(d, d);
  psi.col(0).setOnes();
  int col = 1;
  for (int j = 0; (1 << j) < d; ++j) {
    const int blocks = 1 << j;
    const int width = d / blocks;
    const double amp = std::exp2(0.5 * j);
    for (int k = 0; k < blocks; ++k, ++col) {
      const int start = k * width;
      for (int t = 0; t < width / 2; ++t) {
        psi(start + t, col) = amp;
        psi(start + width / 2 + t, col) = -amp;
      }
    }
  }
  return psi;
}

std::shared_ptr<const Transport> make_besov_transport(
    int d, const MarginalPrior& marginal, double level_decay) {
  Mat psi = haar_matrix(d);
  if (level_decay != 0.0) {
    int col = 1;
    for (int j = 0; (1 << j) < d; ++j) {
      const double scale = std::exp2(-level_decay * j);
      for (int k = 0; k < (1 << j); ++k, ++col) psi.col(col) *= scale;
    }
  }
  return std::make_shared<LinearlyCoupledTransport>(
      DiagonalTransport::iid(marginal, d), std::move(psi));
}

std::shared_ptr<const Transport> make_besov_transport(int d, double p,
                                                      double lambda,
                                                      double level_decay) {
  return make_besov_transport(d, MarginalPrior::exp_power(p, lambda),
                              level_decay);
}

std::shared_ptr<const Transport> make_difference_cauchy_transport(
    int d, double gamma) {
  const double h = 1.0 / d;
  Mat ell = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) ell(i, j) = h;
  }
  return std::make_shared<LinearlyCoupledTransport>(
      DiagonalTransport::iid(MarginalPrior::cauchy(gamma), d), std::move(ell));
}

}  // namespace plis
