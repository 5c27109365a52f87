#pragma once

#include <Eigen/Dense>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "plis/marginal.hpp"

namespace plis {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Thrown when a reference coordinate is pushed past the representable
// Gaussian tail (|z| > 38, where log Phi saturates even in log form) or the
// composed value overflows (Cauchy-like tails overflow a little earlier).
class SaturationError : public std::runtime_error {
 public:
  SaturationError(int component, const std::string& marginal, double z);
  int component;
};

// Precomputed pieces of one forward evaluation: the image x = T(z), the
// log-det of the Jacobian, and the factors needed to apply its transpose
// without re-evaluating the transport.
struct ForwardBundle {
  Vec x;
  double log_det = 0.0;
  Vec diag_deriv;          // componentwise T'_i of the diagonal stage
  const Mat* coupling = nullptr;   // optional linear stage L (x = L x_diag)
  Vec outer_deriv;         // optional post-composition factor (perturbation)
};

// w -> grad T(z)^T w using a bundle from forward_bundle.
Vec apply_jacobian_transpose(const ForwardBundle& b, const Vec& w);

class Transport {
 public:
  virtual ~Transport() = default;
  virtual int dim() const = 0;

  virtual Vec forward(const Vec& z) const = 0;
  virtual Vec inverse(const Vec& x) const = 0;
  virtual double log_det_jacobian(const Vec& z) const = 0;
  virtual ForwardBundle forward_bundle(const Vec& z) const = 0;
  virtual TailClass tail_class() const = 0;

  Vec jacobian_transpose_apply(const Vec& z, const Vec& v) const;

  // log pi^0(x) of the pushforward prior, with normalized reference
  // density: phi0(T^{-1}(x)) / det grad T. Subclasses override when the
  // marginals give it directly.
  virtual double log_prior_density(const Vec& x) const;
};

class DiagonalTransport : public Transport {
 public:
  explicit DiagonalTransport(std::vector<MarginalPrior> marginals);
  static DiagonalTransport iid(const MarginalPrior& m, int d);

  int dim() const override { return static_cast<int>(m_.size()); }
  Vec forward(const Vec& z) const override;
  Vec inverse(const Vec& x) const override;
  double log_det_jacobian(const Vec& z) const override;
  ForwardBundle forward_bundle(const Vec& z) const override;
  TailClass tail_class() const override;
  double log_prior_density(const Vec& x) const override;

  // Componentwise (log T'_1(z_1), ..., log T'_d(z_d)).
  Vec log_derivative(const Vec& z) const;

  const MarginalPrior& marginal(int i) const { return m_[i]; }

 private:
  std::vector<MarginalPrior> m_;
};

// z -> L T_diag(z). Realizes couplings like the first-order-difference
// Cauchy field X = D^{-1} Z and the Haar synthesis X = Psi c.
class LinearlyCoupledTransport : public Transport {
 public:
  LinearlyCoupledTransport(DiagonalTransport diagonal, Mat coupling);

  int dim() const override { return diag_.dim(); }
  Vec forward(const Vec& z) const override;
  Vec inverse(const Vec& x) const override;
  double log_det_jacobian(const Vec& z) const override;
  ForwardBundle forward_bundle(const Vec& z) const override;
  TailClass tail_class() const override { return diag_.tail_class(); }
  double log_prior_density(const Vec& x) const override;

  const DiagonalTransport& diagonal() const { return diag_; }
  const Mat& coupling() const { return L_; }
  double log_abs_det_coupling() const { return log_det_L_; }

 private:
  DiagonalTransport diag_;
  Mat L_;
  Eigen::PartialPivLU<Mat> lu_;
  double log_det_L_;
};

// T_hat = T + eps tanh(T), a bounded perturbation with sup distance at most
// |eps|, for the approximate-transport and delayed-acceptance studies.
// eps > -1 keeps it strictly increasing.
class PerturbedTransport : public Transport {
 public:
  PerturbedTransport(std::shared_ptr<const Transport> base, double eps);

  int dim() const override { return base_->dim(); }
  Vec forward(const Vec& z) const override;
  Vec inverse(const Vec& x) const override;
  double log_det_jacobian(const Vec& z) const override;
  ForwardBundle forward_bundle(const Vec& z) const override;
  TailClass tail_class() const override { return base_->tail_class(); }

 private:
  std::shared_ptr<const Transport> base_;
  double eps_;
};

struct AsymptoticRatio {
  double ratio_T;
  double ratio_Tprime;
};

// T(z)/T_asym(z) and T'(z)/T'_asym(z) against the closed-form tail shapes;
// z > 0. Throws for NumericCdf.
AsymptoticRatio asymptotic_ratio(const MarginalPrior& m, double z);

}  // namespace plis
