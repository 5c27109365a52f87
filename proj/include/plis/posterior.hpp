#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <stdexcept>

#include "plis/transport.hpp"

namespace plis {

// A forward solve hit a numerically infeasible parameter (for example a
// near-singular stiffness matrix under a heavy-tailed draw).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual int dim_x() const = 0;
  virtual int dim_y() const = 0;
  // G(x); empty when the solve is infeasible.
  virtual std::optional<Vec> evaluate(const Vec& x) const = 0;
  // grad G(x)^T w by the adjoint method.
  virtual Vec jacobian_transpose_apply(const Vec& x, const Vec& w) const = 0;
};

// G(x) = A x, the linear test bed with closed-form posterior algebra.
class LinearForwardModel : public ForwardModel {
 public:
  explicit LinearForwardModel(Mat a);
  int dim_x() const override { return static_cast<int>(a_.cols()); }
  int dim_y() const override { return static_cast<int>(a_.rows()); }
  std::optional<Vec> evaluate(const Vec& x) const override;
  Vec jacobian_transpose_apply(const Vec& x, const Vec& w) const override;
  const Mat& matrix() const { return a_; }

 private:
  Mat a_;
};

// Unnormalized: log f = -|gx - y|^2 / (2 sigma^2), additive constant fixed
// to zero.
struct GaussianLikelihood {
  Vec y;
  double sigma = 1.0;

  double log_density(const Vec& gx) const;
  Vec grad(const Vec& gx) const;
};

// The pulled-back posterior phi^y(z) ~ g(z;y) phi0(z) with
// g(z;y) = f(T(z);y). All values unnormalized.
class ReferencePosterior {
 public:
  ReferencePosterior(std::shared_ptr<const ForwardModel> model,
                     GaussianLikelihood likelihood,
                     std::shared_ptr<const Transport> transport,
                     bool truncate_infeasible = true);

  int dim() const { return transport_->dim(); }

  // -inf when the forward solve is infeasible and truncation is on.
  double log_g(const Vec& z) const;
  // Returns log g and fills grad with grad_z log g = grad T(z)^T grad_x log f.
  // On -inf the gradient is left untouched.
  double log_g_with_grad(const Vec& z, Vec& grad) const;
  // Strict variant: throws InfeasibleError instead of returning -inf.
  Vec grad_log_g(const Vec& z) const;

  double log_posterior(const Vec& z) const;
  double log_posterior_with_grad(const Vec& z, Vec& grad) const;

  // log f(G(x); y) in original coordinates, same feasibility policy.
  double log_likelihood_x(const Vec& x) const;

  const Transport& transport() const { return *transport_; }
  std::shared_ptr<const Transport> transport_ptr() const { return transport_; }
  const ForwardModel& model() const { return *model_; }
  const GaussianLikelihood& likelihood() const { return likelihood_; }

 private:
  std::shared_ptr<const ForwardModel> model_;
  GaussianLikelihood likelihood_;
  std::shared_ptr<const Transport> transport_;
  bool truncate_infeasible_;
};

}  // namespace plis
