#include "plis/posterior.hpp"

#include <cmath>
#include <limits>

namespace plis {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

LinearForwardModel::LinearForwardModel(Mat a) : a_(std::move(a)) {
  if (a_.rows() < 1 || a_.cols() < 1)
    throw std::invalid_argument("LinearForwardModel: empty matrix");
}

std::optional<Vec> LinearForwardModel::evaluate(const Vec& x) const {
  return a_ * x;
}

Vec LinearForwardModel::jacobian_transpose_apply(const Vec&,
                                                 const Vec& w) const {
  return a_.transpose() * w;
}

double GaussianLikelihood::log_density(const Vec& gx) const {
  return -(gx - y).squaredNorm() / (2.0 * sigma * sigma);
}

Vec GaussianLikelihood::grad(const Vec& gx) const {
  return -(gx - y) / (sigma * sigma);
}

ReferencePosterior::ReferencePosterior(
    std::shared_ptr<const ForwardModel> model, GaussianLikelihood likelihood,
    std::shared_ptr<const Transport> transport, bool truncate_infeasible)
    : model_(std::move(model)),
      likelihood_(std::move(likelihood)),
      transport_(std::move(transport)),
      truncate_infeasible_(truncate_infeasible) {
  if (!model_ || !transport_)
    throw std::invalid_argument("ReferencePosterior: null component");
  if (model_->dim_x() != transport_->dim())
    throw std::invalid_argument(
        "ReferencePosterior: model and transport dimension mismatch");
  if (likelihood_.y.size() != model_->dim_y())
    throw std::invalid_argument("ReferencePosterior: data dimension mismatch");
  if (!(likelihood_.sigma > 0.0))
    throw std::invalid_argument("ReferencePosterior: sigma must be > 0");
}

double ReferencePosterior::log_g(const Vec& z) const {
  return log_likelihood_x(transport_->forward(z));
}

double ReferencePosterior::log_likelihood_x(const Vec& x) const {
  const std::optional<Vec> gx = model_->evaluate(x);
  if (!gx) {
    if (!truncate_infeasible_)
      throw InfeasibleError("forward solve infeasible");
    return kNegInf;
  }
  return likelihood_.log_density(*gx);
}

double ReferencePosterior::log_g_with_grad(const Vec& z, Vec& grad) const {
  const ForwardBundle b = transport_->forward_bundle(z);
  const std::optional<Vec> gx = model_->evaluate(b.x);
  if (!gx) {
    if (!truncate_infeasible_)
      throw InfeasibleError("forward solve infeasible");
    return kNegInf;
  }
  const Vec w = likelihood_.grad(*gx);
  grad = apply_jacobian_transpose(b, model_->jacobian_transpose_apply(b.x, w));
  return likelihood_.log_density(*gx);
}

Vec ReferencePosterior::grad_log_g(const Vec& z) const {
  Vec grad;
  const double lg = log_g_with_grad(z, grad);
  if (lg == kNegInf)
    throw InfeasibleError("gradient requested at an infeasible point");
  return grad;
}

double ReferencePosterior::log_posterior(const Vec& z) const {
  const double lg = log_g(z);
  if (lg == kNegInf) return kNegInf;
  return lg - 0.5 * z.squaredNorm();
}

double ReferencePosterior::log_posterior_with_grad(const Vec& z,
                                                   Vec& grad) const {
  const double lg = log_g_with_grad(z, grad);
  if (lg == kNegInf) return kNegInf;
  grad -= z;
  return lg - 0.5 * z.squaredNorm();
}

}  // namespace plis
