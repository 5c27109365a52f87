#include "plis/transport.hpp"

#include <cmath>
#include <sstream>

#include "plis/special.hpp"

namespace plis {

namespace {

// Beyond this the Gaussian tail probability is below the smallest double
// and every composition degenerates.
constexpr double kZMax = 38.0;

std::string saturation_message(int component, const std::string& marginal,
                               double z) {
  std::ostringstream os;
  os << "transport saturated in component " << component << " (" << marginal
     << ") at z = " << z;
  return os.str();
}

double stable_sech2(double y) {
  const double t = std::exp(-2.0 * std::abs(y));
  const double q = 1.0 + t;
  return 4.0 * t / (q * q);
}

}  // namespace

SaturationError::SaturationError(int component_, const std::string& marginal,
                                 double z)
    : std::runtime_error(saturation_message(component_, marginal, z)),
      component(component_) {}

Vec apply_jacobian_transpose(const ForwardBundle& b, const Vec& w) {
  Vec v = w;
  if (b.outer_deriv.size() > 0) v = b.outer_deriv.cwiseProduct(v);
  if (b.coupling != nullptr) v = b.coupling->transpose() * v;
  return b.diag_deriv.cwiseProduct(v);
}

Vec Transport::jacobian_transpose_apply(const Vec& z, const Vec& v) const {
  return apply_jacobian_transpose(forward_bundle(z), v);
}

double Transport::log_prior_density(const Vec& x) const {
  const Vec z = inverse(x);
  double lp = 0.0;
  for (int i = 0; i < z.size(); ++i) lp += log_normal_pdf(z[i]);
  return lp - log_det_jacobian(z);
}

DiagonalTransport::DiagonalTransport(std::vector<MarginalPrior> marginals)
    : m_(std::move(marginals)) {
  if (m_.empty())
    throw std::invalid_argument("DiagonalTransport: no marginals");
}

DiagonalTransport DiagonalTransport::iid(const MarginalPrior& m, int d) {
  if (d < 1) throw std::invalid_argument("DiagonalTransport: dim < 1");
  return DiagonalTransport(std::vector<MarginalPrior>(d, m));
}

Vec DiagonalTransport::forward(const Vec& z) const {
  const int d = dim();
  if (z.size() != d) throw std::invalid_argument("forward: dimension mismatch");
  Vec x(d);
  for (int i = 0; i < d; ++i) {
    if (!(std::abs(z[i]) <= kZMax))
      throw SaturationError(i, m_[i].name(), z[i]);
    double ld;
    m_[i].transport_eval(z[i], &x[i], &ld);
    if (!std::isfinite(x[i]) || !std::isfinite(ld))
      throw SaturationError(i, m_[i].name(), z[i]);
  }
  return x;
}

Vec DiagonalTransport::inverse(const Vec& x) const {
  const int d = dim();
  if (x.size() != d) throw std::invalid_argument("inverse: dimension mismatch");
  Vec z(d);
  for (int i = 0; i < d; ++i) {
    if (!std::isfinite(x[i]))
      throw std::invalid_argument("inverse: non-finite input");
    z[i] = m_[i].transport_inv(x[i]);
  }
  return z;
}

double DiagonalTransport::log_det_jacobian(const Vec& z) const {
  const int d = dim();
  if (z.size() != d)
    throw std::invalid_argument("log_det_jacobian: dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    if (!(std::abs(z[i]) <= kZMax))
      throw SaturationError(i, m_[i].name(), z[i]);
    double x, ld;
    m_[i].transport_eval(z[i], &x, &ld);
    if (!std::isfinite(x) || !std::isfinite(ld))
      throw SaturationError(i, m_[i].name(), z[i]);
    s += ld;
  }
  return s;
}

ForwardBundle DiagonalTransport::forward_bundle(const Vec& z) const {
  const int d = dim();
  if (z.size() != d)
    throw std::invalid_argument("forward_bundle: dimension mismatch");
  ForwardBundle b;
  b.x.resize(d);
  b.diag_deriv.resize(d);
  b.log_det = 0.0;
  for (int i = 0; i < d; ++i) {
    if (!(std::abs(z[i]) <= kZMax))
      throw SaturationError(i, m_[i].name(), z[i]);
    double ld;
    m_[i].transport_eval(z[i], &b.x[i], &ld);
    b.diag_deriv[i] = std::exp(ld);
    if (!std::isfinite(b.x[i]) || !std::isfinite(b.diag_deriv[i]))
      throw SaturationError(i, m_[i].name(), z[i]);
    b.log_det += ld;
  }
  return b;
}

TailClass DiagonalTransport::tail_class() const {
  // The heaviest marginal decides. Ordering: Unknown absorbs everything,
  // then power tails (smallest index), then exponential.
  using G = TailClass::Growth;
  TailClass out = m_[0].tail_class();
  for (size_t i = 1; i < m_.size(); ++i) {
    const TailClass t = m_[i].tail_class();
    if (out.growth == G::Unknown) break;
    if (t.growth == G::Unknown) {
      out = t;
    } else if (t.growth == G::ExpOfQuadraticOverAlpha) {
      if (out.growth != G::ExpOfQuadraticOverAlpha || t.alpha < out.alpha)
        out = t;
    }
  }
  return out;
}

double DiagonalTransport::log_prior_density(const Vec& x) const {
  const int d = dim();
  if (x.size() != d)
    throw std::invalid_argument("log_prior_density: dimension mismatch");
  double lp = 0.0;
  for (int i = 0; i < d; ++i) lp += m_[i].log_pdf(x[i]);
  return lp;
}

Vec DiagonalTransport::log_derivative(const Vec& z) const {
  const int d = dim();
  if (z.size() != d)
    throw std::invalid_argument("log_derivative: dimension mismatch");
  Vec ld(d);
  for (int i = 0; i < d; ++i) {
    if (!(std::abs(z[i]) <= kZMax))
      throw SaturationError(i, m_[i].name(), z[i]);
    double x;
    m_[i].transport_eval(z[i], &x, &ld[i]);
    if (!std::isfinite(x) || !std::isfinite(ld[i]))
      throw SaturationError(i, m_[i].name(), z[i]);
  }
  return ld;
}

LinearlyCoupledTransport::LinearlyCoupledTransport(DiagonalTransport diagonal,
                                                   Mat coupling)
    : diag_(std::move(diagonal)), L_(std::move(coupling)) {
  if (L_.rows() != L_.cols() || L_.rows() != diag_.dim())
    throw std::invalid_argument("coupling must be square and match dim");
  lu_.compute(L_);
  double ldet = 0.0;
  for (int i = 0; i < L_.rows(); ++i) {
    const double p = std::abs(lu_.matrixLU()(i, i));
    if (!(p > 0.0) || !std::isfinite(p))
      throw std::invalid_argument("coupling is singular");
    ldet += std::log(p);
  }
  log_det_L_ = ldet;
}

Vec LinearlyCoupledTransport::forward(const Vec& z) const {
  return L_ * diag_.forward(z);
}

Vec LinearlyCoupledTransport::inverse(const Vec& x) const {
  if (x.size() != dim())
    throw std::invalid_argument("inverse: dimension mismatch");
  return diag_.inverse(lu_.solve(x));
}

double LinearlyCoupledTransport::log_det_jacobian(const Vec& z) const {
  return diag_.log_det_jacobian(z) + log_det_L_;
}

ForwardBundle LinearlyCoupledTransport::forward_bundle(const Vec& z) const {
  ForwardBundle b = diag_.forward_bundle(z);
  b.x = L_ * b.x;
  b.log_det += log_det_L_;
  b.coupling = &L_;
  return b;
}

double LinearlyCoupledTransport::log_prior_density(const Vec& x) const {
  if (x.size() != dim())
    throw std::invalid_argument("log_prior_density: dimension mismatch");
  const Vec c = lu_.solve(x);
  return diag_.log_prior_density(c) - log_det_L_;
}

PerturbedTransport::PerturbedTransport(std::shared_ptr<const Transport> base,
                                       double eps)
    : base_(std::move(base)), eps_(eps) {
  if (!base_) throw std::invalid_argument("PerturbedTransport: null base");
  if (!std::isfinite(eps_) || eps_ <= -1.0)
    throw std::invalid_argument("PerturbedTransport: need eps > -1");
}

Vec PerturbedTransport::forward(const Vec& z) const {
  Vec y = base_->forward(z);
  for (int i = 0; i < y.size(); ++i) y[i] += eps_ * std::tanh(y[i]);
  return y;
}

Vec PerturbedTransport::inverse(const Vec& x) const {
  // Componentwise solve of y + eps tanh(y) = x. The map has derivative in
  // [min(1, 1+eps), 1+max(eps, 0)], so a bracketed Newton from y = x is
  // safe.
  Vec y(x.size());
  for (int i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]))
      throw std::invalid_argument("inverse: non-finite input");
    double lo = x[i] - std::abs(eps_);
    double hi = x[i] + std::abs(eps_);
    double yi = x[i];
    for (int it = 0; it < 80; ++it) {
      const double f = yi + eps_ * std::tanh(yi) - x[i];
      if (f > 0.0)
        hi = yi;
      else
        lo = yi;
      const double df = 1.0 + eps_ * stable_sech2(yi);
      double step = f / df;
      double next = yi - step;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - yi) < 1e-15 * (1.0 + std::abs(yi))) {
        yi = next;
        break;
      }
      yi = next;
    }
    y[i] = yi;
  }
  return base_->inverse(y);
}

double PerturbedTransport::log_det_jacobian(const Vec& z) const {
  const Vec y = base_->forward(z);
  double s = base_->log_det_jacobian(z);
  for (int i = 0; i < y.size(); ++i)
    s += std::log1p(eps_ * stable_sech2(y[i]));
  return s;
}

ForwardBundle PerturbedTransport::forward_bundle(const Vec& z) const {
  ForwardBundle b = base_->forward_bundle(z);
  Vec outer(b.x.size());
  for (int i = 0; i < b.x.size(); ++i) {
    const double g = 1.0 + eps_ * stable_sech2(b.x[i]);
    outer[i] = g;
    b.log_det += std::log(g);
    b.x[i] += eps_ * std::tanh(b.x[i]);
  }
  if (b.outer_deriv.size() > 0)
    b.outer_deriv = b.outer_deriv.cwiseProduct(outer);
  else
    b.outer_deriv = outer;
  return b;
}

AsymptoticRatio asymptotic_ratio(const MarginalPrior& m, double z) {
  if (!(z > 0.0) || !std::isfinite(z))
    throw std::invalid_argument("asymptotic_ratio: need z > 0");
  if (!m.has_asymptote())
    throw std::invalid_argument("asymptotic_ratio: " + m.name() +
                                " has no closed-form tail");
  if (z > kZMax) throw SaturationError(0, m.name(), z);
  double x, ld;
  m.transport_eval(z, &x, &ld);
  if (!std::isfinite(x) || !std::isfinite(ld))
    throw SaturationError(0, m.name(), z);
  AsymptoticRatio r;
  r.ratio_T = std::exp(std::log(x) - m.asym_log_T(z));
  r.ratio_Tprime = std::exp(ld - m.asym_log_Tprime(z));
  return r;
}

}  // namespace plis
