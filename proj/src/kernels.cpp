#include "plis/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace plis {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool same_point(const Vec& a, const Vec& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}
}  // namespace

void ProposalKernel::observe(const Vec&, double) {}
void ProposalKernel::freeze() {}

namespace detail {

StepAdapter::StepAdapter(double init_step, double target, bool enabled)
    : log_step_(std::log(init_step)), target_(target), enabled_(enabled) {
  if (!(init_step > 0.0)) throw std::invalid_argument("step size must be > 0");
}

void StepAdapter::update(double alpha) {
  if (!enabled_ || frozen_) return;
  ++n_;
  const double c = std::min(0.1, 1.0 / std::sqrt(static_cast<double>(n_)));
  log_step_ += c * (alpha - target_);
  log_step_ = std::min(5.0, std::max(-40.0, log_step_));
}

CovAdapter::CovAdapter(int dim, double jitter, int refresh)
    : dim_(dim),
      jitter_(jitter),
      refresh_(std::max(1, refresh)),
      mean_(Vec::Zero(dim)),
      m2_(Mat::Zero(dim, dim)),
      chol_(Mat::Identity(dim, dim)) {}

void CovAdapter::observe(const Vec& v) {
  if (frozen_) return;
  ++n_;
  const Vec delta = v - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (v - mean_).transpose();
  if (n_ >= 2 * dim_ && n_ % refresh_ == 0) refresh_chol();
}

void CovAdapter::refresh_chol() {
  if (n_ < 2) return;
  Mat cov = m2_ / static_cast<double>(n_ - 1);
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal().array() += jitter_;
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() == Eigen::Success) chol_ = llt.matrixL();
}

}  // namespace detail

RandomWalkKernel::RandomWalkKernel(int dim)
    : RandomWalkKernel(dim, Options()) {}

RandomWalkKernel::RandomWalkKernel(int dim, Options opt)
    : dim_(dim),
      opt_(opt),
      step_(opt.init_step, opt.target_accept, opt.adapt_step),
      cov_(dim, opt.cov_jitter, opt.cov_refresh) {}

Proposal RandomWalkKernel::propose(const Vec& state, Philox& rng) {
  Vec xi(dim_);
  for (int i = 0; i < dim_; ++i) xi[i] = rng.gaussian();
  Proposal pr;
  if (opt_.adapt_cov) {
    pr.candidate = state + step_.value() * (cov_.chol() * xi);
  } else {
    pr.candidate = state + step_.value() * xi;
  }
  return pr;
}

void RandomWalkKernel::observe(const Vec& state, double alpha) {
  step_.update(alpha);
  if (opt_.adapt_cov) cov_.observe(state);
}

void RandomWalkKernel::freeze() {
  step_.freeze();
  cov_.freeze();
}

PcnKernel::PcnKernel(int dim) : PcnKernel(dim, Options()) {}

PcnKernel::PcnKernel(int dim, Options opt)
    : dim_(dim), opt_(opt), log_beta_(std::log(opt.init_beta)) {
  if (!(opt.init_beta > 0.0 && opt.init_beta <= 1.0)) {
    throw std::invalid_argument("pcn: beta must lie in (0, 1]");
  }
}

double PcnKernel::beta() const { return std::exp(log_beta_); }

Proposal PcnKernel::propose(const Vec& state, Philox& rng) {
  const double b = beta();
  const double contract = std::sqrt(std::max(0.0, 1.0 - b * b));
  Vec xi(dim_);
  for (int i = 0; i < dim_; ++i) xi[i] = rng.gaussian();
  Proposal pr;
  pr.candidate = contract * state + b * xi;
  // exact ratio of Crank-Nicolson transition densities
  pr.log_q_ratio = 0.5 * (pr.candidate.squaredNorm() - state.squaredNorm());
  return pr;
}

void PcnKernel::observe(const Vec&, double alpha) {
  if (!opt_.adapt || frozen_) return;
  ++n_;
  const double c = std::min(0.1, 1.0 / std::sqrt(static_cast<double>(n_)));
  log_beta_ += c * (alpha - opt_.target_accept);
  log_beta_ = std::min(0.0, std::max(-20.0, log_beta_));
}

void PcnKernel::freeze() { frozen_ = true; }

MalaKernel::MalaKernel(int dim, LogDensityGrad target)
    : MalaKernel(dim, std::move(target), Options()) {}

MalaKernel::MalaKernel(int dim, LogDensityGrad target, Options opt)
    : dim_(dim),
      target_(std::move(target)),
      opt_(opt),
      step_(opt.init_step, opt.target_accept, opt.adapt_step),
      cov_(dim, opt.cov_jitter, opt.cov_refresh) {}

double MalaKernel::eval(const Vec& z, Vec* grad) {
  if (have_cache_ && same_point(cache_z_, z)) {
    *grad = cache_g_;
    return cache_v_;
  }
  const double v = target_(z, grad);
  if (std::isfinite(v)) {
    have_cache_ = true;
    cache_z_ = z;
    cache_v_ = v;
    cache_g_ = *grad;
  }
  return v;
}

Proposal MalaKernel::propose(const Vec& state, Philox& rng) {
  Vec g_state(dim_);
  const double v_state = eval(state, &g_state);
  if (!std::isfinite(v_state)) {
    throw std::runtime_error("mala: current state is infeasible");
  }
  const double h = step_.value();
  const Mat& chol = cov_.chol();
  const auto lower = chol.triangularView<Eigen::Lower>();

  Vec xi(dim_);
  for (int i = 0; i < dim_; ++i) xi[i] = rng.gaussian();
  const Vec drift = 0.5 * h * (chol * (chol.transpose() * g_state));
  const Vec mu = state + drift;
  Proposal pr;
  pr.candidate = mu + std::sqrt(h) * (chol * xi);

  Vec g_cand(dim_);
  const double v_cand = eval(pr.candidate, &g_cand);
  if (!std::isfinite(v_cand)) {
    if (opt_.drift_is_target) pr.cand_log_target = kNegInf;
    return pr;
  }
  const Vec mu_rev =
      pr.candidate + 0.5 * h * (chol * (chol.transpose() * g_cand));
  const Vec back = lower.solve(state - mu_rev);
  pr.log_q_ratio = (-back.squaredNorm() + h * xi.squaredNorm()) / (2.0 * h);
  if (opt_.drift_is_target) pr.cand_log_target = v_cand;
  return pr;
}

void MalaKernel::observe(const Vec& state, double alpha) {
  step_.update(alpha);
  if (opt_.adapt_cov) cov_.observe(state);
}

void MalaKernel::freeze() {
  step_.freeze();
  cov_.freeze();
}

HmcKernel::HmcKernel(int dim, LogDensityGrad target)
    : HmcKernel(dim, std::move(target), Options()) {}

HmcKernel::HmcKernel(int dim, LogDensityGrad target, Options opt)
    : dim_(dim), target_(std::move(target)), opt_(opt) {
  if (!(opt.init_step > 0.0)) throw std::invalid_argument("hmc: bad step");
  if (opt.n_leapfrog < 0) throw std::invalid_argument("hmc: bad n_leapfrog");
  log_eps_ = std::log(opt.init_step);
  log_eps_bar_ = log_eps_;
  mu_ = std::log(10.0 * opt.init_step);
}

double HmcKernel::eval(const Vec& z, Vec* grad) {
  if (have_cache_ && same_point(cache_z_, z)) {
    *grad = cache_g_;
    return cache_v_;
  }
  const double v = target_(z, grad);
  if (std::isfinite(v)) {
    have_cache_ = true;
    cache_z_ = z;
    cache_v_ = v;
    cache_g_ = *grad;
  }
  return v;
}

Proposal HmcKernel::propose(const Vec& state, Philox& rng) {
  Vec g(dim_);
  const double v0 = eval(state, &g);
  if (!std::isfinite(v0)) {
    throw std::runtime_error("hmc: current state is infeasible");
  }
  Vec p(dim_);
  for (int i = 0; i < dim_; ++i) p[i] = rng.gaussian();
  const double k0 = 0.5 * p.squaredNorm();

  Proposal pr;
  if (opt_.n_leapfrog == 0) {
    pr.candidate = state;
    pr.cand_log_target = v0;
    return pr;
  }

  const double eps = std::exp(log_eps_);
  Vec z = state;
  double v = v0;
  p += 0.5 * eps * g;
  for (int l = 0; l < opt_.n_leapfrog; ++l) {
    z += eps * p;
    v = eval(z, &g);
    if (!std::isfinite(v) || !z.allFinite()) {
      pr.candidate = z;
      pr.divergent = true;
      return pr;
    }
    p += (l + 1 < opt_.n_leapfrog ? eps : 0.5 * eps) * g;
  }
  const double k1 = 0.5 * p.squaredNorm();
  const double dh = (k1 - v) - (k0 - v0);
  pr.candidate = z;
  pr.log_q_ratio = k0 - k1;
  pr.cand_log_target = v;
  if (!std::isfinite(dh) || std::abs(dh) > opt_.divergence_threshold) {
    pr.divergent = true;
  }
  return pr;
}

void HmcKernel::observe(const Vec&, double alpha) {
  if (!opt_.adapt_step || frozen_) return;
  ++t_;
  const double t0 = 10.0, gamma = 0.05, kappa = 0.75;
  const double frac = 1.0 / (t_ + t0);
  h_bar_ = (1.0 - frac) * h_bar_ + frac * (opt_.target_accept - alpha);
  log_eps_ = mu_ - std::sqrt(static_cast<double>(t_)) / gamma * h_bar_;
  log_eps_ = std::min(5.0, std::max(-40.0, log_eps_));
  const double eta = std::pow(static_cast<double>(t_), -kappa);
  log_eps_bar_ = eta * log_eps_ + (1.0 - eta) * log_eps_bar_;
}

void HmcKernel::freeze() {
  if (t_ > 0) log_eps_ = log_eps_bar_;
  frozen_ = true;
}

}  // namespace plis
