#include "plis/samplers.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "plis/quadrature.hpp"
#include "plis/special.hpp"

namespace plis {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double gumbel(Philox& rng) { return -std::log(-std::log(rng.uniform())); }

double accept_prob(double log_alpha_min) {
  return log_alpha_min >= 0.0 ? 1.0 : std::exp(log_alpha_min);
}

}  // namespace

MhSampler::MhSampler(LogDensity log_target,
                     std::unique_ptr<ProposalKernel> kernel, Vec init,
                     OriginalMap original)
    : log_target_(std::move(log_target)),
      kernel_(std::move(kernel)),
      state_(std::move(init)),
      original_(std::move(original)) {
  if (!log_target_ || !kernel_) throw std::invalid_argument("mh: null pieces");
  if (kernel_->dim() != state_.size()) {
    throw std::invalid_argument("mh: kernel dimension mismatch");
  }
  log_target_value_ = log_target_(state_);
  if (!std::isfinite(log_target_value_)) {
    throw std::invalid_argument("mh: infeasible initial state");
  }
}

StepOutcome MhSampler::step(Philox& rng) {
  Proposal pr = kernel_->propose(state_, rng);
  double lv_cand = kNegInf;
  if (!pr.divergent) {
    lv_cand = pr.cand_log_target ? *pr.cand_log_target
                                 : log_target_(pr.candidate);
  }
  const double la =
      pr.divergent ? kNegInf : lv_cand - log_target_value_ + pr.log_q_ratio;
  const double lmin = std::min(0.0, la);
  const double u = rng.uniform();

  StepOutcome out;
  out.divergent = pr.divergent;
  out.infeasible = !pr.divergent && lv_cand == kNegInf;
  out.alpha1 = accept_prob(lmin);
  if (std::log(u) < lmin) {
    state_ = std::move(pr.candidate);
    log_target_value_ = lv_cand;
    out.accepted = true;
  }
  kernel_->observe(state_, out.alpha1);
  return out;
}

Vec MhSampler::current_original() const {
  return original_ ? original_(state_) : state_;
}

PmSampler::PmSampler(std::shared_ptr<const ReferencePosterior> post,
                     LisBasis basis, std::unique_ptr<ProposalKernel> kernel,
                     int m, const Vec& z_r0, Philox& init_rng)
    : post_(std::move(post)),
      basis_(std::move(basis)),
      kernel_(std::move(kernel)),
      m_(m) {
  if (!post_ || !kernel_) throw std::invalid_argument("pm: null pieces");
  if (m_ < 1) throw std::invalid_argument("pm: need m >= 1");
  if (basis_.dim() != post_->dim()) {
    throw std::invalid_argument("pm: basis dimension mismatch");
  }
  if (kernel_->dim() != basis_.rank() || z_r0.size() != basis_.rank()) {
    throw std::invalid_argument("pm: subspace dimension mismatch");
  }

  state_.z_r = z_r0;
  state_.z_perp.resize(m_);
  state_.log_w.resize(m_);
  const Vec base = basis_.u_r * z_r0;
  std::vector<Vec> xs(m_);
  for (int i = 0; i < m_; ++i) state_.z_perp[i] = draw_complement(init_rng);
  for (int i = 0; i < m_; ++i) {
    state_.log_w[i] = weigh(base + state_.z_perp[i], &xs[i]);
  }
  int sel = 0;
  double best = kNegInf;
  for (int i = 0; i < m_; ++i) {
    const double v = state_.log_w[i] + gumbel(init_rng);
    if (v > best) {
      best = v;
      sel = i;
    }
  }
  const std::vector<double> w(state_.log_w.data(), state_.log_w.data() + m_);
  const double lme = log_mean_exp(w);
  if (lme == kNegInf) {
    throw std::invalid_argument("pm: infeasible initial subspace point");
  }
  state_.log_r = -0.5 * z_r0.squaredNorm() + lme;
  state_.selected = sel;
  state_.z_sel = state_.z_perp[sel];
  state_.x = std::move(xs[sel]);
  last_candidate_z_r_ = z_r0;
}

Vec PmSampler::draw_complement(Philox& rng) const {
  const int d = basis_.dim();
  Vec z(d);
  for (int i = 0; i < d; ++i) z[i] = rng.gaussian();
  z -= basis_.u_r * (basis_.u_r.transpose() * z);
  return z;
}

double PmSampler::weigh(const Vec& z_full, Vec* x_out) const {
  try {
    Vec x = post_->transport().forward(z_full);
    const double lf = post_->log_likelihood_x(x);
    *x_out = std::move(x);
    return lf;
  } catch (const SaturationError&) {
    return kNegInf;
  } catch (const InfeasibleError&) {
    return kNegInf;
  }
}

PmSampler::Candidate PmSampler::propose_candidate(Philox& rng) {
  Candidate c;
  Proposal pr = kernel_->propose(state_.z_r, rng);
  c.z_r = std::move(pr.candidate);
  c.lqr = pr.log_q_ratio;

  const Vec base = basis_.u_r * c.z_r;
  c.z_perp.resize(m_);
  c.log_w.resize(m_);
  std::vector<Vec> xs(m_);
  for (int i = 0; i < m_; ++i) c.z_perp[i] = draw_complement(rng);
  for (int i = 0; i < m_; ++i) {
    c.log_w[i] = weigh(base + c.z_perp[i], &xs[i]);
    if (c.log_w[i] == kNegInf) {
      c.any_infeasible = true;
      ++infeasible_weights_;
    }
  }
  int sel = 0;
  double best = kNegInf;
  for (int i = 0; i < m_; ++i) {
    const double v = c.log_w[i] + gumbel(rng);
    if (v > best) {
      best = v;
      sel = i;
    }
  }
  c.selected = sel;
  const std::vector<double> w(c.log_w.data(), c.log_w.data() + m_);
  const double lme = log_mean_exp(w);
  if (lme > kNegInf && !pr.divergent) {
    c.log_r = -0.5 * c.z_r.squaredNorm() + lme;
  }
  if (c.log_w[sel] > kNegInf) {
    c.x = std::move(xs[sel]);
  } else {
    c.x = state_.x;  // placeholder; an all-infeasible candidate never commits
  }
  last_candidate_z_r_ = c.z_r;
  last_lqr_ = c.lqr;
  return c;
}

void PmSampler::commit(Candidate&& c) {
  state_.z_r = std::move(c.z_r);
  state_.z_perp = std::move(c.z_perp);
  state_.log_w = std::move(c.log_w);
  state_.log_r = c.log_r;
  state_.selected = c.selected;
  state_.z_sel = state_.z_perp[c.selected];
  state_.x = std::move(c.x);
}

StepOutcome PmSampler::step(Philox& rng) {
  Candidate c = propose_candidate(rng);
  const double la = c.log_r - state_.log_r + c.lqr;
  const double lmin = std::min(0.0, la);
  const double u = rng.uniform();

  StepOutcome out;
  out.infeasible = c.any_infeasible;
  out.alpha1 = accept_prob(lmin);
  if (std::log(u) < lmin) {
    commit(std::move(c));
    out.accepted = true;
  }
  kernel_->observe(state_.z_r, out.alpha1);
  return out;
}

DaSampler::DaSampler(std::shared_ptr<const ReferencePosterior> approx_post,
                     std::shared_ptr<const Transport> exact_transport,
                     LisBasis basis, std::unique_ptr<ProposalKernel> kernel,
                     int m, const Vec& z_r0, Philox& init_rng)
    : PmSampler(std::move(approx_post), std::move(basis), std::move(kernel), m,
                z_r0, init_rng),
      exact_transport_(std::move(exact_transport)) {
  if (!exact_transport_ || exact_transport_->dim() != post_->dim()) {
    throw std::invalid_argument("da: exact transport dimension mismatch");
  }
  refresh_cache();
}

void DaSampler::refresh_cache() {
  const Vec z_full = basis_.u_r * state_.z_r + state_.z_sel;
  log_det_ = post_->transport().log_det_jacobian(z_full);
  log_phi0_ = -0.5 * z_full.squaredNorm();
  log_pi0_x_ = exact_transport_->log_prior_density(state_.x);
}

StepOutcome DaSampler::step(Philox& rng) {
  Candidate c = propose_candidate(rng);
  const double la1 = c.log_r - state_.log_r + c.lqr;
  const double l1 = std::min(0.0, la1);
  const double u1 = rng.uniform();

  StepOutcome out;
  out.infeasible = c.any_infeasible;
  out.alpha1 = accept_prob(l1);
  if (std::log(u1) < l1) {
    // Stage two: correct the approximate pushforward prior to the exact one.
    const Vec z_full = basis_.u_r * c.z_r + c.z_perp[c.selected];
    double ld = 0.0, lp0 = 0.0;
    bool ok = true;
    try {
      ld = post_->transport().log_det_jacobian(z_full);
      lp0 = exact_transport_->log_prior_density(c.x);
    } catch (const SaturationError&) {
      ok = false;
    }
    const double lphi = -0.5 * z_full.squaredNorm();
    const double la2 = ok ? (lp0 + ld - lphi) -
                                (log_pi0_x_ + log_det_ - log_phi0_)
                          : kNegInf;
    const double l2 = std::min(0.0, la2);
    out.alpha2 = accept_prob(l2);
    const double u2 = rng.uniform();
    if (std::log(u2) < l2) {
      commit(std::move(c));
      log_det_ = ld;
      log_phi0_ = lphi;
      log_pi0_x_ = lp0;
      out.accepted = true;
    }
  }
  kernel_->observe(state_.z_r, out.alpha1);
  return out;
}

IdealMarginalSampler::IdealMarginalSampler(
    std::shared_ptr<const ReferencePosterior> post, LisBasis basis,
    std::unique_ptr<ProposalKernel> kernel, int nodes_per_dim, const Vec& z_r0)
    : post_(std::move(post)),
      basis_(std::move(basis)),
      kernel_(std::move(kernel)) {
  if (!post_ || !kernel_) throw std::invalid_argument("ideal: null pieces");
  if (basis_.dim() != post_->dim()) {
    throw std::invalid_argument("ideal: basis dimension mismatch");
  }
  if (kernel_->dim() != basis_.rank() || z_r0.size() != basis_.rank()) {
    throw std::invalid_argument("ideal: subspace dimension mismatch");
  }
  const int k = basis_.dim() - basis_.rank();
  if (k > 3) {
    throw std::invalid_argument(
        "ideal: complement quadrature limited to 3 dimensions");
  }
  if (nodes_per_dim < 1) throw std::invalid_argument("ideal: bad node count");

  const QuadRule gh = gauss_hermite_normal(nodes_per_dim);
  long n_nodes = 1;
  for (int i = 0; i < k; ++i) n_nodes *= nodes_per_dim;
  comp_nodes_.resize(k, n_nodes);
  comp_logw_.resize(n_nodes);
  for (long idx = 0; idx < n_nodes; ++idx) {
    long rem = idx;
    double lw = 0.0;
    for (int dd = 0; dd < k; ++dd) {
      const int j = static_cast<int>(rem % nodes_per_dim);
      rem /= nodes_per_dim;
      comp_nodes_(dd, idx) = gh.nodes[j];
      lw += std::log(gh.weights[j]);
    }
    comp_logw_[idx] = lw;
  }

  state_ = z_r0;
  log_target_value_ = log_target(z_r0);
  if (!std::isfinite(log_target_value_)) {
    throw std::invalid_argument("ideal: infeasible initial point");
  }
}

double IdealMarginalSampler::log_gbar(const Vec& z_r) const {
  const Vec base = basis_.u_r * z_r;
  const long n_nodes = comp_logw_.size();
  std::vector<double> terms(n_nodes);
  for (long idx = 0; idx < n_nodes; ++idx) {
    Vec z = base;
    if (comp_nodes_.rows() > 0) z += basis_.u_perp * comp_nodes_.col(idx);
    double lg = kNegInf;
    try {
      lg = post_->log_g(z);
    } catch (const SaturationError&) {
    } catch (const InfeasibleError&) {
    }
    terms[idx] = comp_logw_[idx] + lg;
  }
  return log_sum_exp(terms);
}

double IdealMarginalSampler::log_target(const Vec& z_r) const {
  return log_gbar(z_r) - 0.5 * z_r.squaredNorm();
}

StepOutcome IdealMarginalSampler::step(Philox& rng) {
  Proposal pr = kernel_->propose(state_, rng);
  const double lv_cand = pr.divergent ? kNegInf : log_target(pr.candidate);
  const double la =
      pr.divergent ? kNegInf : lv_cand - log_target_value_ + pr.log_q_ratio;
  const double lmin = std::min(0.0, la);
  const double u = rng.uniform();

  StepOutcome out;
  out.divergent = pr.divergent;
  out.infeasible = !pr.divergent && lv_cand == kNegInf;
  out.alpha1 = accept_prob(lmin);
  if (std::log(u) < lmin) {
    state_ = std::move(pr.candidate);
    log_target_value_ = lv_cand;
    out.accepted = true;
  }
  kernel_->observe(state_, out.alpha1);
  return out;
}

Vec IdealMarginalSampler::current_original() const {
  try {
    return post_->transport().forward(basis_.u_r * state_);
  } catch (const SaturationError&) {
    return Vec::Constant(post_->dim(),
                         std::numeric_limits<double>::quiet_NaN());
  }
}

ChainRecord run_chain(Sampler& s, const ChainOptions& opt, uint64_t seed,
                      uint64_t stream) {
  if (opt.n_steps < 1) throw std::invalid_argument("run_chain: n_steps >= 1");
  if (opt.thinning < 1) throw std::invalid_argument("run_chain: thinning >= 1");
  if (opt.burn_in < 0) throw std::invalid_argument("run_chain: burn_in >= 0");
  const bool project = opt.project_reference.size() > 0;
  if (project && opt.project_reference.cols() != s.dim()) {
    throw std::invalid_argument("run_chain: projection shape mismatch");
  }

  Philox rng(seed, stream);
  const auto t0 = std::chrono::steady_clock::now();

  for (long k = 0; k < opt.burn_in; ++k) s.step(rng);
  s.finish_burn_in();

  const long n_stored = opt.n_steps / opt.thinning;
  ChainRecord rec;
  rec.n_steps = opt.n_steps;
  rec.burn_in = opt.burn_in;
  rec.thinning = opt.thinning;
  rec.seed = seed;
  rec.stream = stream;
  if (opt.store_reference) {
    const long zrows = project ? opt.project_reference.rows() : s.dim();
    rec.z.resize(zrows, n_stored);
  }
  rec.steps.reserve(n_stored);
  rec.outcomes.reserve(n_stored);

  long accepted = 0;
  long xrows = -1;
  long col = 0;
  for (long k = 1; k <= opt.n_steps; ++k) {
    const StepOutcome o = s.step(rng);
    accepted += o.accepted ? 1 : 0;
    rec.infeasible_steps += o.infeasible ? 1 : 0;
    rec.divergent_steps += o.divergent ? 1 : 0;
    if (k % opt.thinning == 0) {
      if (opt.store_reference) {
        const Vec zr = s.current_reference();
        if (project) {
          rec.z.col(col) = opt.project_reference * zr;
        } else {
          rec.z.col(col) = zr;
        }
      }
      if (opt.store_original) {
        const Vec xo = s.current_original();
        if (xrows < 0) {
          xrows = xo.size();
          rec.x.resize(xrows, n_stored);
        }
        rec.x.col(col) = xo;
      }
      rec.steps.push_back(opt.burn_in + k);
      rec.outcomes.push_back(o);
      ++col;
    }
  }
  rec.acceptance_rate = static_cast<double>(accepted) / opt.n_steps;
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rec;
}

}  // namespace plis
