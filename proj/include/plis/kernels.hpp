#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "plis/rng.hpp"
#include "plis/transport.hpp"

namespace plis {

// log-density evaluator; the gradient output is optional and is left
// untouched when the value is -inf.
using LogDensityGrad = std::function<double(const Vec&, Vec*)>;

struct Proposal {
  Vec candidate;
  double log_q_ratio = 0.0;  // log q(state | cand) - log q(cand | state)
  bool divergent = false;    // force rejection (e.g. HMC energy blow-up)
  // Target log-density at the candidate when the kernel evaluated it while
  // building the proposal; only meaningful if the kernel's internal target
  // is the MH target.
  std::optional<double> cand_log_target;
};

class ProposalKernel {
 public:
  virtual ~ProposalKernel() = default;
  virtual int dim() const = 0;
  virtual Proposal propose(const Vec& state, Philox& rng) = 0;
  // Post-step adaptation hook; alpha is the realized acceptance probability.
  virtual void observe(const Vec& state, double alpha);
  virtual void freeze();
  virtual double step_size() const = 0;
};

namespace detail {

// Robbins-Monro drift of a log step size toward a target acceptance rate.
class StepAdapter {
 public:
  StepAdapter(double init_step, double target, bool enabled);
  void update(double alpha);
  void freeze() { frozen_ = true; }
  double value() const { return std::exp(log_step_); }

 private:
  double log_step_;
  double target_;
  bool enabled_;
  bool frozen_ = false;
  long n_ = 0;
};

// Running empirical covariance (Welford) with jittered Cholesky refreshes.
class CovAdapter {
 public:
  CovAdapter(int dim, double jitter, int refresh);
  void observe(const Vec& v);
  void freeze() { frozen_ = true; }
  const Mat& chol() const { return chol_; }  // lower factor, identity until warm

 private:
  void refresh_chol();

  int dim_;
  double jitter_;
  int refresh_;
  bool frozen_ = false;
  long n_ = 0;
  Vec mean_;
  Mat m2_;
  Mat chol_;
};

}  // namespace detail

class RandomWalkKernel final : public ProposalKernel {
 public:
  struct Options {
    double init_step = 1.0;
    double target_accept = 0.234;
    bool adapt_step = true;
    bool adapt_cov = false;
    double cov_jitter = 1e-6;
    int cov_refresh = 50;
  };
  explicit RandomWalkKernel(int dim);
  RandomWalkKernel(int dim, Options opt);

  int dim() const override { return dim_; }
  Proposal propose(const Vec& state, Philox& rng) override;
  void observe(const Vec& state, double alpha) override;
  void freeze() override;
  double step_size() const override { return step_.value(); }

 private:
  int dim_;
  Options opt_;
  detail::StepAdapter step_;
  detail::CovAdapter cov_;
};

// Crank-Nicolson proposal, reversible for the standard normal reference:
// z' = sqrt(1 - b^2) z + b xi. The returned log q ratio makes generic MH on
// g(z) phi0(z) reduce to the likelihood-only accept rule.
class PcnKernel final : public ProposalKernel {
 public:
  struct Options {
    double init_beta = 0.5;
    double target_accept = 0.234;
    bool adapt = true;
  };
  explicit PcnKernel(int dim);
  PcnKernel(int dim, Options opt);

  int dim() const override { return dim_; }
  Proposal propose(const Vec& state, Philox& rng) override;
  void observe(const Vec& state, double alpha) override;
  void freeze() override;
  double step_size() const override { return beta(); }
  double beta() const;

 private:
  int dim_;
  Options opt_;
  double log_beta_;
  bool frozen_ = false;
  long n_ = 0;
};

// Langevin proposal with optional adaptive covariance preconditioning. The
// drift target need not be the MH target (plug-in subspace use); set
// drift_is_target = false in that case so the candidate density is not
// reused.
class MalaKernel final : public ProposalKernel {
 public:
  struct Options {
    double init_step = 0.1;
    double target_accept = 0.574;
    bool adapt_step = true;
    bool adapt_cov = false;
    double cov_jitter = 1e-6;
    int cov_refresh = 50;
    bool drift_is_target = true;
  };
  MalaKernel(int dim, LogDensityGrad target);
  MalaKernel(int dim, LogDensityGrad target, Options opt);

  int dim() const override { return dim_; }
  Proposal propose(const Vec& state, Philox& rng) override;
  void observe(const Vec& state, double alpha) override;
  void freeze() override;
  double step_size() const override { return step_.value(); }

 private:
  double eval(const Vec& z, Vec* grad);

  int dim_;
  LogDensityGrad target_;
  Options opt_;
  detail::StepAdapter step_;
  detail::CovAdapter cov_;
  // one-slot cache of the most recent evaluation (state or candidate)
  bool have_cache_ = false;
  Vec cache_z_;
  double cache_v_ = 0.0;
  Vec cache_g_;
};

// Fixed-length leapfrog HMC with unit mass; step size dual-averaged during
// burn-in. Trajectories with |Delta H| beyond the threshold (or an
// infeasible interior point) come back flagged divergent.
class HmcKernel final : public ProposalKernel {
 public:
  struct Options {
    double init_step = 0.1;
    int n_leapfrog = 16;
    double target_accept = 0.8;
    bool adapt_step = true;
    double divergence_threshold = 1000.0;
  };
  HmcKernel(int dim, LogDensityGrad target);
  HmcKernel(int dim, LogDensityGrad target, Options opt);

  int dim() const override { return dim_; }
  Proposal propose(const Vec& state, Philox& rng) override;
  void observe(const Vec& state, double alpha) override;
  void freeze() override;
  double step_size() const override { return std::exp(log_eps_); }
  int n_leapfrog() const { return opt_.n_leapfrog; }

 private:
  double eval(const Vec& z, Vec* grad);

  int dim_;
  LogDensityGrad target_;
  Options opt_;
  // Nesterov dual averaging state
  double log_eps_;
  double log_eps_bar_;
  double h_bar_ = 0.0;
  double mu_;
  long t_ = 0;
  bool frozen_ = false;
  bool have_cache_ = false;
  Vec cache_z_;
  double cache_v_ = 0.0;
  Vec cache_g_;
};

}  // namespace plis
