#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "plis/kernels.hpp"
#include "plis/lis.hpp"
#include "plis/posterior.hpp"

namespace plis {

using LogDensity = std::function<double(const Vec&)>;

struct StepOutcome {
  bool accepted = false;
  double alpha1 = 0.0;
  // second-stage acceptance; NaN when the step has no second stage
  double alpha2 = std::numeric_limits<double>::quiet_NaN();
  bool infeasible = false;  // some candidate evaluation hit an infeasible point
  bool divergent = false;   // kernel flagged the trajectory (HMC)
};

// A chain advances by one transition per step() call. The per-step random
// draws follow a fixed order so runs are reproducible draw-for-draw:
// kernel proposal first, then any auxiliary variables, then the acceptance
// uniform(s).
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual int dim() const = 0;  // dimension of the recorded reference state
  virtual StepOutcome step(Philox& rng) = 0;
  virtual Vec current_reference() const = 0;
  virtual Vec current_original() const = 0;
  virtual void finish_burn_in() = 0;
};

// Plain Metropolis-Hastings on an explicit log-density over the reference
// coordinates. `original` optionally maps states to the original coordinates
// for recording (defaults to the state itself).
class MhSampler : public Sampler {
 public:
  using OriginalMap = std::function<Vec(const Vec&)>;
  MhSampler(LogDensity log_target, std::unique_ptr<ProposalKernel> kernel,
            Vec init, OriginalMap original = {});

  int dim() const override { return static_cast<int>(state_.size()); }
  StepOutcome step(Philox& rng) override;
  Vec current_reference() const override { return state_; }
  Vec current_original() const override;
  void finish_burn_in() override { kernel_->freeze(); }
  double current_log_target() const { return log_target_value_; }

 private:
  LogDensity log_target_;
  std::unique_ptr<ProposalKernel> kernel_;
  Vec state_;
  double log_target_value_;
  OriginalMap original_;
};

// Auxiliary state of the likelihood-informed pseudo-marginal chain: the
// subspace point, the m retained complement draws with their log-likelihood
// weights, the Monte Carlo log average R, and the selected full sample.
struct PmState {
  Vec z_r;
  std::vector<Vec> z_perp;  // m full-dimension draws, each orthogonal to U_r
  Vec log_w;                // m log f values
  double log_r = -std::numeric_limits<double>::infinity();
  int selected = 0;
  Vec z_sel;
  Vec x;
};

// One step: propose z_r' through the kernel, draw m fresh complement
// gaussians projected off the subspace, weigh them by the likelihood at the
// composed points, select the carried sample by Gumbel-max, and accept with
// the pseudo-marginal ratio. Rejection keeps every part of the old state,
// including R.
class PmSampler : public Sampler {
 public:
  PmSampler(std::shared_ptr<const ReferencePosterior> post, LisBasis basis,
            std::unique_ptr<ProposalKernel> kernel, int m, const Vec& z_r0,
            Philox& init_rng);

  int dim() const override { return basis_.rank(); }
  StepOutcome step(Philox& rng) override;
  Vec current_reference() const override { return state_.z_r; }
  Vec current_original() const override { return state_.x; }
  void finish_burn_in() override { kernel_->freeze(); }

  const PmState& state() const { return state_; }
  const LisBasis& basis() const { return basis_; }
  const ReferencePosterior& posterior() const { return *post_; }
  int n_complement_draws() const { return m_; }
  long infeasible_weight_count() const { return infeasible_weights_; }
  // last proposal, exposed for idealized-acceptance comparisons
  const Vec& last_candidate_z_r() const { return last_candidate_z_r_; }
  double last_log_q_ratio() const { return last_lqr_; }

 protected:
  struct Candidate {
    Vec z_r;
    std::vector<Vec> z_perp;
    Vec log_w;
    double log_r = -std::numeric_limits<double>::infinity();
    int selected = 0;
    Vec x;
    double lqr = 0.0;
    bool any_infeasible = false;
  };

  Candidate propose_candidate(Philox& rng);
  void commit(Candidate&& c);
  double weigh(const Vec& z_full, Vec* x_out) const;
  Vec draw_complement(Philox& rng) const;

  std::shared_ptr<const ReferencePosterior> post_;
  LisBasis basis_;
  std::unique_ptr<ProposalKernel> kernel_;
  int m_;
  PmState state_;
  long infeasible_weights_ = 0;
  Vec last_candidate_z_r_;
  double last_lqr_ = 0.0;
};

// Delayed acceptance: stage one is the pseudo-marginal step under the
// approximate transport; on stage-one acceptance a second ratio corrects to
// the exact prior, comparing pi0(x) against the pushforward of phi0 through
// the approximate transport. Stage-two rejection rolls the whole auxiliary
// state back. The stage-two uniform is drawn only when stage one accepts.
class DaSampler : public PmSampler {
 public:
  DaSampler(std::shared_ptr<const ReferencePosterior> approx_post,
            std::shared_ptr<const Transport> exact_transport, LisBasis basis,
            std::unique_ptr<ProposalKernel> kernel, int m, const Vec& z_r0,
            Philox& init_rng);

  StepOutcome step(Philox& rng) override;

  double cached_log_prior_x() const { return log_pi0_x_; }
  double cached_log_det() const { return log_det_; }
  double cached_log_phi0() const { return log_phi0_; }

 private:
  void refresh_cache();

  std::shared_ptr<const Transport> exact_transport_;
  double log_pi0_x_ = 0.0;
  double log_det_ = 0.0;
  double log_phi0_ = 0.0;
};

// Metropolis-Hastings on the marginal subspace density phi_y(z_r), with
// g-bar integrated over the complement by tensorized Gauss-Hermite
// quadrature; only complements of dimension <= 3 are accepted.
class IdealMarginalSampler : public Sampler {
 public:
  IdealMarginalSampler(std::shared_ptr<const ReferencePosterior> post,
                       LisBasis basis, std::unique_ptr<ProposalKernel> kernel,
                       int nodes_per_dim, const Vec& z_r0);

  int dim() const override { return basis_.rank(); }
  StepOutcome step(Philox& rng) override;
  Vec current_reference() const override { return state_; }
  Vec current_original() const override;
  void finish_burn_in() override { kernel_->freeze(); }

  double log_gbar(const Vec& z_r) const;
  double log_target(const Vec& z_r) const;

 private:
  std::shared_ptr<const ReferencePosterior> post_;
  LisBasis basis_;
  std::unique_ptr<ProposalKernel> kernel_;
  Mat comp_nodes_;  // (d - r) x K complement quadrature nodes
  Vec comp_logw_;   // K log weights
  Vec state_;
  double log_target_value_;
};

struct ChainOptions {
  long n_steps = 0;
  long burn_in = 0;
  int thinning = 1;
  bool store_reference = true;
  bool store_original = true;
  // optional projection applied to the reference state before storing
  // (rows x dim); empty = store the full reference vector
  Mat project_reference;
};

struct ChainRecord {
  Mat z;  // one stored state per column
  Mat x;
  std::vector<long> steps;
  std::vector<StepOutcome> outcomes;
  double acceptance_rate = 0.0;
  long infeasible_steps = 0;
  long divergent_steps = 0;
  long n_steps = 0;
  long burn_in = 0;
  int thinning = 1;
  uint64_t seed = 0;
  uint64_t stream = 0;
  double wall_seconds = 0.0;
};

// Burn-in (kernel adapting), freeze, then record every `thinning`-th state.
// Deterministic given (seed, stream) except for wall_seconds.
ChainRecord run_chain(Sampler& s, const ChainOptions& opt, uint64_t seed,
                      uint64_t stream);

}  // namespace plis
