#include "plis/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>

namespace plis {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Stream constants keep the pilot, the per-chain initialization draws, the
// chains themselves, and the synthetic-data noise on disjoint Philox
// streams for every seed.
constexpr uint64_t kPilotStream = 0x70696c6f74ULL;
constexpr uint64_t kInitStream = 0x696e6974ULL;
constexpr uint64_t kChainStream = 0x636861696eULL;

LogDensity full_target(std::shared_ptr<const ReferencePosterior> post) {
  return [post](const Vec& z) -> double {
    try {
      return post->log_posterior(z);
    } catch (const SaturationError&) {
      return kNegInf;
    }
  };
}

LogDensityGrad full_target_grad(
    std::shared_ptr<const ReferencePosterior> post) {
  return [post](const Vec& z, Vec* grad) -> double {
    try {
      if (!grad) return post->log_posterior(z);
      return post->log_posterior_with_grad(z, *grad);
    } catch (const SaturationError&) {
      return kNegInf;
    }
  };
}

// Plug-in drift for subspace Langevin and Hamiltonian proposals:
// v(z_r) = log g(U_r z_r) - |z_r|^2/2, the zero-complement slice of the
// marginal target. Not the chain's stationary density, so kernels built on
// it run with drift_is_target off and the pseudo-marginal ratio stays
// exact.
LogDensityGrad subspace_drift(std::shared_ptr<const ReferencePosterior> post,
                              Mat u_r) {
  return [post, u_r = std::move(u_r)](const Vec& z_r, Vec* grad) -> double {
    try {
      const Vec z = u_r * z_r;
      if (!grad) {
        const double lg = post->log_g(z);
        if (lg == kNegInf) return kNegInf;
        return lg - 0.5 * z_r.squaredNorm();
      }
      Vec gz(z.size());
      const double lg = post->log_g_with_grad(z, gz);
      if (lg == kNegInf) return kNegInf;
      *grad = u_r.transpose() * gz - z_r;
      return lg - 0.5 * z_r.squaredNorm();
    } catch (const SaturationError&) {
      return kNegInf;
    }
  };
}

std::unique_ptr<ProposalKernel> make_kernel(
    const SamplerConfig& sc, int dim,
    std::shared_ptr<const ReferencePosterior> post, const LisBasis* basis) {
  const bool full = sc.algorithm == AlgorithmKind::FullSpace;
  switch (sc.kernel) {
    case KernelKind::RandomWalk: {
      RandomWalkKernel::Options o;
      o.init_step = sc.init_step;
      return std::make_unique<RandomWalkKernel>(dim, o);
    }
    case KernelKind::Pcn: {
      PcnKernel::Options o;
      o.init_beta = sc.init_step;
      return std::make_unique<PcnKernel>(dim, o);
    }
    case KernelKind::Mala: {
      MalaKernel::Options o;
      o.init_step = sc.init_step;
      o.drift_is_target = full;
      LogDensityGrad target = full ? full_target_grad(post)
                                   : subspace_drift(post, basis->u_r);
      return std::make_unique<MalaKernel>(dim, std::move(target), o);
    }
    case KernelKind::Hmc: {
      HmcKernel::Options o;
      o.init_step = sc.init_step;
      o.n_leapfrog = sc.n_leapfrog;
      LogDensityGrad target = full ? full_target_grad(post)
                                   : subspace_drift(post, basis->u_r);
      return std::make_unique<HmcKernel>(dim, std::move(target), o);
    }
  }
  throw std::logic_error("make_kernel: unhandled kernel");
}

std::string sanitize_note(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

int worker_count() {
  if (const char* env = std::getenv("PLIS_WORKERS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<int>(std::min<long>(n, 256));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

MarginalPrior make_marginal(const PriorConfig& pc) {
  switch (pc.kind) {
    case MarginalKind::Laplace:
      return MarginalPrior::laplace(pc.scale);
    case MarginalKind::ExpPower:
      return MarginalPrior::exp_power(pc.shape, pc.scale);
    case MarginalKind::Cauchy:
      return MarginalPrior::cauchy(pc.scale);
    case MarginalKind::Pareto:
      return MarginalPrior::pareto(pc.shape);
    case MarginalKind::StudentT:
      return MarginalPrior::student_t(pc.shape);
    case MarginalKind::Horseshoe:
      return MarginalPrior::horseshoe(pc.scale);
    case MarginalKind::NumericCdf:
      break;
  }
  throw std::invalid_argument("make_marginal: no closed-form marginal");
}

std::shared_ptr<const Transport> make_prior_transport(const PriorConfig& pc,
                                                      int d) {
  switch (pc.parameterization) {
    case ParamKind::Iid:
      return std::make_shared<DiagonalTransport>(
          DiagonalTransport::iid(make_marginal(pc), d));
    case ParamKind::Besov:
      return make_besov_transport(d, make_marginal(pc), pc.level_decay);
    case ParamKind::DifferenceCauchy:
      return make_difference_cauchy_transport(d, pc.scale);
  }
  throw std::logic_error("make_prior_transport: unhandled parameterization");
}

Problem build_problem(const RunConfig& cfg) {
  Problem prob;
  prob.dim = config_dim(cfg);
  prob.hash = config_hash(cfg);

  std::shared_ptr<const Transport> base =
      make_prior_transport(cfg.prior, prob.dim);
  prob.chain_transport =
      cfg.transport_perturbation != 0.0
          ? std::make_shared<PerturbedTransport>(base,
                                                 cfg.transport_perturbation)
          : base;
  prob.exact_transport = cfg.exact_prior
                             ? make_prior_transport(*cfg.exact_prior, prob.dim)
                             : base;

  std::shared_ptr<const ForwardModel> model;
  if (cfg.model.kind == ModelKind::Elliptic) {
    auto fem = std::make_shared<EllipticFem>(cfg.model.level);
    EllipticData data =
        fem->generate_data(true_conductivity, cfg.model.data_seed);
    prob.fem = fem;
    prob.y = data.y;
    prob.sigma = data.sigma;
    prob.x_true = data.x_true;
    model = fem;
  } else {
    model = std::make_shared<LinearForwardModel>(
        Mat::Identity(prob.dim, prob.dim));
    prob.y = Eigen::Map<const Vec>(cfg.model.y.data(),
                                   static_cast<long>(cfg.model.y.size()));
    prob.sigma = cfg.model.sigma;
  }

  prob.posterior = std::make_shared<ReferencePosterior>(
      model, GaussianLikelihood{prob.y, prob.sigma}, prob.chain_transport);
  return prob;
}

ChainRecord run_pilot(const Problem& prob, const RunConfig& cfg) {
  auto post = prob.posterior;
  MhSampler pilot(full_target(post),
                  std::make_unique<PcnKernel>(prob.dim),
                  Vec::Zero(prob.dim));
  ChainOptions opt;
  opt.n_steps = cfg.sampler.pilot_steps;
  opt.burn_in = cfg.sampler.pilot_burn_in;
  opt.thinning = cfg.sampler.pilot_thinning;
  opt.store_original = false;
  return run_chain(pilot, opt, cfg.sampler.seeds.front(), kPilotStream);
}

HMatrix estimate_h_from_pilot(const Problem& prob, const ChainRecord& pilot) {
  const HSource source = prob.posterior->transport_ptr() ==
                                 prob.exact_transport
                             ? HSource::ExactTransport
                             : HSource::ApproximateTransport;
  return estimate_h(*prob.posterior, pilot.z, source);
}

LisBasis make_basis(const RunConfig& cfg, const HMatrix& h) {
  return eigen_basis(h, cfg.sampler.r);
}

ChainRecord run_cell(const Problem& prob, const RunConfig& cfg,
                     const LisBasis* basis, uint64_t seed, const Mat& project,
                     bool store_original) {
  const SamplerConfig& sc = cfg.sampler;
  if (sc.algorithm != AlgorithmKind::FullSpace && basis == nullptr) {
    throw std::invalid_argument("run_cell: subspace algorithm needs a basis");
  }

  ChainOptions opt;
  opt.n_steps = sc.n_steps;
  opt.burn_in = sc.burn_in;
  opt.thinning = sc.thinning;
  opt.store_original = store_original;
  opt.project_reference = project;

  auto post = prob.posterior;
  const int dim =
      sc.algorithm == AlgorithmKind::FullSpace ? prob.dim : basis->rank();
  std::unique_ptr<ProposalKernel> kernel = make_kernel(sc, dim, post, basis);

  switch (sc.algorithm) {
    case AlgorithmKind::FullSpace: {
      auto transport = post->transport_ptr();
      MhSampler s(full_target(post), std::move(kernel), Vec::Zero(dim),
                  [transport](const Vec& z) -> Vec {
                    try {
                      return transport->forward(z);
                    } catch (const SaturationError&) {
                      return Vec::Constant(
                          transport->dim(),
                          std::numeric_limits<double>::quiet_NaN());
                    }
                  });
      return run_chain(s, opt, seed, kChainStream);
    }
    case AlgorithmKind::PseudoMarginal: {
      Philox init_rng(seed, kInitStream);
      PmSampler s(post, *basis, std::move(kernel), sc.m, Vec::Zero(dim),
                  init_rng);
      return run_chain(s, opt, seed, kChainStream);
    }
    case AlgorithmKind::DelayedAcceptance: {
      Philox init_rng(seed, kInitStream);
      DaSampler s(post, prob.exact_transport, *basis, std::move(kernel), sc.m,
                  Vec::Zero(dim), init_rng);
      return run_chain(s, opt, seed, kChainStream);
    }
    case AlgorithmKind::IdealMarginal: {
      IdealMarginalSampler s(post, *basis, std::move(kernel),
                             sc.nodes_per_dim, Vec::Zero(dim));
      return run_chain(s, opt, seed, kChainStream);
    }
  }
  throw std::logic_error("run_cell: unhandled algorithm");
}

ExperimentReport run_experiment(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  namespace fs = std::filesystem;

  ExperimentReport rep;
  Problem prob = build_problem(cfg);
  rep.config_hash = prob.hash;

  fs::create_directories(cfg.output_dir);
  const std::string dir = cfg.output_dir + "/";
  write_data_csv(dir + "data.csv", prob.y, prob.sigma, prob.hash);
  if (prob.x_true.size() > 0) {
    write_truth_csv(dir + "truth.csv", prob.x_true, prob.hash);
  }

  ChainRecord pilot = run_pilot(prob, cfg);
  HMatrix h = estimate_h_from_pilot(prob, pilot);
  LisBasis basis = make_basis(cfg, h);
  rep.spectrum = basis.eigenvalues;
  rep.basis_residual = basis.residual;
  rep.residuals = Vec::Zero(basis.eigenvalues.size());
  for (long k = 0; k < basis.eigenvalues.size(); ++k) {
    double tail = 0.0;
    for (long j = k + 1; j < basis.eigenvalues.size(); ++j) {
      tail += std::max(basis.eigenvalues[j], 0.0);
    }
    rep.residuals[k] = tail;
  }
  rep.spectrum_file = dir + "spectrum.csv";
  write_spectrum_csv(rep.spectrum_file, basis.eigenvalues, prob.hash);

  const SamplerConfig& sc = cfg.sampler;
  const bool subspace = sc.algorithm != AlgorithmKind::FullSpace;
  Mat project;
  if (subspace) {
    project = Mat::Zero(1, basis.rank());
    project(0, 0) = 1.0;
  } else {
    project = basis.u_r.col(0).transpose();
  }

  const long n_stored = sc.n_steps / std::max(1, sc.thinning);
  const bool store_original = prob.dim <= 64 && n_stored <= 20000;

  const int n_seeds = static_cast<int>(sc.seeds.size());
  std::vector<std::optional<ChainRecord>> recs(n_seeds);
  std::vector<std::string> errors(n_seeds);
  std::atomic<int> next{0};
  auto work = [&]() {
    for (int i = next.fetch_add(1); i < n_seeds; i = next.fetch_add(1)) {
      try {
        recs[i] = run_cell(prob, cfg, &basis, sc.seeds[i], project,
                           store_original);
      } catch (const std::exception& e) {
        errors[i] = e.what()[0] ? e.what() : "unknown failure";
      }
    }
  };
  const int workers = std::min(worker_count(), n_seeds);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  std::vector<Mat> fields;
  long field_cols = 0;
  double accept_sum = 0.0;
  int n_ok = 0;
  for (int i = 0; i < n_seeds; ++i) {
    const uint64_t seed = sc.seeds[i];
    if (!recs[i]) {
      rep.failures.push_back({seed, errors[i]});
      continue;
    }
    const ChainRecord& rec = *recs[i];
    const std::string file = dir + "chain_" +
                             std::string(to_string(sc.algorithm)) + "_" +
                             to_string(sc.kernel) + "_r" +
                             std::to_string(sc.r) + "_m" +
                             std::to_string(sc.m) + "_seed" +
                             std::to_string(seed) + ".csv";
    write_chain_csv(file, rec, prob.hash);
    rep.chain_files.push_back(file);
    rep.seeds_run.push_back(seed);
    accept_sum += rec.acceptance_rate;
    ++n_ok;
    try {
      std::vector<double> series(rec.z.cols());
      for (long k = 0; k < rec.z.cols(); ++k) series[k] = rec.z(0, k);
      rep.seed_taus.push_back(iact(series));
    } catch (const std::exception& e) {
      rep.failures.push_back({seed, std::string("iact: ") + e.what()});
    }
    if (store_original && rec.x.rows() == prob.dim) {
      fields.push_back(rec.x);
      field_cols += rec.x.cols();
    }
  }
  rep.accept_mean = n_ok > 0 ? accept_sum / n_ok : 0.0;
  if (!rep.seed_taus.empty()) rep.tau = aggregate_iact(rep.seed_taus);

  IactRow row;
  row.algorithm = to_string(sc.algorithm);
  row.kernel = to_string(sc.kernel);
  row.r = sc.r;
  row.m = sc.m;
  row.tau_mean = rep.tau.mean;
  row.tau_sd = rep.tau.sd;
  row.unstable = rep.tau.unstable;
  row.accept_mean = rep.accept_mean;
  row.n_seeds = n_ok;
  for (const CellFailure& f : rep.failures) {
    if (!row.note.empty()) row.note += "; ";
    row.note += "seed " + std::to_string(f.seed) + ": " + f.message;
  }
  row.note = sanitize_note(row.note);
  rep.iact_file = dir + "iact_table.csv";
  write_iact_table_csv(rep.iact_file, {row}, prob.hash);

  if (field_cols >= 100) {
    Mat pooled(prob.dim, field_cols);
    long at = 0;
    for (const Mat& f : fields) {
      for (long c = 0; c < f.cols(); ++c) {
        if (all_finite(f.col(c))) pooled.col(at++) = f.col(c);
      }
    }
    if (at >= 100) {
      Mat quantiles = summarize_field(pooled.leftCols(at));
      rep.summary_file = dir + "field_summary.csv";
      write_field_summary_csv(rep.summary_file, quantiles, prob.x_true,
                              prob.hash);
    }
  }

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

}  // namespace plis
