#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "plis/config.hpp"
#include "plis/csvio.hpp"
#include "plis/diagnostics.hpp"
#include "plis/elliptic.hpp"
#include "plis/lis.hpp"
#include "plis/samplers.hpp"

namespace plis {

// PLIS_WORKERS overrides the pool size; otherwise the hardware count.
int worker_count();

MarginalPrior make_marginal(const PriorConfig& pc);
std::shared_ptr<const Transport> make_prior_transport(const PriorConfig& pc,
                                                      int d);

// Everything assembled from a config: the chain transport (perturbed when
// requested), the unperturbed exact transport for delayed acceptance, the
// pullback posterior, and the data behind it.
struct Problem {
  std::shared_ptr<const Transport> chain_transport;
  std::shared_ptr<const Transport> exact_transport;
  std::shared_ptr<const ReferencePosterior> posterior;
  std::shared_ptr<const EllipticFem> fem;  // null for the linear toy
  Vec y;
  double sigma = 1.0;
  Vec x_true;  // empty for the linear toy
  uint64_t hash = 0;
  int dim = 0;
};

Problem build_problem(const RunConfig& cfg);

// Adaptive full-space Crank-Nicolson pilot used to estimate H; runs on the
// first configured seed and a dedicated stream.
ChainRecord run_pilot(const Problem& prob, const RunConfig& cfg);

HMatrix estimate_h_from_pilot(const Problem& prob, const ChainRecord& pilot);

LisBasis make_basis(const RunConfig& cfg, const HMatrix& h);

// One production chain at the given seed. `basis` is required for every
// algorithm except the full-space chain. When `project` is nonempty the
// stored reference series is project * state.
ChainRecord run_cell(const Problem& prob, const RunConfig& cfg,
                     const LisBasis* basis, uint64_t seed,
                     const Mat& project = Mat(), bool store_original = false);

struct CellFailure {
  uint64_t seed = 0;
  std::string message;
};

struct ExperimentReport {
  uint64_t config_hash = 0;
  Vec spectrum;              // descending eigenvalues of the pilot H
  Vec residuals;             // clipped tail sum after each rank, length d
  double basis_residual = 0.0;
  std::vector<uint64_t> seeds_run;
  std::vector<double> seed_taus;  // IACT of the leading LIS coordinate
  ReplicateIact tau;
  double accept_mean = 0.0;
  std::vector<std::string> chain_files;
  std::string spectrum_file;
  std::string summary_file;  // empty when the field summary was skipped
  std::string iact_file;
  std::vector<CellFailure> failures;
  double wall_seconds = 0.0;  // in memory only; never written to disk
};

// Pilot -> H -> basis -> one production chain per seed (worker pool) ->
// IACT aggregation; writes chain/spectrum/summary/table files under
// cfg.output_dir. Deterministic per (config, seed): rerunning overwrites
// byte-identical files. A failing seed is recorded and the rest continue.
ExperimentReport run_experiment(const RunConfig& cfg);

}  // namespace plis
