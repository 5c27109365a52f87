#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "plis/marginal.hpp"

namespace plis {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ModelKind { Elliptic, LinearGaussian };
enum class ParamKind { Iid, Besov, DifferenceCauchy };
enum class AlgorithmKind { FullSpace, PseudoMarginal, DelayedAcceptance,
                           IdealMarginal };
enum class KernelKind { RandomWalk, Pcn, Mala, Hmc };

struct ModelConfig {
  ModelKind kind = ModelKind::Elliptic;
  int level = 5;            // elliptic: d = 2^level cells
  uint64_t data_seed = 0;   // elliptic synthetic-data noise seed
  int dim = 2;              // linear-gaussian: parameter dimension
  std::vector<double> y;    // linear-gaussian observations (A = identity)
  double sigma = 1.0;       // linear-gaussian noise level
};

// shape holds the kind-specific exponent (p, alpha, nu); scale the
// kind-specific width (lambda, gamma, tau). Laplace uses scale only.
struct PriorConfig {
  ParamKind parameterization = ParamKind::Iid;
  MarginalKind kind = MarginalKind::Laplace;
  double shape = 0.0;
  double scale = 1.0;
  double level_decay = 0.0;  // besov: scale level-j columns by 2^(-j s)
};

struct SamplerConfig {
  AlgorithmKind algorithm = AlgorithmKind::PseudoMarginal;
  KernelKind kernel = KernelKind::RandomWalk;
  int r = 1;
  int m = 1;
  long n_steps = 10000;
  long burn_in = 0;
  int thinning = 1;
  std::vector<uint64_t> seeds = {1};
  double init_step = 0.1;
  int n_leapfrog = 16;
  int nodes_per_dim = 20;    // idealized marginal complement quadrature
  long pilot_steps = 5000;
  long pilot_burn_in = 1000;
  int pilot_thinning = 10;
};

struct RunConfig {
  int schema_version = 1;
  ModelConfig model;
  PriorConfig prior;
  std::optional<PriorConfig> exact_prior;  // pi0 evaluator, required for DA
  double transport_perturbation = 0.0;     // eps of T + eps tanh(T); 0 = exact
  SamplerConfig sampler;
  std::string output_dir = "out";
};

// Parameter dimension implied by the model block.
int config_dim(const RunConfig& cfg);

// Parse, validate, serialize. Parsing rejects unknown keys and invalid
// values with a message naming the offending field. serialize -> parse is
// the identity.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

// FNV-1a over the canonical compact serialization; stamped into output
// file headers so every artifact names the config that produced it.
uint64_t config_hash(const RunConfig& cfg);

const char* to_string(ModelKind k);
const char* to_string(ParamKind k);
const char* to_string(AlgorithmKind k);
const char* to_string(KernelKind k);
const char* to_string(MarginalKind k);

}  // namespace plis
