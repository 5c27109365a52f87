#include "plis/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace plis {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

void check_keys(const Json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (item.key() == a) {
        ok = true;
        break;
      }
    }
    if (!ok) fail("unknown key \"" + path + "." + item.key() + "\"");
  }
}

const Json& require(const Json& obj, const std::string& path,
                    const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail("missing field \"" + path + "." + key + "\"");
  return *it;
}

template <typename T>
T as(const Json& v, const std::string& where) {
  try {
    return v.get<T>();
  } catch (const Json::exception&) {
    fail("field \"" + where + "\" has the wrong type");
  }
}

template <typename T>
T get_or(const Json& obj, const std::string& path, const char* key, T def) {
  auto it = obj.find(key);
  if (it == obj.end()) return def;
  return as<T>(*it, path + "." + key);
}

template <typename T>
T get_req(const Json& obj, const std::string& path, const char* key) {
  return as<T>(require(obj, path, key), path + "." + key);
}

std::string get_str(const Json& obj, const std::string& path, const char* key,
                    const char* def) {
  return get_or<std::string>(obj, path, key, def);
}

ModelKind model_kind_from(const std::string& s, const std::string& path) {
  if (s == "elliptic") return ModelKind::Elliptic;
  if (s == "linear_gaussian") return ModelKind::LinearGaussian;
  fail("\"" + path + "\": unknown model kind \"" + s + "\"");
}

ParamKind param_kind_from(const std::string& s, const std::string& path) {
  if (s == "iid") return ParamKind::Iid;
  if (s == "besov") return ParamKind::Besov;
  if (s == "difference_cauchy") return ParamKind::DifferenceCauchy;
  fail("\"" + path + "\": unknown parameterization \"" + s + "\"");
}

AlgorithmKind algorithm_from(const std::string& s, const std::string& path) {
  if (s == "full") return AlgorithmKind::FullSpace;
  if (s == "pm") return AlgorithmKind::PseudoMarginal;
  if (s == "da") return AlgorithmKind::DelayedAcceptance;
  if (s == "ideal") return AlgorithmKind::IdealMarginal;
  fail("\"" + path + "\": unknown algorithm \"" + s + "\"");
}

KernelKind kernel_from(const std::string& s, const std::string& path) {
  if (s == "rw") return KernelKind::RandomWalk;
  if (s == "pcn") return KernelKind::Pcn;
  if (s == "mala") return KernelKind::Mala;
  if (s == "hmc") return KernelKind::Hmc;
  fail("\"" + path + "\": unknown kernel \"" + s + "\"");
}

MarginalKind marginal_from(const std::string& s, const std::string& path) {
  if (s == "laplace") return MarginalKind::Laplace;
  if (s == "exp_power") return MarginalKind::ExpPower;
  if (s == "cauchy") return MarginalKind::Cauchy;
  if (s == "pareto") return MarginalKind::Pareto;
  if (s == "student_t") return MarginalKind::StudentT;
  if (s == "horseshoe") return MarginalKind::Horseshoe;
  fail("\"" + path + "\": unknown marginal kind \"" + s + "\"");
}

// The kind-specific spelling of shape and scale in the JSON.
struct ParamNames {
  const char* shape = nullptr;
  const char* scale = nullptr;
};

ParamNames param_names(MarginalKind k) {
  switch (k) {
    case MarginalKind::Laplace:
      return {nullptr, "lambda"};
    case MarginalKind::ExpPower:
      return {"p", "lambda"};
    case MarginalKind::Cauchy:
      return {nullptr, "gamma"};
    case MarginalKind::Pareto:
      return {"alpha", nullptr};
    case MarginalKind::StudentT:
      return {"nu", nullptr};
    case MarginalKind::Horseshoe:
      return {nullptr, "tau"};
    default:
      fail("marginal kind not configurable");
  }
}

PriorConfig parse_prior(const Json& obj, const std::string& path) {
  if (!obj.is_object()) fail("\"" + path + "\" must be an object");
  PriorConfig pc;
  pc.parameterization =
      param_kind_from(get_str(obj, path, "parameterization", "iid"), path);

  if (pc.parameterization == ParamKind::DifferenceCauchy) {
    check_keys(obj, path, {"parameterization", "kind", "gamma"});
    const std::string kind = get_str(obj, path, "kind", "cauchy");
    if (kind != "cauchy") {
      fail("\"" + path + "\": difference_cauchy requires kind \"cauchy\"");
    }
    pc.kind = MarginalKind::Cauchy;
    pc.scale = get_req<double>(obj, path, "gamma");
    if (!(pc.scale > 0)) fail("\"" + path + ".gamma\" must be positive");
    return pc;
  }

  pc.kind = marginal_from(get_req<std::string>(obj, path, "kind"), path);
  const ParamNames names = param_names(pc.kind);
  if (pc.parameterization == ParamKind::Besov) {
    check_keys(obj, path,
               {"parameterization", "kind", "p", "lambda", "gamma", "alpha",
                "nu", "tau", "level_decay"});
    pc.level_decay = get_or<double>(obj, path, "level_decay", 0.0);
    if (pc.level_decay < 0) {
      fail("\"" + path + ".level_decay\" must be nonnegative");
    }
  } else {
    check_keys(obj, path,
               {"parameterization", "kind", "p", "lambda", "gamma", "alpha",
                "nu", "tau"});
  }
  // reject parameters that belong to a different kind
  for (const char* k : {"p", "lambda", "gamma", "alpha", "nu", "tau"}) {
    if (obj.contains(k) &&
        !((names.shape && std::string(k) == names.shape) ||
          (names.scale && std::string(k) == names.scale))) {
      fail("\"" + path + "." + k + "\" does not apply to kind \"" +
           to_string(pc.kind) + "\"");
    }
  }
  if (names.shape) {
    pc.shape = get_req<double>(obj, path, names.shape);
    if (!(pc.shape > 0)) {
      fail("\"" + path + "." + names.shape + "\" must be positive");
    }
  }
  if (names.scale) {
    pc.scale = get_req<double>(obj, path, names.scale);
    if (!(pc.scale > 0)) {
      fail("\"" + path + "." + names.scale + "\" must be positive");
    }
  }
  return pc;
}

Json dump_prior(const PriorConfig& pc) {
  Json j;
  j["parameterization"] = to_string(pc.parameterization);
  j["kind"] = to_string(pc.kind);
  if (pc.parameterization == ParamKind::DifferenceCauchy) {
    j["gamma"] = pc.scale;
    return j;
  }
  const ParamNames names = param_names(pc.kind);
  if (names.shape) j[names.shape] = pc.shape;
  if (names.scale) j[names.scale] = pc.scale;
  if (pc.parameterization == ParamKind::Besov) {
    j["level_decay"] = pc.level_decay;
  }
  return j;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

int config_dim(const RunConfig& cfg) {
  return cfg.model.kind == ModelKind::Elliptic ? (1 << cfg.model.level)
                                               : cfg.model.dim;
}

RunConfig parse_config(const std::string& json_text) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::exception& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) fail("top level must be an object");
  check_keys(root, "$",
             {"schema_version", "model", "prior", "exact_prior", "transport",
              "sampler", "output_dir"});

  RunConfig cfg;
  cfg.schema_version = get_req<int>(root, "$", "schema_version");
  if (cfg.schema_version != 1) {
    fail("unsupported schema_version " + std::to_string(cfg.schema_version));
  }

  const Json& m = require(root, "$", "model");
  if (!m.is_object()) fail("\"model\" must be an object");
  cfg.model.kind = model_kind_from(get_str(m, "model", "kind", "elliptic"),
                                   "model.kind");
  if (cfg.model.kind == ModelKind::Elliptic) {
    check_keys(m, "model", {"kind", "level", "data_seed"});
    cfg.model.level = get_req<int>(m, "model", "level");
    if (cfg.model.level < 1 || cfg.model.level > 24) {
      fail("\"model.level\" must be in [1, 24]");
    }
    cfg.model.data_seed = get_or<uint64_t>(m, "model", "data_seed", 0);
  } else {
    check_keys(m, "model", {"kind", "dim", "y", "sigma"});
    cfg.model.dim = get_req<int>(m, "model", "dim");
    if (cfg.model.dim < 1) fail("\"model.dim\" must be positive");
    cfg.model.y = get_or<std::vector<double>>(m, "model", "y",
                                              std::vector<double>());
    if (cfg.model.y.empty()) {
      cfg.model.y.assign(static_cast<size_t>(cfg.model.dim), 0.0);
    }
    if (static_cast<int>(cfg.model.y.size()) != cfg.model.dim) {
      fail("\"model.y\" must have length model.dim");
    }
    cfg.model.sigma = get_or<double>(m, "model", "sigma", 1.0);
    if (!(cfg.model.sigma > 0)) fail("\"model.sigma\" must be positive");
  }

  cfg.prior = parse_prior(require(root, "$", "prior"), "prior");
  if (root.contains("exact_prior")) {
    cfg.exact_prior = parse_prior(root["exact_prior"], "exact_prior");
  }

  if (root.contains("transport")) {
    const Json& t = root["transport"];
    if (!t.is_object()) fail("\"transport\" must be an object");
    check_keys(t, "transport", {"perturbation"});
    cfg.transport_perturbation =
        get_or<double>(t, "transport", "perturbation", 0.0);
    if (cfg.transport_perturbation < 0) {
      fail("\"transport.perturbation\" must be nonnegative");
    }
  }

  const Json& s = require(root, "$", "sampler");
  if (!s.is_object()) fail("\"sampler\" must be an object");
  check_keys(s, "sampler",
             {"algorithm", "kernel", "r", "m", "n_steps", "burn_in",
              "thinning", "seeds", "init_step", "n_leapfrog", "nodes_per_dim",
              "pilot_steps", "pilot_burn_in", "pilot_thinning"});
  cfg.sampler.algorithm = algorithm_from(
      get_req<std::string>(s, "sampler", "algorithm"), "sampler.algorithm");
  cfg.sampler.kernel = kernel_from(get_req<std::string>(s, "sampler", "kernel"),
                                   "sampler.kernel");
  cfg.sampler.r = get_req<int>(s, "sampler", "r");
  cfg.sampler.m = get_or<int>(s, "sampler", "m", 1);
  cfg.sampler.n_steps = get_req<long>(s, "sampler", "n_steps");
  cfg.sampler.burn_in = get_or<long>(s, "sampler", "burn_in", 0);
  cfg.sampler.thinning = get_or<int>(s, "sampler", "thinning", 1);
  cfg.sampler.seeds = get_or<std::vector<uint64_t>>(s, "sampler", "seeds",
                                                    std::vector<uint64_t>{1});
  cfg.sampler.init_step = get_or<double>(s, "sampler", "init_step", 0.1);
  cfg.sampler.n_leapfrog = get_or<int>(s, "sampler", "n_leapfrog", 16);
  cfg.sampler.nodes_per_dim = get_or<int>(s, "sampler", "nodes_per_dim", 20);
  cfg.sampler.pilot_steps = get_or<long>(s, "sampler", "pilot_steps", 5000);
  cfg.sampler.pilot_burn_in =
      get_or<long>(s, "sampler", "pilot_burn_in", 1000);
  cfg.sampler.pilot_thinning = get_or<int>(s, "sampler", "pilot_thinning", 10);

  cfg.output_dir = get_str(root, "$", "output_dir", "out");
  if (cfg.output_dir.empty()) fail("\"output_dir\" must be nonempty");

  // cross-field checks
  const int d = config_dim(cfg);
  if (cfg.sampler.r < 1 || cfg.sampler.r > d) {
    fail("\"sampler.r\" must be in [1, " + std::to_string(d) + "]");
  }
  if (cfg.sampler.m < 1) fail("\"sampler.m\" must be >= 1");
  if (cfg.sampler.n_steps < 1) fail("\"sampler.n_steps\" must be >= 1");
  if (cfg.sampler.burn_in < 0) fail("\"sampler.burn_in\" must be >= 0");
  if (cfg.sampler.thinning < 1) fail("\"sampler.thinning\" must be >= 1");
  if (cfg.sampler.seeds.empty()) fail("\"sampler.seeds\" must be nonempty");
  if (std::set<uint64_t>(cfg.sampler.seeds.begin(), cfg.sampler.seeds.end())
          .size() != cfg.sampler.seeds.size()) {
    fail("\"sampler.seeds\" must be distinct");
  }
  if (!(cfg.sampler.init_step > 0)) {
    fail("\"sampler.init_step\" must be positive");
  }
  if (cfg.sampler.n_leapfrog < 0) {
    fail("\"sampler.n_leapfrog\" must be >= 0");
  }
  if (cfg.sampler.nodes_per_dim < 1) {
    fail("\"sampler.nodes_per_dim\" must be >= 1");
  }
  if (cfg.sampler.pilot_steps < 1 || cfg.sampler.pilot_burn_in < 0 ||
      cfg.sampler.pilot_thinning < 1) {
    fail("pilot settings out of range");
  }
  if (cfg.prior.parameterization == ParamKind::Besov && (d & (d - 1)) != 0) {
    fail("besov parameterization needs a power-of-two dimension");
  }
  if (cfg.exact_prior &&
      cfg.exact_prior->parameterization == ParamKind::Besov &&
      (d & (d - 1)) != 0) {
    fail("besov parameterization needs a power-of-two dimension");
  }
  if (cfg.sampler.algorithm == AlgorithmKind::DelayedAcceptance &&
      !cfg.exact_prior) {
    fail("\"sampler.algorithm\" \"da\" requires an \"exact_prior\" block "
         "(the pi0 evaluator)");
  }
  if (cfg.sampler.algorithm == AlgorithmKind::IdealMarginal) {
    if (d - cfg.sampler.r > 3) {
      fail("\"ideal\" needs d - r <= 3 (complement quadrature)");
    }
    if (cfg.sampler.kernel == KernelKind::Mala ||
        cfg.sampler.kernel == KernelKind::Hmc) {
      fail("\"ideal\" supports kernels \"rw\" and \"pcn\" only");
    }
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

Json dump_config(const RunConfig& cfg) {
  Json root;
  root["schema_version"] = cfg.schema_version;
  Json m;
  m["kind"] = to_string(cfg.model.kind);
  if (cfg.model.kind == ModelKind::Elliptic) {
    m["level"] = cfg.model.level;
    m["data_seed"] = cfg.model.data_seed;
  } else {
    m["dim"] = cfg.model.dim;
    m["y"] = cfg.model.y;
    m["sigma"] = cfg.model.sigma;
  }
  root["model"] = std::move(m);
  root["prior"] = dump_prior(cfg.prior);
  if (cfg.exact_prior) root["exact_prior"] = dump_prior(*cfg.exact_prior);
  root["transport"] = Json{{"perturbation", cfg.transport_perturbation}};
  Json s;
  s["algorithm"] = to_string(cfg.sampler.algorithm);
  s["kernel"] = to_string(cfg.sampler.kernel);
  s["r"] = cfg.sampler.r;
  s["m"] = cfg.sampler.m;
  s["n_steps"] = cfg.sampler.n_steps;
  s["burn_in"] = cfg.sampler.burn_in;
  s["thinning"] = cfg.sampler.thinning;
  s["seeds"] = cfg.sampler.seeds;
  s["init_step"] = cfg.sampler.init_step;
  s["n_leapfrog"] = cfg.sampler.n_leapfrog;
  s["nodes_per_dim"] = cfg.sampler.nodes_per_dim;
  s["pilot_steps"] = cfg.sampler.pilot_steps;
  s["pilot_burn_in"] = cfg.sampler.pilot_burn_in;
  s["pilot_thinning"] = cfg.sampler.pilot_thinning;
  root["sampler"] = std::move(s);
  root["output_dir"] = cfg.output_dir;
  return root;
}

}  // namespace

std::string serialize_config(const RunConfig& cfg) {
  return dump_config(cfg).dump(2) + "\n";
}

uint64_t config_hash(const RunConfig& cfg) {
  return fnv1a(dump_config(cfg).dump());
}

const char* to_string(ModelKind k) {
  return k == ModelKind::Elliptic ? "elliptic" : "linear_gaussian";
}

const char* to_string(ParamKind k) {
  switch (k) {
    case ParamKind::Iid:
      return "iid";
    case ParamKind::Besov:
      return "besov";
    default:
      return "difference_cauchy";
  }
}

const char* to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::FullSpace:
      return "full";
    case AlgorithmKind::PseudoMarginal:
      return "pm";
    case AlgorithmKind::DelayedAcceptance:
      return "da";
    default:
      return "ideal";
  }
}

const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::RandomWalk:
      return "rw";
    case KernelKind::Pcn:
      return "pcn";
    case KernelKind::Mala:
      return "mala";
    default:
      return "hmc";
  }
}

const char* to_string(MarginalKind k) {
  switch (k) {
    case MarginalKind::Laplace:
      return "laplace";
    case MarginalKind::ExpPower:
      return "exp_power";
    case MarginalKind::Cauchy:
      return "cauchy";
    case MarginalKind::Pareto:
      return "pareto";
    case MarginalKind::StudentT:
      return "student_t";
    case MarginalKind::Horseshoe:
      return "horseshoe";
    default:
      return "numeric_cdf";
  }
}

}  // namespace plis
