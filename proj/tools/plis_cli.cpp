// Command-line driver: data generation, pilot runs, subspace construction,
// production sampling, chain diagnostics, the benchmark matrix, and the
// transport asymptotics table. Exit codes: 0 success, 2 configuration
// error, 3 numerical failure.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "plis/config.hpp"
#include "plis/csvio.hpp"
#include "plis/diagnostics.hpp"
#include "plis/experiment.hpp"

namespace {

using namespace plis;

struct CommonOpts {
  std::string config_path;
  std::optional<uint64_t> seed;
};

// --seed replaces the configured seed list (generate-data: the data noise
// seed) so one flag reruns any experiment under fresh randomness.
RunConfig load(const CommonOpts& c, bool seed_is_data_seed = false) {
  RunConfig cfg = load_config_file(c.config_path);
  if (c.seed) {
    if (seed_is_data_seed) {
      cfg.model.data_seed = *c.seed;
    } else {
      cfg.sampler.seeds = {*c.seed};
    }
  }
  return cfg;
}

void add_common(CLI::App* sub, CommonOpts& c, bool config_required = true) {
  auto* opt = sub->add_option("--config", c.config_path, "JSON config file");
  if (config_required) opt->required();
  sub->add_option("--seed", c.seed,
                  "override the configured seed list with this one seed");
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return cfg.output_dir + "/" + name;
}

int cmd_generate_data(const CommonOpts& c) {
  RunConfig cfg = load(c, true);
  if (cfg.model.kind != ModelKind::Elliptic) {
    throw ConfigError(
        "config: \"model.kind\" must be \"elliptic\" for generate-data");
  }
  Problem prob = build_problem(cfg);
  const std::string data = out_path(cfg, "data.csv");
  const std::string truth = out_path(cfg, "truth.csv");
  write_data_csv(data, prob.y, prob.sigma, prob.hash);
  write_truth_csv(truth, prob.x_true, prob.hash);
  std::printf("wrote %s (%ld observations, sigma=%.6g)\n", data.c_str(),
              static_cast<long>(prob.y.size()), prob.sigma);
  std::printf("wrote %s (%d elements)\n", truth.c_str(), prob.dim);
  return 0;
}

int cmd_pilot(const CommonOpts& c) {
  RunConfig cfg = load(c);
  Problem prob = build_problem(cfg);
  ChainRecord pilot = run_pilot(prob, cfg);
  const std::string path = out_path(cfg, "pilot.csv");
  write_chain_csv(path, pilot, prob.hash);
  std::printf("pilot: %ld steps, %ld stored, acceptance %.3f\n",
              pilot.n_steps, static_cast<long>(pilot.z.cols()),
              pilot.acceptance_rate);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_lis(const CommonOpts& c) {
  RunConfig cfg = load(c);
  Problem prob = build_problem(cfg);
  ChainRecord pilot = run_pilot(prob, cfg);
  HMatrix h = estimate_h_from_pilot(prob, pilot);
  LisBasis basis = make_basis(cfg, h);
  const std::string path = out_path(cfg, "spectrum.csv");
  write_spectrum_csv(path, basis.eigenvalues, prob.hash);

  const ErrorCertificates certs = error_certificates(basis);
  std::printf("H from %d pilot draws (%s transport)\n", h.n_samples,
              h.source == HSource::ExactTransport ? "exact" : "approximate");
  std::printf("r=%d residual=%.6g kl_bound=%.6g hellinger_sq_bound=%.6g\n",
              basis.rank(), basis.residual, certs.kl_bound,
              certs.hellinger_sq_bound);
  const LikelihoodShape shape =
      cfg.model.kind == ModelKind::LinearGaussian
          ? LikelihoodShape::LipschitzLogOrLinearGaussian
          : LikelihoodShape::BoundedPolyGrad;
  std::printf("tail compatibility: %s\n",
              to_string(check_tail_compatibility(*prob.chain_transport,
                                                 shape)));
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_sample(const CommonOpts& c) {
  RunConfig cfg = load(c);
  ExperimentReport rep = run_experiment(cfg);
  for (size_t i = 0; i < rep.seeds_run.size(); ++i) {
    std::printf("seed %llu: chain %s\n",
                static_cast<unsigned long long>(rep.seeds_run[i]),
                i < rep.chain_files.size() ? rep.chain_files[i].c_str()
                                           : "?");
  }
  for (size_t i = 0; i < rep.seed_taus.size(); ++i) {
    std::printf("tau[%zu]=%.4g\n", i, rep.seed_taus[i]);
  }
  std::printf("tau %.4g +- %.4g%s, acceptance %.3f, residual(r) %.6g\n",
              rep.tau.mean, rep.tau.sd, rep.tau.unstable ? " (unstable)" : "",
              rep.accept_mean, rep.basis_residual);
  for (const CellFailure& f : rep.failures) {
    std::fprintf(stderr, "seed %llu failed: %s\n",
                 static_cast<unsigned long long>(f.seed), f.message.c_str());
  }
  std::printf("wrote %s\n", rep.iact_file.c_str());
  if (rep.seeds_run.empty()) {
    throw std::runtime_error("all chains failed; see messages above");
  }
  return 0;
}

int cmd_diagnose(const CommonOpts& c, const std::vector<std::string>& files) {
  // Works on chain files alone; --config is accepted but not needed.
  (void)c;
  std::vector<double> taus;
  std::printf("%-48s %8s %10s %8s\n", "file", "n", "tau", "accept");
  for (const std::string& f : files) {
    CsvTable t = read_csv(f);
    long zcol = -1, acol = -1;
    for (size_t j = 0; j < t.header.size(); ++j) {
      if (zcol < 0 && t.header[j].rfind("z_r", 0) == 0) {
        zcol = static_cast<long>(j);
      }
      if (t.header[j] == "accepted") acol = static_cast<long>(j);
    }
    if (zcol < 0) {
      throw std::runtime_error("\"" + f + "\" has no z_r column");
    }
    std::vector<double> series(t.values.rows());
    for (long i = 0; i < t.values.rows(); ++i) series[i] = t.values(i, zcol);
    const double tau = iact(series);
    const double accept =
        acol >= 0 ? t.values.col(acol).mean()
                  : std::numeric_limits<double>::quiet_NaN();
    taus.push_back(tau);
    std::printf("%-48s %8ld %10.4g %8.3f\n", f.c_str(), t.values.rows(), tau,
                accept);
  }
  if (taus.size() > 1) {
    const ReplicateIact agg = aggregate_iact(taus);
    std::printf("aggregate: tau %.4g +- %.4g%s over %zu chains\n", agg.mean,
                agg.sd, agg.unstable ? " (unstable)" : "", taus.size());
  }
  return 0;
}

int cmd_bench(const CommonOpts& c, std::vector<int> ranks,
              std::vector<int> batches) {
  RunConfig cfg = load(c);
  if (ranks.empty()) ranks = {24, 32, 40};
  if (batches.empty()) batches = {2, 5};
  if (cfg.sampler.algorithm == AlgorithmKind::FullSpace) {
    throw ConfigError(
        "config: \"sampler.algorithm\" must be a subspace algorithm for "
        "bench");
  }
  Problem prob = build_problem(cfg);
  for (int r : ranks) {
    if (r < 1 || r > prob.dim) {
      throw ConfigError("config: bench rank " + std::to_string(r) +
                        " outside [1, " + std::to_string(prob.dim) + "]");
    }
    if (cfg.sampler.algorithm == AlgorithmKind::IdealMarginal &&
        prob.dim - r > 3) {
      throw ConfigError("config: \"ideal\" needs d - r <= 3 at bench rank " +
                        std::to_string(r));
    }
  }
  for (int m : batches) {
    if (m < 1) throw ConfigError("config: bench batch size must be >= 1");
  }

  write_data_csv(out_path(cfg, "data.csv"), prob.y, prob.sigma, prob.hash);
  if (prob.x_true.size() > 0) {
    write_truth_csv(out_path(cfg, "truth.csv"), prob.x_true, prob.hash);
  }
  ChainRecord pilot = run_pilot(prob, cfg);
  HMatrix h = estimate_h_from_pilot(prob, pilot);

  std::vector<LisBasis> bases;
  bases.reserve(ranks.size());
  for (int r : ranks) bases.push_back(eigen_basis(h, r));
  write_spectrum_csv(out_path(cfg, "spectrum.csv"), bases[0].eigenvalues,
                     prob.hash);
  for (size_t i = 0; i < ranks.size(); ++i) {
    const ErrorCertificates certs = error_certificates(bases[i]);
    std::printf("r=%d residual=%.6g kl_bound=%.6g hellinger_sq_bound=%.6g\n",
                ranks[i], bases[i].residual, certs.kl_bound,
                certs.hellinger_sq_bound);
  }

  struct Job {
    size_t ri, mi, si;
  };
  std::vector<Job> jobs;
  for (size_t ri = 0; ri < ranks.size(); ++ri) {
    for (size_t mi = 0; mi < batches.size(); ++mi) {
      for (size_t si = 0; si < cfg.sampler.seeds.size(); ++si) {
        jobs.push_back({ri, mi, si});
      }
    }
  }
  std::vector<std::optional<ChainRecord>> recs(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (size_t k = next.fetch_add(1); k < jobs.size();
         k = next.fetch_add(1)) {
      const Job& j = jobs[k];
      RunConfig cell = cfg;
      cell.sampler.r = ranks[j.ri];
      cell.sampler.m = batches[j.mi];
      Mat project = Mat::Zero(1, ranks[j.ri]);
      project(0, 0) = 1.0;
      try {
        recs[k] = run_cell(prob, cell, &bases[j.ri],
                           cfg.sampler.seeds[j.si], project, false);
      } catch (const std::exception& e) {
        errors[k] = e.what()[0] ? e.what() : "unknown failure";
      }
    }
  };
  const int workers =
      std::min<int>(worker_count(), static_cast<int>(jobs.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  std::vector<IactRow> rows;
  size_t k = 0;
  for (size_t ri = 0; ri < ranks.size(); ++ri) {
    for (size_t mi = 0; mi < batches.size(); ++mi) {
      IactRow row;
      row.algorithm = to_string(cfg.sampler.algorithm);
      row.kernel = to_string(cfg.sampler.kernel);
      row.r = ranks[ri];
      row.m = batches[mi];
      std::vector<double> taus;
      double accept_sum = 0.0;
      int n_ok = 0;
      for (size_t si = 0; si < cfg.sampler.seeds.size(); ++si, ++k) {
        const uint64_t seed = cfg.sampler.seeds[si];
        if (!recs[k]) {
          if (!row.note.empty()) row.note += "; ";
          row.note += "seed " + std::to_string(seed) + ": " + errors[k];
          continue;
        }
        const ChainRecord& rec = *recs[k];
        const std::string file =
            out_path(cfg, std::string("chain_") +
                              to_string(cfg.sampler.algorithm) + "_" +
                              to_string(cfg.sampler.kernel) + "_r" +
                              std::to_string(ranks[ri]) + "_m" +
                              std::to_string(batches[mi]) + "_seed" +
                              std::to_string(seed) + ".csv");
        write_chain_csv(file, rec, prob.hash);
        accept_sum += rec.acceptance_rate;
        ++n_ok;
        std::vector<double> series(rec.z.cols());
        for (long i = 0; i < rec.z.cols(); ++i) series[i] = rec.z(0, i);
        try {
          taus.push_back(iact(series));
        } catch (const std::exception& e) {
          if (!row.note.empty()) row.note += "; ";
          row.note += "seed " + std::to_string(seed) + ": iact: " + e.what();
        }
      }
      if (!taus.empty()) {
        const ReplicateIact agg = aggregate_iact(taus);
        row.tau_mean = agg.mean;
        row.tau_sd = agg.sd;
        row.unstable = agg.unstable;
      }
      row.accept_mean = n_ok > 0 ? accept_sum / n_ok : 0.0;
      row.n_seeds = n_ok;
      for (char& ch : row.note) {
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
      }
      rows.push_back(std::move(row));
    }
  }
  const std::string table = out_path(cfg, "iact_table.csv");
  write_iact_table_csv(table, rows, prob.hash);
  std::printf("%-6s %-6s %4s %4s %10s %10s %8s %7s\n", "algo", "kernel", "r",
              "m", "tau_mean", "tau_sd", "accept", "seeds");
  for (const IactRow& row : rows) {
    std::printf("%-6s %-6s %4d %4d %10.4g %10.4g %8.3f %7d%s%s\n",
                row.algorithm.c_str(), row.kernel.c_str(), row.r, row.m,
                row.tau_mean, row.tau_sd, row.accept_mean, row.n_seeds,
                row.note.empty() ? "" : "  ", row.note.c_str());
  }
  std::printf("wrote %s\n", table.c_str());
  return 0;
}

int cmd_transport_table(const CommonOpts& c) {
  RunConfig cfg = load(c);
  const MarginalPrior marginal = make_marginal(cfg.prior);
  const std::vector<double> zs = {6.0, 8.0, 10.0, 12.0};
  const std::string path = out_path(cfg, "transport_table.csv");
  {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write \"" + path + "\"");
    out << "# config_hash=" << format_hash(config_hash(cfg)) << "\n";
    out << "# marginal=" << marginal.name() << "\n";
    out << "z,ratio_T,ratio_Tprime\n";
    char buf[96];
    for (double z : zs) {
      const AsymptoticRatio r = asymptotic_ratio(marginal, z);
      std::snprintf(buf, sizeof buf, "%g,%.17g,%.17g\n", z, r.ratio_T,
                    r.ratio_Tprime);
      out << buf;
    }
  }
  std::printf("%-6s %12s %12s\n", "z", "T/T_asym", "T'/T'_asym");
  for (double z : zs) {
    const AsymptoticRatio r = asymptotic_ratio(marginal, z);
    std::printf("%-6g %12.6f %12.6f\n", z, r.ratio_T, r.ratio_Tprime);
  }
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Certified likelihood-informed subspace sampling for heavy-tailed "
      "Bayesian inverse problems"};
  app.require_subcommand(1);

  CommonOpts gd, pi, li, sa, di, be, tt;
  std::vector<std::string> chain_files;
  std::vector<int> ranks, batches;

  CLI::App* s_gd = app.add_subcommand(
      "generate-data", "write synthetic elliptic data.csv and truth.csv");
  add_common(s_gd, gd);

  CLI::App* s_pi = app.add_subcommand(
      "pilot", "run the adaptive full-space pilot chain and store it");
  add_common(s_pi, pi);

  CLI::App* s_li = app.add_subcommand(
      "lis", "estimate H from a pilot run, write the spectrum, print "
             "certificates");
  add_common(s_li, li);

  CLI::App* s_sa = app.add_subcommand(
      "sample", "run the configured production chains and diagnostics");
  add_common(s_sa, sa);

  CLI::App* s_di = app.add_subcommand(
      "diagnose", "integrated autocorrelation times of stored chain files");
  add_common(s_di, di, false);
  s_di->add_option("--chain", chain_files, "chain CSV files")
      ->required()
      ->expected(-1);

  CLI::App* s_be = app.add_subcommand(
      "bench", "benchmark matrix over subspace ranks and batch sizes");
  add_common(s_be, be);
  s_be->add_option("--ranks", ranks, "subspace ranks (default 24 32 40)");
  s_be->add_option("--batches", batches,
                   "pseudo-marginal batch sizes (default 2 5)");

  CLI::App* s_tt = app.add_subcommand(
      "transport-table",
      "transport tail ratios against the closed-form asymptotes");
  add_common(s_tt, tt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s_gd->parsed()) return cmd_generate_data(gd);
    if (s_pi->parsed()) return cmd_pilot(pi);
    if (s_li->parsed()) return cmd_lis(li);
    if (s_sa->parsed()) return cmd_sample(sa);
    if (s_di->parsed()) return cmd_diagnose(di, chain_files);
    if (s_be->parsed()) return cmd_bench(be, ranks, batches);
    if (s_tt->parsed()) return cmd_transport_table(tt);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
