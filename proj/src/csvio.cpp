#include "plis/csvio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "plis/elliptic.hpp"

namespace plis {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path, uint64_t hash) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write \"" + path + "\"");
  out << "# config_hash=" << format_hash(hash) << "\n";
  return out;
}

}  // namespace

std::string format_hash(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void write_chain_csv(const std::string& path, const ChainRecord& rec,
                     uint64_t hash) {
  std::ofstream out = open_out(path, hash);
  out << "step,accepted,alpha1,alpha2";
  for (long i = 0; i < rec.z.rows(); ++i) out << ",z_r" << i;
  for (long i = 0; i < rec.x.rows(); ++i) out << ",x" << i;
  out << "\n";
  const size_t n = rec.steps.size();
  for (size_t k = 0; k < n; ++k) {
    const StepOutcome& o = rec.outcomes[k];
    out << rec.steps[k] << ',' << (o.accepted ? 1 : 0) << ','
        << fmt(o.alpha1) << ',' << fmt(o.alpha2);
    const long col = static_cast<long>(k);
    for (long i = 0; i < rec.z.rows(); ++i) out << ',' << fmt(rec.z(i, col));
    for (long i = 0; i < rec.x.rows(); ++i) out << ',' << fmt(rec.x(i, col));
    out << "\n";
  }
}

void write_spectrum_csv(const std::string& path, const Vec& eigenvalues,
                        uint64_t hash) {
  std::ofstream out = open_out(path, hash);
  out << "rank,eigenvalue,cumulative_residual\n";
  const long d = eigenvalues.size();
  Vec tail(d + 1);
  tail[d] = 0.0;
  for (long i = d - 1; i >= 0; --i) {
    tail[i] = tail[i + 1] + std::max(eigenvalues[i], 0.0);
  }
  for (long i = 0; i < d; ++i) {
    out << (i + 1) << ',' << fmt(eigenvalues[i]) << ',' << fmt(tail[i + 1])
        << "\n";
  }
}

void write_field_summary_csv(const std::string& path, const Mat& quantiles,
                             const Vec& truth, uint64_t hash) {
  if (quantiles.cols() != 3) {
    throw std::invalid_argument("field summary needs lower/median/upper");
  }
  std::ofstream out = open_out(path, hash);
  out << "element,lower,median,upper,truth\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (long e = 0; e < quantiles.rows(); ++e) {
    const double t = truth.size() > e ? softplus(truth[e]) : nan;
    out << e << ',' << fmt(quantiles(e, 0)) << ',' << fmt(quantiles(e, 1))
        << ',' << fmt(quantiles(e, 2)) << ',' << fmt(t) << "\n";
  }
}

void write_data_csv(const std::string& path, const Vec& y, double sigma,
                    uint64_t hash) {
  std::ofstream out = open_out(path, hash);
  out << "# sigma=" << fmt(sigma) << "\n";
  out << "index,y\n";
  for (long i = 0; i < y.size(); ++i) out << i << ',' << fmt(y[i]) << "\n";
}

void write_truth_csv(const std::string& path, const Vec& x_true,
                     uint64_t hash) {
  std::ofstream out = open_out(path, hash);
  out << "element,x_true,kappa_true\n";
  for (long i = 0; i < x_true.size(); ++i) {
    out << i << ',' << fmt(x_true[i]) << ',' << fmt(softplus(x_true[i]))
        << "\n";
  }
}

void write_iact_table_csv(const std::string& path,
                          const std::vector<IactRow>& rows, uint64_t hash) {
  std::ofstream out = open_out(path, hash);
  out << "algorithm,kernel,r,m,tau_mean,tau_sd,unstable,accept_mean,n_seeds,"
         "note\n";
  for (const IactRow& r : rows) {
    out << r.algorithm << ',' << r.kernel << ',' << r.r << ',' << r.m << ','
        << fmt(r.tau_mean) << ',' << fmt(r.tau_sd) << ','
        << (r.unstable ? 1 : 0) << ',' << fmt(r.accept_mean) << ','
        << r.n_seeds << ',' << r.note << "\n";
  }
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read \"" + path + "\"");
  CsvTable t;
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (t.header.empty()) t.comments.push_back(line.substr(1));
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    std::vector<double> row(t.header.size(),
                            std::numeric_limits<double>::quiet_NaN());
    for (size_t i = 0; i < cells.size() && i < row.size(); ++i) {
      try {
        size_t used = 0;
        const double v = std::stod(cells[i], &used);
        if (used == cells[i].size()) row[i] = v;
      } catch (const std::exception&) {
      }
    }
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<long>(rows.size()),
                  static_cast<long>(t.header.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) {
      t.values(static_cast<long>(r), static_cast<long>(c)) = rows[r][c];
    }
  }
  return t;
}

}  // namespace plis
