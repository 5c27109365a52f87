#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plis/samplers.hpp"

namespace plis {

// 16 lowercase hex digits, zero padded.
std::string format_hash(uint64_t h);

// All writers emit floating-point values at 17 significant digits and start
// the file with "# config_hash=<hex>" so every artifact names its config.

// Columns: step,accepted,alpha1,alpha2, then one column per stored
// reference row (z_r0..), then one per stored original row (x0..).
void write_chain_csv(const std::string& path, const ChainRecord& rec,
                     uint64_t hash);

// Columns: rank,eigenvalue,cumulative_residual with 1-based ranks;
// cumulative_residual after rank k = sum over j > k of max(eigenvalue_j, 0).
void write_spectrum_csv(const std::string& path, const Vec& eigenvalues,
                        uint64_t hash);

// Columns: element,lower,median,upper,truth. `quantiles` as produced by
// summarize_field; truth may be empty (column written as nan).
void write_field_summary_csv(const std::string& path, const Mat& quantiles,
                             const Vec& truth, uint64_t hash);

// Columns: index,y; the noise level rides in a "# sigma=..." comment.
void write_data_csv(const std::string& path, const Vec& y, double sigma,
                    uint64_t hash);

// Columns: element,x_true,kappa_true.
void write_truth_csv(const std::string& path, const Vec& x_true,
                     uint64_t hash);

struct IactRow {
  std::string algorithm;
  std::string kernel;
  int r = 0;
  int m = 0;
  double tau_mean = 0.0;
  double tau_sd = 0.0;
  bool unstable = false;
  double accept_mean = 0.0;
  int n_seeds = 0;
  std::string note;  // e.g. failure message; empty = clean
};

// Columns: algorithm,kernel,r,m,tau_mean,tau_sd,unstable,accept_mean,
// n_seeds,note.
void write_iact_table_csv(const std::string& path,
                          const std::vector<IactRow>& rows, uint64_t hash);

struct CsvTable {
  std::vector<std::string> comments;  // leading '#' lines, stripped
  std::vector<std::string> header;
  Mat values;  // one row per data line; non-numeric cells parse as nan
};

CsvTable read_csv(const std::string& path);

}  // namespace plis
