#include "plis/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "plis/elliptic.hpp"
#include "plis/special.hpp"

namespace plis {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct IactResult {
  double tau = 1.0;
  int window = 0;
  bool degenerate = false;
};

// Biased autocovariances c_0..c_{n-1} via zero-padded FFT.
std::vector<double> autocovariance(const double* s, size_t n) {
  const double mean = std::accumulate(s, s + n, 0.0) / static_cast<double>(n);
  size_t nfft = 1;
  while (nfft < 2 * n) nfft <<= 1;
  std::vector<double> padded(nfft, 0.0);
  for (size_t i = 0; i < n; ++i) padded[i] = s[i] - mean;

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& c : spec) c = std::norm(c);
  std::vector<std::complex<double>> back;
  fft.inv(back, spec);

  std::vector<double> c(n);
  for (size_t k = 0; k < n; ++k) c[k] = back[k].real() / static_cast<double>(n);
  return c;
}

IactResult iact_impl(const double* s, size_t n) {
  if (n < 100) throw std::invalid_argument("iact: need at least 100 samples");
  IactResult out;
  const auto [mn, mx] = std::minmax_element(s, s + n);
  if (*mn == *mx) {
    out.degenerate = true;
    return out;
  }
  const std::vector<double> c = autocovariance(s, n);
  if (!(c[0] > 0.0) || !std::isfinite(c[0])) {
    out.degenerate = true;
    return out;
  }
  double acc = 0.0;
  double prev = kInf;
  int pairs = 0;
  for (size_t m = 0; 2 * m + 1 < n; ++m) {
    double g = (c[2 * m] + c[2 * m + 1]) / c[0];
    if (!(g > 0.0)) break;
    g = std::min(g, prev);
    prev = g;
    acc += g;
    ++pairs;
  }
  out.tau = std::max(1.0, 2.0 * acc - 1.0);
  out.window = pairs > 0 ? 2 * pairs - 1 : 0;
  return out;
}

}  // namespace

double iact(const std::vector<double>& series, bool* degenerate) {
  const IactResult r = iact_impl(series.data(), series.size());
  if (degenerate != nullptr) *degenerate = r.degenerate;
  return r.tau;
}

IactReport iact_report(const Mat& samples) {
  const long d = samples.rows();
  const long n = samples.cols();
  if (d < 1) throw std::invalid_argument("iact_report: empty sample matrix");

  IactReport rep;
  rep.per_coordinate.resize(d);
  rep.window.resize(d);
  rep.degenerate.resize(d);
  std::vector<double> row(n);
  double total = 0.0;
  for (long i = 0; i < d; ++i) {
    for (long k = 0; k < n; ++k) row[k] = samples(i, k);
    const IactResult r = iact_impl(row.data(), row.size());
    rep.per_coordinate[i] = r.tau;
    rep.window[i] = r.window;
    rep.degenerate[i] = r.degenerate;
    total += r.tau;
  }
  rep.tau_bar = total / static_cast<double>(d);
  return rep;
}

ReplicateIact aggregate_iact(const std::vector<double>& replicate_taus) {
  if (replicate_taus.empty()) {
    throw std::invalid_argument("aggregate_iact: no replicates");
  }
  ReplicateIact out;
  const double n = static_cast<double>(replicate_taus.size());
  out.mean = std::accumulate(replicate_taus.begin(), replicate_taus.end(),
                             0.0) /
             n;
  if (replicate_taus.size() > 1) {
    double ss = 0.0;
    for (double t : replicate_taus) ss += (t - out.mean) * (t - out.mean);
    out.sd = std::sqrt(ss / (n - 1.0));
  }
  out.unstable = out.sd > out.mean;
  return out;
}

namespace {

Vec trapezoid_log_weights(const Vec& x) {
  const long n = x.size();
  if (n < 2) throw std::invalid_argument("grid density: need >= 2 nodes");
  for (long i = 1; i < n; ++i) {
    if (!(x[i] > x[i - 1])) {
      throw std::invalid_argument("grid density: nodes must ascend");
    }
  }
  Vec lw(n);
  lw[0] = std::log(0.5 * (x[1] - x[0]));
  for (long i = 1; i + 1 < n; ++i) lw[i] = std::log(0.5 * (x[i + 1] - x[i - 1]));
  lw[n - 1] = std::log(0.5 * (x[n - 1] - x[n - 2]));
  return lw;
}

double log_norm_of(const Vec& log_f, const Vec& log_w) {
  std::vector<double> terms(log_f.size());
  for (long i = 0; i < log_f.size(); ++i) terms[i] = log_f[i] + log_w[i];
  return log_sum_exp(terms);
}

void require_same_grid(const GridDensity& a, const GridDensity& b) {
  const bool same = a.x.size() == b.x.size() && a.y.size() == b.y.size() &&
                    a.log_f.size() == b.log_f.size() && a.x == b.x &&
                    a.y == b.y;
  if (!same) throw std::invalid_argument("grid densities on different grids");
}

}  // namespace

GridDensity make_grid_density(const Vec& x, const Vec& log_f) {
  if (x.size() != log_f.size()) {
    throw std::invalid_argument("grid density: size mismatch");
  }
  GridDensity g;
  g.x = x;
  g.log_f = log_f;
  g.log_w = trapezoid_log_weights(x);
  g.log_norm = log_norm_of(g.log_f, g.log_w);
  if (!std::isfinite(g.log_norm)) {
    throw std::invalid_argument("grid density: vanishing or divergent mass");
  }
  return g;
}

GridDensity make_grid_density(const Vec& x, const Vec& y, const Mat& log_f) {
  if (log_f.rows() != x.size() || log_f.cols() != y.size()) {
    throw std::invalid_argument("grid density: size mismatch");
  }
  const Vec lwx = trapezoid_log_weights(x);
  const Vec lwy = trapezoid_log_weights(y);
  GridDensity g;
  g.x = x;
  g.y = y;
  const long nx = x.size(), ny = y.size();
  g.log_f.resize(nx * ny);
  g.log_w.resize(nx * ny);
  for (long ix = 0; ix < nx; ++ix) {
    for (long iy = 0; iy < ny; ++iy) {
      g.log_f[ix * ny + iy] = log_f(ix, iy);
      g.log_w[ix * ny + iy] = lwx[ix] + lwy[iy];
    }
  }
  g.log_norm = log_norm_of(g.log_f, g.log_w);
  if (!std::isfinite(g.log_norm)) {
    throw std::invalid_argument("grid density: vanishing or divergent mass");
  }
  return g;
}

double hellinger_grid(const GridDensity& a, const GridDensity& b) {
  require_same_grid(a, b);
  double s = 0.0;
  for (long i = 0; i < a.log_f.size(); ++i) {
    const double pa = std::exp(a.log_f[i] + a.log_w[i] - a.log_norm);
    const double pb = std::exp(b.log_f[i] + b.log_w[i] - b.log_norm);
    const double d = std::sqrt(pa) - std::sqrt(pb);
    s += d * d;
  }
  return std::min(1.0, std::sqrt(0.5 * s));
}

double kl_grid(const GridDensity& a, const GridDensity& b) {
  require_same_grid(a, b);
  double s = 0.0;
  for (long i = 0; i < a.log_f.size(); ++i) {
    const double la = a.log_f[i] - a.log_norm;
    const double pa = std::exp(la + a.log_w[i]);
    if (pa == 0.0) continue;
    const double lb = b.log_f[i] - b.log_norm;
    if (lb == -kInf) return kInf;
    s += pa * (la - lb);
  }
  return s;
}

Mat summarize_field(const Mat& x_samples, const std::vector<double>& probs) {
  const long n = x_samples.cols();
  if (n < 100) {
    throw std::invalid_argument("summarize_field: need >= 100 samples");
  }
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("summarize_field: probability out of range");
    }
  }
  Mat out(x_samples.rows(), static_cast<long>(probs.size()));
  std::vector<double> buf(n);
  for (long e = 0; e < x_samples.rows(); ++e) {
    for (long k = 0; k < n; ++k) buf[k] = softplus(x_samples(e, k));
    std::sort(buf.begin(), buf.end());
    for (size_t j = 0; j < probs.size(); ++j) {
      const double h = probs[j] * static_cast<double>(n - 1);
      const long lo = static_cast<long>(std::floor(h));
      const long hi = std::min(lo + 1, n - 1);
      out(e, static_cast<long>(j)) =
          buf[lo] + (h - static_cast<double>(lo)) * (buf[hi] - buf[lo]);
    }
  }
  return out;
}

}  // namespace plis
