#include "plis/lis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace plis {
namespace {

double clipped_tail_sum(const Vec& eigenvalues, int r) {
  double s = 0.0;
  for (int i = r; i < eigenvalues.size(); ++i) {
    s += std::max(eigenvalues[i], 0.0);
  }
  return s;
}

// Descending spectrum with a deterministic sign: largest-magnitude entry of
// each eigenvector positive, first such entry on ties.
void sorted_spectrum(const Mat& h, Vec* values, Mat* vectors) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("lis: eigendecomposition failed");
  }
  const int d = static_cast<int>(h.rows());
  values->resize(d);
  vectors->resize(d, d);
  for (int i = 0; i < d; ++i) {
    (*values)[i] = es.eigenvalues()[d - 1 - i];
    Vec v = es.eigenvectors().col(d - 1 - i);
    int imax = 0;
    for (int k = 1; k < d; ++k) {
      if (std::abs(v[k]) > std::abs(v[imax])) imax = k;
    }
    if (v[imax] < 0.0) v = -v;
    vectors->col(i) = v;
  }
}

}  // namespace

HMatrix estimate_h(const ReferencePosterior& post, const Mat& samples,
                   HSource source) {
  const int d = post.dim();
  if (samples.rows() != d) {
    throw std::invalid_argument("estimate_h: sample dimension mismatch");
  }
  const int n = static_cast<int>(samples.cols());
  if (n < 2) throw std::invalid_argument("estimate_h: need at least 2 samples");

  Mat acc = Mat::Zero(d, d);
  std::vector<int> infeasible;
  for (int j = 0; j < n; ++j) {
    try {
      const Vec g = post.grad_log_g(samples.col(j));
      acc.selfadjointView<Eigen::Lower>().rankUpdate(g);
    } catch (const InfeasibleError&) {
      infeasible.push_back(j);
    }
  }
  if (!infeasible.empty()) {
    std::ostringstream msg;
    msg << "estimate_h: infeasible samples at indices";
    for (int j : infeasible) msg << ' ' << j;
    throw std::runtime_error(msg.str());
  }
  HMatrix out;
  out.h = Mat(acc.selfadjointView<Eigen::Lower>()) / n;
  out.n_samples = n;
  out.source = source;
  return out;
}

LisBasis eigen_basis(const HMatrix& h, int r) {
  const int d = static_cast<int>(h.h.rows());
  if (r < 1 || r > d) throw std::invalid_argument("eigen_basis: rank out of range");
  const Mat sym = 0.5 * (h.h + h.h.transpose());
  LisBasis b;
  Mat vectors;
  sorted_spectrum(sym, &b.eigenvalues, &vectors);
  b.u_r = vectors.leftCols(r);
  b.u_perp = vectors.rightCols(d - r);
  b.residual = clipped_tail_sum(b.eigenvalues, r);
  b.mode = BasisMode::Eigen;
  return b;
}

LisBasis coordinate_basis(const HMatrix& h, int r) {
  const int d = static_cast<int>(h.h.rows());
  if (r < 1 || r > d) {
    throw std::invalid_argument("coordinate_basis: rank out of range");
  }
  const Mat sym = 0.5 * (h.h + h.h.transpose());

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&sym](int a, int c) {
    return sym(a, a) > sym(c, c);
  });

  LisBasis b;
  b.mode = BasisMode::Coordinate;
  b.tau.assign(order.begin(), order.begin() + r);
  std::sort(b.tau.begin(), b.tau.end());

  b.u_r = Mat::Zero(d, r);
  for (int i = 0; i < r; ++i) b.u_r(b.tau[i], i) = 1.0;
  b.u_perp = Mat::Zero(d, d - r);
  {
    std::vector<char> selected(d, 0);
    for (int i : b.tau) selected[i] = 1;
    int col = 0;
    for (int i = 0; i < d; ++i) {
      if (!selected[i]) b.u_perp(i, col++) = 1.0;
    }
  }

  Mat vectors;
  sorted_spectrum(sym, &b.eigenvalues, &vectors);
  double kept = 0.0;
  for (int i : b.tau) kept += std::max(sym(i, i), 0.0);
  double total = 0.0;
  for (int i = 0; i < d; ++i) total += std::max(sym(i, i), 0.0);
  b.residual = total - kept;
  return b;
}

ErrorCertificates error_certificates(const LisBasis& b) {
  return {0.5 * b.residual, 0.25 * b.residual};
}

int pick_rank(const Vec& eigenvalues, double residual_threshold) {
  const int d = static_cast<int>(eigenvalues.size());
  if (d < 1) throw std::invalid_argument("pick_rank: empty spectrum");
  for (int r = 1; r < d; ++r) {
    if (clipped_tail_sum(eigenvalues, r) <= residual_threshold) return r;
  }
  return d;
}

TailCompatibility check_tail_compatibility(const Transport& t,
                                           LikelihoodShape lik) {
  using G = TailClass::Growth;
  const TailClass tc = t.tail_class();
  const bool sub_exponential = tc.growth == G::ExpOfLinear || tc.growth == G::Bounded;
  const bool heavy_alpha_gt2 =
      tc.growth == G::ExpOfQuadraticOverAlpha && tc.alpha > 2.0;

  if (lik == LikelihoodShape::BoundedPolyGrad && sub_exponential) {
    return TailCompatibility::FinitePropI;
  }
  if (lik == LikelihoodShape::LipschitzLogOrLinearGaussian &&
      (sub_exponential || heavy_alpha_gt2)) {
    return TailCompatibility::FinitePropII;
  }
  if (lik == LikelihoodShape::CompactSupportGrad) {
    return TailCompatibility::FinitePropIII;
  }
  return TailCompatibility::Unknown;
}

const char* to_string(TailCompatibility c) {
  switch (c) {
    case TailCompatibility::FinitePropI: return "finite-scenario-1";
    case TailCompatibility::FinitePropII: return "finite-scenario-2";
    case TailCompatibility::FinitePropIII: return "finite-scenario-3";
    default: return "unknown";
  }
}

}  // namespace plis
