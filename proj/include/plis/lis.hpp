#pragma once

#include <vector>

#include "plis/posterior.hpp"

namespace plis {

enum class HSource { ExactTransport, ApproximateTransport };

// Gradient outer-product diagnostic matrix, symmetric PSD up to Monte Carlo
// noise.
struct HMatrix {
  Mat h;
  int n_samples = 0;
  HSource source = HSource::ExactTransport;
};

// H = (1/n) sum_i grad log g(z_i) grad log g(z_i)^T over the given draws
// (one per column). Throws if any draw is infeasible, listing the offenders.
HMatrix estimate_h(const ReferencePosterior& post, const Mat& samples,
                   HSource source = HSource::ExactTransport);

enum class BasisMode { Eigen, Coordinate };

struct LisBasis {
  Mat u_r;
  Mat u_perp;
  Vec eigenvalues;  // spectrum of the symmetrized H, descending
  double residual = 0.0;
  BasisMode mode = BasisMode::Eigen;
  std::vector<int> tau;  // selected coordinates, ascending; coordinate mode only

  int dim() const { return static_cast<int>(u_r.rows()); }
  int rank() const { return static_cast<int>(u_r.cols()); }
};

// Leading r eigenvectors of the symmetrized H, descending eigenvalues, each
// column oriented so its largest-magnitude entry is positive.
LisBasis eigen_basis(const HMatrix& h, int r);

// Selection basis on the r largest diagonal entries (ties to the lower
// index); meant for diagonal transports, where the subspace stays invariant.
LisBasis coordinate_basis(const HMatrix& h, int r);

struct ErrorCertificates {
  double kl_bound = 0.0;
  double hellinger_sq_bound = 0.0;
};

// residual/2 bounds the KL divergence, residual/4 the squared Hellinger
// distance of the subspace-marginalized posterior approximation.
ErrorCertificates error_certificates(const LisBasis& b);

// Smallest rank whose clipped tail sum falls at or below the threshold.
int pick_rank(const Vec& eigenvalues, double residual_threshold);

enum class LikelihoodShape {
  BoundedPolyGrad,               // bounded density, polynomially growing grad log
  LipschitzLogOrLinearGaussian,  // globally Lipschitz log-likelihood
  CompactSupportGrad,            // grad log vanishes outside a compact set
};

enum class TailCompatibility { FinitePropI, FinitePropII, FinitePropIII, Unknown };

// First sufficient condition for trace(H) < inf met by the transport's tail
// growth together with the claimed likelihood shape; Unknown is a warning,
// not an error.
TailCompatibility check_tail_compatibility(const Transport& t,
                                           LikelihoodShape lik);
const char* to_string(TailCompatibility c);

}  // namespace plis
