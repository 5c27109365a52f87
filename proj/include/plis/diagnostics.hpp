#pragma once

#include <vector>

#include "plis/transport.hpp"

namespace plis {

// Integrated autocorrelation time of a scalar series by Geyer's initial
// monotone positive sequence: tau = 1 + 2 sum rho_k, with the sum truncated
// at the first non-positive pair of consecutive autocorrelations and the
// pair sums forced monotone non-increasing. Floored at 1. A constant series
// gets tau = 1 and sets *degenerate when provided. Requires length >= 100.
double iact(const std::vector<double>& series, bool* degenerate = nullptr);

// Per-coordinate IACTs of a sample matrix (one coordinate per row, one
// sample per column) plus their mean. `sd` is filled by replicate
// aggregation, not here.
struct IactReport {
  Vec per_coordinate;
  double tau_bar = 0.0;
  double sd = 0.0;                 // across replicates, 0 for a single chain
  std::vector<int> window;         // truncation lag per coordinate
  std::vector<bool> degenerate;    // constant-series flag per coordinate
};

IactReport iact_report(const Mat& samples);

// Mean and relative spread of replicate IACT estimates; mirrors the
// tabulated "mean +- standard deviation over seeds" presentation. Mixing is
// flagged unstable when the relative standard deviation exceeds 1.
struct ReplicateIact {
  double mean = 0.0;
  double sd = 0.0;
  bool unstable = false;
};

ReplicateIact aggregate_iact(const std::vector<double>& replicate_taus);

// IACT in leapfrog-step units, the comparable cost unit when trajectories
// take n_leapfrog gradient evaluations per proposal.
inline double iact_in_leapfrog_units(double tau, int n_leapfrog) {
  return tau * n_leapfrog;
}

// Tensor-grid density held as unnormalized log values with a trapezoid
// normalizer; 1D grids leave `y` empty. 2D values are indexed
// log_f[ix * ny + iy].
struct GridDensity {
  Vec x;
  Vec y;
  Vec log_f;
  Vec log_w;        // log trapezoid weight per node (cell volume)
  double log_norm = 0.0;
};

GridDensity make_grid_density(const Vec& x, const Vec& log_f);
GridDensity make_grid_density(const Vec& x, const Vec& y, const Mat& log_f);

// Hellinger distance between two densities tabulated on the same grid:
// sqrt( (1/2) sum (sqrt(a) - sqrt(b))^2 w ) after normalizing both.
// In [0, 1]; throws on mismatched grids.
double hellinger_grid(const GridDensity& a, const GridDensity& b);

// KL divergence D(a || b) on the same grid; +inf when b vanishes where a
// does not.
double kl_grid(const GridDensity& a, const GridDensity& b);

// Per-element empirical quantiles of the conductivity field softplus(x),
// one row per element, one column per requested probability. Needs at
// least 100 samples (columns).
Mat summarize_field(const Mat& x_samples,
                    const std::vector<double>& probs = {0.025, 0.5, 0.975});

}  // namespace plis
