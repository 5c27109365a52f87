#pragma once

#include <memory>
#include <string>
#include <vector>

namespace plis {

enum class MarginalKind {
  Laplace,
  ExpPower,
  Cauchy,
  Pareto,
  StudentT,
  Horseshoe,
  NumericCdf
};

// Tail growth classification of a normalizing transport, used by the LIS
// well-definedness checks. ExpOfLinear covers everything bounded by
// C exp(c|z|) (polynomials included); ExpOfQuadraticOverAlpha covers
// T(z) ~ C exp(z^2/(2 alpha)). NumericCdf tables carry no usable tail
// information and report Unknown.
struct TailClass {
  enum class Growth { ExpOfLinear, ExpOfQuadraticOverAlpha, Bounded, Unknown };
  Growth growth = Growth::Unknown;
  double c = 1.0;
  double alpha = 0.0;
};

// Monotone piecewise-cubic interpolant with Fritsch-Carlson limited slopes.
// Interpolation preserves strict monotonicity of the data, which is what
// makes it usable as a transport component.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;
  double derivative(double x) const;
  // Inverse interpolation; data must be strictly increasing.
  double inverse(double y) const;

  double x_front() const { return x_.front(); }
  double x_back() const { return x_.back(); }
  double y_front() const { return y_.front(); }
  double y_back() const { return y_.back(); }
  bool empty() const { return x_.empty(); }

 private:
  int locate(double x) const;
  std::vector<double> x_, y_, d_;
};

// One univariate prior marginal together with its normalizing transport
// component T = (P^0)^{-1} o Phi^0. All built-in kinds are symmetric about
// zero, so the transport is odd and everything is computed on z >= 0 with
// the sign folded back at the end.
class MarginalPrior {
 public:
  static MarginalPrior laplace(double lambda);
  static MarginalPrior exp_power(double p, double lambda);
  static MarginalPrior cauchy(double gamma);
  static MarginalPrior pareto(double alpha);
  static MarginalPrior student_t(double alpha);
  static MarginalPrior horseshoe(double tau);
  // Tabulated CDF: x strictly increasing, cdf strictly increasing in (0,1).
  static MarginalPrior numeric_cdf(std::vector<double> x,
                                   std::vector<double> cdf);

  MarginalKind kind() const { return kind_; }
  std::string name() const;
  bool symmetric() const { return kind_ != MarginalKind::NumericCdf; }

  // Normalized log density at any real x.
  double log_pdf(double x) const;
  // log P(X > x) for x >= 0.
  double log_sf(double x) const;
  // x >= 0 solving log_sf(x) = ls, for ls <= log(1/2).
  double quantile_from_log_sf(double ls) const;

  // Transport component and its log derivative, evaluated together because
  // most kinds share the expensive part. No saturation guard here; the
  // transport layer owns that policy.
  void transport_eval(double z, double* x, double* log_deriv) const;
  double transport_fwd(double z) const;
  double transport_inv(double x) const;

  TailClass tail_class() const;

  // Closed-form tail asymptotes of T and T', in log form. StudentT borrows
  // the Pareto(alpha = nu) shape: its ratio tends to a constant rather than
  // to 1, which asymptotic_ratio's callers must expect. NumericCdf has none.
  bool has_asymptote() const;
  double asym_log_T(double z) const;
  double asym_log_Tprime(double z) const;

 private:
  MarginalPrior(MarginalKind kind, double a, double b);

  MarginalKind kind_;
  double a_ = 0.0;  // Laplace rate, ExpPower exponent p, Cauchy scale,
                    // Pareto/StudentT index, Horseshoe tau
  double b_ = 0.0;  // ExpPower rate
  std::shared_ptr<const MonotoneCubic> spline_;  // horseshoe, numeric (z->x)
};

}  // namespace plis
