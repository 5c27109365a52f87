#pragma once

#include <cstddef>
#include <vector>

// Log-domain special functions. Everything here exists to keep Gaussian and
// heavy-tail CDF compositions finite far beyond where the naive formulas
// underflow: log Phi(-38) is about -726, while Phi(-38) itself is not
// representable in double precision.

namespace plis {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log sqrt(2 pi)
constexpr double kSqrt2Pi = 2.5066282746310005024;
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kPi = 3.1415926535897932385;
constexpr double kLog2 = 0.69314718055994530942;

// exp(x^2) erfc(x). Accurate for all x >= 0; for x < 0 it grows like
// 2 exp(x^2) and overflows near x = -26.6, which no caller reaches.
double erfcx(double x);

// log Phi(z) over the whole real line.
double log_ndtr(double z);

// Phi(z).
double ndtr(double z);

// log phi(z) = -z^2/2 - log sqrt(2 pi).
inline double log_normal_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

// z such that log Phi(z) = L, for any L < 0.
double inv_log_ndtr(double L);

// log(e^a + e^b) and friends.
double log_add_exp(double a, double b);
double log_sum_exp(const double* v, std::size_t n);
double log_sum_exp(const std::vector<double>& v);
double log_mean_exp(const std::vector<double>& v);

// log(1 - e^x) for x < 0.
double log1mexp(double x);

// Regularized incomplete gamma, upper and lower, in log space.
double log_gamma_q(double a, double x);
double log_gamma_p(double a, double x);

// x such that Q(a, x) = exp(log_q). Bracketed Newton in log space; accepts
// log_q down to about -740.
double gamma_q_inv_log(double a, double log_q);

// log of the regularized incomplete beta I_u(a, b), with u passed as
// (log u, log(1-u)) so tiny u coming from huge Student-t arguments keeps
// full precision.
double log_beta_inc(double a, double b, double log_u, double log_1mu);

// Student-t with nu degrees of freedom: log P(X > x) for x >= 0, and the
// inverse map from a log survival value back to x.
double student_t_log_sf(double nu, double x);
double student_t_log_pdf(double nu, double x);
double student_t_sf_inv_log(double nu, double log_s);

}  // namespace plis
