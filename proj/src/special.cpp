#include "plis/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace plis {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Continued fraction K(a_n / b_n) by the modified Lentz recurrence. The
// coefficient callback fills (a_n, b_n) for n = 1, 2, ...
template <typename Coeffs>
double lentz_cf(Coeffs coeffs, int max_terms) {
  double f = kTiny, C = kTiny, D = 0.0;
  for (int n = 1; n <= max_terms; ++n) {
    double a, b;
    coeffs(n, a, b);
    D = b + a * D;
    if (D == 0.0) D = kTiny;
    C = b + a / C;
    if (C == 0.0) C = kTiny;
    D = 1.0 / D;
    const double delta = C * D;
    f *= delta;
    if (std::fabs(delta - 1.0) < 3e-16) return f;
  }
  return f;  // asymptotic regimes may stall at ~1e-15; callers tolerate it
}

}  // namespace

double erfcx(double x) {
  if (x < 5.0) return std::exp(x * x) * std::erfc(x);
  // Laplace continued fraction sqrt(pi) e^{x^2} erfc(x)
  //   = 1/(x + 1/(2x + 2/(x + 3/(2x + ...)))),  A&S 7.1.14.
  const double cf = lentz_cf(
      [x](int n, double& a, double& b) {
        a = (n == 1) ? 1.0 : n - 1.0;
        b = (n % 2 == 1) ? x : 2.0 * x;
      },
      400);
  return cf / std::sqrt(kPi);
}

double log_ndtr(double z) {
  if (z >= -1.0) {
    // erfc(z/sqrt2) <= 1.84 here, no cancellation worth worrying about.
    return std::log1p(-0.5 * std::erfc(z / kSqrt2));
  }
  return -0.5 * z * z + std::log(0.5 * erfcx(-z / kSqrt2));
}

double ndtr(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double inv_log_ndtr(double L) {
  if (!(L < 0.0)) throw std::domain_error("inv_log_ndtr: L must be < 0");
  if (L == kNegInf) throw std::domain_error("inv_log_ndtr: L = -inf");
  double z;
  if (L < -5.0) {
    // Tail seed from log Phi(z) ~ -z^2/2 - log(|z| sqrt(2 pi)).
    double t = std::sqrt(-2.0 * L);
    for (int i = 0; i < 3; ++i)
      t = std::sqrt(std::max(-2.0 * (L + std::log(t * kSqrt2Pi)), 1e-12));
    z = -t;
  } else {
    z = 0.0;
  }
  // h(z) = log Phi(z) - L is concave increasing, so Newton converges from
  // any start once safeguarded against the flat right tail.
  for (int it = 0; it < 80; ++it) {
    const double h = log_ndtr(z) - L;
    if (std::fabs(h) <= 1e-15 * std::max(1.0, std::fabs(L))) break;
    const double hp = std::exp(log_normal_pdf(z) - log_ndtr(z));
    double step = h / hp;
    step = std::clamp(step, -10.0, 10.0);
    const double znew = z - step;
    if (znew == z) break;
    z = znew;
  }
  return z;
}

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double log_sum_exp(const double* v, std::size_t n) {
  double m = kNegInf;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

double log_sum_exp(const std::vector<double>& v) {
  return log_sum_exp(v.data(), v.size());
}

double log_mean_exp(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("log_mean_exp: empty");
  return log_sum_exp(v) - std::log(static_cast<double>(v.size()));
}

double log1mexp(double x) {
  if (x >= 0.0) throw std::domain_error("log1mexp: x must be < 0");
  if (x > -kLog2) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

namespace {

// Lower-tail series: P(a,x) = x^a e^{-x} / Gamma(a+1) * sum, sum >= 1.
double log_gamma_p_series(double a, double x) {
  double ap = a, del = 1.0 / a, sum = del;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (del < sum * 1e-17) break;
  }
  return a * std::log(x) - x - std::lgamma(a) + std::log(sum);
}

// Upper-tail continued fraction, valid for x >= a + 1.
double log_gamma_q_cf(double a, double x) {
  const double cf = lentz_cf(
      [a, x](int n, double& an, double& bn) {
        an = (n == 1) ? 1.0 : -(n - 1.0) * (n - 1.0 - a);
        bn = x + 2.0 * n - 1.0 - a;
      },
      500);
  return a * std::log(x) - x - std::lgamma(a) + std::log(cf);
}

// For small integer a the upper tail is a finite sum:
// Q(k, x) = e^{-x} sum_{j<k} x^j/j!. Exact and cheap; a = 2 is the inner
// loop of every exponential-power transport with p = 1/2.
bool small_int_a(double a, int& k) {
  const double r = std::round(a);
  if (std::fabs(a - r) < 1e-13 && r >= 1.0 && r <= 8.0) {
    k = static_cast<int>(r);
    return true;
  }
  return false;
}

double log_gamma_q_int(int k, double x) {
  if (x <= 0.0) return 0.0;
  if (k == 1) return -x;
  if (k == 2) return -x + std::log1p(x);
  double terms[8];
  const double lx = std::log(x);
  for (int j = 0; j < k; ++j) terms[j] = j * lx - std::lgamma(j + 1.0);
  return -x + log_sum_exp(terms, static_cast<std::size_t>(k));
}

}  // namespace

double log_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("log_gamma_q: a must be > 0");
  if (x <= 0.0) return 0.0;
  int k;
  if (small_int_a(a, k)) return log_gamma_q_int(k, x);
  if (x >= a + 1.0) return log_gamma_q_cf(a, x);
  return log1mexp(log_gamma_p_series(a, x));
}

double log_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("log_gamma_p: a must be > 0");
  if (x <= 0.0) return kNegInf;
  if (x < a + 1.0) return log_gamma_p_series(a, x);
  const double lq = log_gamma_q(a, x);
  if (lq >= 0.0) return kNegInf;
  return log1mexp(lq);
}

double gamma_q_inv_log(double a, double log_q) {
  if (!(log_q < 0.0)) throw std::domain_error("gamma_q_inv_log: log_q >= 0");
  const bool lower_half = log_q > -kLog2;  // Q > 1/2, solve in P space
  const double log_p = lower_half ? log1mexp(log_q) : 0.0;

  double x;
  if (lower_half) {
    // P(a,x) ~ x^a / Gamma(a+1) for small x.
    x = std::exp((log_p + std::lgamma(a + 1.0)) / a);
  } else if (log_q < -2.0) {
    // Q(a,x) ~ x^{a-1} e^{-x} / Gamma(a): fixed-point for the tail root.
    x = std::max(-log_q - std::lgamma(a), 1.0);
    for (int i = 0; i < 4; ++i)
      x = std::max(-log_q - std::lgamma(a) + (a - 1.0) * std::log(x), 0.5);
  } else {
    x = a;  // near the median
  }

  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    double f, fp_sign;  // f in log space; derivative sign depends on branch
    const double log_dens = (a - 1.0) * std::log(x) - x - std::lgamma(a);
    if (lower_half) {
      const double lp = log_gamma_p(a, x);
      f = lp - log_p;
      fp_sign = std::exp(log_dens - lp);  // d log P / dx > 0
    } else {
      const double lq = log_gamma_q(a, x);
      f = lq - log_q;
      fp_sign = -std::exp(log_dens - lq);  // d log Q / dx < 0
    }
    if (f > 0.0) {
      if (lower_half) hi = std::min(hi, x); else lo = std::max(lo, x);
    } else {
      if (lower_half) lo = std::max(lo, x); else hi = std::min(hi, x);
    }
    if (std::fabs(f) <= 1e-13 * std::max(1.0, std::fabs(log_q))) return x;
    double xn = x - f / fp_sign;
    if (!(xn > lo && xn < hi) || !std::isfinite(xn)) {
      xn = std::isfinite(hi) ? 0.5 * (lo + hi) : std::max(2.0 * x, x + 1.0);
    }
    if (std::fabs(xn - x) <= 1e-15 * (1.0 + x)) return xn;
    x = xn;
  }
  return x;
}

namespace {

// Incomplete-beta continued fraction (the standard even/odd split).
double betacf(double a, double b, double u) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  return lentz_cf(
      [&](int n, double& an, double& bn) {
        bn = 1.0;
        if (n == 1) {
          an = 1.0;
        } else if (n % 2 == 0) {  // d_{2m+1}, m = (n-2)/2
          const double m = 0.5 * (n - 2);
          an = -(a + m) * (qab + m) * u / ((a + 2.0 * m) * (qap + 2.0 * m));
        } else {  // d_{2m}, m = (n-1)/2
          const double m = 0.5 * (n - 1);
          an = m * (b - m) * u / ((qam + 2.0 * m) * (a + 2.0 * m));
        }
      },
      400);
}

double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace

double log_beta_inc(double a, double b, double log_u, double log_1mu) {
  if (log_u >= 0.0) return 0.0;     // u = 1
  if (log_u == kNegInf) return kNegInf;
  const double u = std::exp(log_u);
  const double omu = std::exp(log_1mu);
  if (u < (a + 1.0) / (a + b + 2.0)) {
    return a * log_u + b * log_1mu - std::log(a) - lbeta(a, b) +
           std::log(betacf(a, b, u));
  }
  // Mirror: I_u(a,b) = 1 - I_{1-u}(b,a).
  const double other = b * log_1mu + a * log_u - std::log(b) - lbeta(b, a) +
                       std::log(betacf(b, a, omu));
  if (other >= 0.0) return kNegInf;
  return log1mexp(other);
}

double student_t_log_sf(double nu, double x) {
  if (x < 0.0) throw std::domain_error("student_t_log_sf: x must be >= 0");
  if (x == 0.0) return -kLog2;
  // S(x) = I_u(nu/2, 1/2) / 2 with u = nu/(nu + x^2).
  const double log_npx2 = (x > 1e8) ? 2.0 * std::log(x) + std::log1p(nu / (x * x))
                                    : std::log(nu + x * x);
  const double log_u = std::log(nu) - log_npx2;
  const double log_1mu = 2.0 * std::log(x) - log_npx2;
  return -kLog2 + log_beta_inc(0.5 * nu, 0.5, log_u, log_1mu);
}

double student_t_log_pdf(double nu, double x) {
  const double lc = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                    0.5 * std::log(nu * kPi);
  return lc - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

double student_t_sf_inv_log(double nu, double log_s) {
  if (!(log_s <= -kLog2 + 1e-15))
    throw std::domain_error("student_t_sf_inv_log: log_s must be <= log(1/2)");
  if (log_s >= -kLog2) return 0.0;
  double x;
  if (log_s < -2.5) {
    // S(x) ~ A nu^{(nu-1)/2} x^{-nu} with A the density normalizer.
    const double logA = std::lgamma(0.5 * (nu + 1.0)) -
                        std::lgamma(0.5 * nu) - 0.5 * std::log(nu * kPi);
    x = std::exp((logA + 0.5 * (nu - 1.0) * std::log(nu) - log_s) / nu);
  } else {
    x = 1.0;
  }
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double f = student_t_log_sf(nu, x) - log_s;
    if (f > 0.0) lo = std::max(lo, x); else hi = std::min(hi, x);
    if (std::fabs(f) <= 1e-13 * std::max(1.0, std::fabs(log_s))) return x;
    const double fp = -std::exp(student_t_log_pdf(nu, x) -
                                student_t_log_sf(nu, x));
    double xn = x - f / fp;
    if (!(xn > lo && xn < hi) || !std::isfinite(xn)) {
      xn = std::isfinite(hi) ? 0.5 * (lo + hi) : std::max(2.0 * x, x + 1.0);
    }
    if (std::fabs(xn - x) <= 1e-15 * (1.0 + x)) return xn;
    x = xn;
  }
  return x;
}

}  // namespace plis
