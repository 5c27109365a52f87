#include <cmath>
#include <vector>

#include "doctest.h"
#include "plis/marginal.hpp"
#include "plis/quadrature.hpp"
#include "plis/special.hpp"

using namespace plis;

namespace {

// High-precision reference for T(z) = (P0)^{-1}(Phi(z)) and log T'(z),
// computed from 50-digit CDF inversions.
struct TransportRow {
  double z, t, log_tp;
};

void check_transport(const MarginalPrior& m,
                     const std::vector<TransportRow>& rows, double tol) {
  for (const TransportRow& r : rows) {
    CAPTURE(r.z);
    double x, ld;
    m.transport_eval(r.z, &x, &ld);
    CHECK(x == doctest::Approx(r.t).epsilon(tol));
    CHECK(ld == doctest::Approx(r.log_tp).epsilon(tol));
    // oddness and the two single-value entry points
    CHECK(m.transport_fwd(-r.z) == doctest::Approx(-r.t).epsilon(tol));
    CHECK(m.transport_inv(x) == doctest::Approx(r.z).epsilon(1e-9));
  }
}

double density_mass(const MarginalPrior& m, double lo, double hi) {
  return adaptive_gk([&](double x) { return std::exp(m.log_pdf(x)); }, lo,
                     hi, 1e-13, 1e-12);
}

}  // namespace

TEST_SUITE("marginal") {

TEST_CASE("laplace transport") {
  check_transport(MarginalPrior::laplace(1.0),
                  {{0.5, 0.48276458103367330, 0.13197322838894587},
                   {1, 1.1478744644493182, 0.42208311180459076},
                   {2, 3.0900371531220866, 0.86424580047735921},
                   {3, 5.9145790409504042, 1.1887876883056768}},
                  1e-13);
  check_transport(MarginalPrior::laplace(2.0),
                  {{0.5, 0.24138229051683665, -0.56117395217099944},
                   {1, 0.57393723222465910, -0.27106406875535455},
                   {2, 1.5450185765610433, 0.17109861991741390},
                   {3, 2.9572895204752021, 0.49564050774573149}},
                  1e-13);
  // T'(0) = phi(0)/p0(0) = lambda-free closed form
  double x, ld;
  MarginalPrior::laplace(1.0).transport_eval(0.0, &x, &ld);
  CHECK(x == 0.0);
  CHECK(ld == doctest::Approx(-0.22579135264472743).epsilon(1e-14));
  MarginalPrior::laplace(2.0).transport_eval(0.0, &x, &ld);
  CHECK(ld == doctest::Approx(-0.91893853320467274).epsilon(1e-14));
}

TEST_CASE("exponential power transport") {
  check_transport(MarginalPrior::exp_power(0.5, 1.0),
                  {{0.5, 1.7625323498165475, 1.6699598162402558},
                   {1, 5.5683597947091517, 2.3270930579281597},
                   {2, 23.598352753118306, 3.3251694053508842},
                   {3, 66.026519562839635, 4.0930262348933175}},
                  1e-12);
  check_transport(MarginalPrior::exp_power(1.5, 2.0),
                  {{0.5, 0.23844954770555142, -0.68232829668572038},
                   {1, 0.50633820013630363, -0.56960965183028667},
                   {2, 1.1275375171332740, -0.39564003805306964},
                   {3, 1.8465082245991523, -0.27190147659577200}},
                  1e-12);
}

TEST_CASE("gaussian special case is the identity") {
  // p = 2, lambda = 1/2 is exactly the standard normal
  const MarginalPrior m = MarginalPrior::exp_power(2.0, 0.5);
  for (double z : {-20.0, -3.0, -0.7, 0.0, 1.3, 8.0, 25.0}) {
    CAPTURE(z);
    double x, ld;
    m.transport_eval(z, &x, &ld);
    CHECK(x == doctest::Approx(z).epsilon(1e-11));
    CHECK(std::abs(ld) < 1e-10);
  }
}

TEST_CASE("cauchy transport") {
  check_transport(MarginalPrior::cauchy(1.0),
                  {{0.5, 0.68633681454081131, 0.48677337403412257},
                   {1, 1.8373372014715831, 1.2018825392678090},
                   {2, 13.967730199244547, 3.5044032704609241},
                   {3, 235.80149796046805, 6.6517900188491792}},
                  1e-13);
  check_transport(MarginalPrior::cauchy(0.5),
                  {{0.5, 0.34316840727040566, -0.20637380652582274},
                   {1, 0.91866860073579157, 0.50873535870786370},
                   {2, 6.9838650996222736, 2.8112560899009788},
                   {3, 117.90074898023403, 5.9586428382892339}},
                  1e-13);
  double x, ld;
  MarginalPrior::cauchy(1.0).transport_eval(0.0, &x, &ld);
  CHECK(ld == doctest::Approx(0.22579135264472743).epsilon(1e-14));
}

TEST_CASE("pareto transport") {
  check_transport(MarginalPrior::pareto(1.0),
                  {{0.5, 0.62054835228348497, 0.61473780942261917},
                   {1, 2.1514871875343770, 1.5699575762539090},
                   {2, 20.977894507992829, 3.9542829535994458},
                   {3, 369.39834734495885, 7.1033667292560810}},
                  1e-13);
  check_transport(MarginalPrior::pareto(3.0),
                  {{0.5, 0.17459279139026530, -0.80571753326793939},
                   {1, 0.46612786719141598, -0.29390435538041286},
                   {2, 1.8011005243608600, 0.79564589618327840},
                   {3, 6.1816297859138536, 2.0617017466210352}},
                  1e-13);
}

TEST_CASE("student t transport") {
  // nu = 1 is Cauchy(1)
  check_transport(MarginalPrior::student_t(1.0),
                  {{0.5, 0.68633681454081131, 0.48677337403412257},
                   {1, 1.8373372014715831, 1.2018825392678090},
                   {2, 13.967730199244547, 3.5044032704609241},
                   {3, 235.80149796046805, 6.6517900188491792}},
                  1e-12);
  check_transport(MarginalPrior::student_t(4.0),
                  {{0.5, 0.54124343104003944, 0.11358694168839909},
                   {1, 1.1416266290909542, 0.26698334304224127},
                   {2, 2.8693094146288269, 0.85648488839197169},
                   {3, 6.6202059668158664, 1.7651372917196213}},
                  1e-12);
}

TEST_CASE("horseshoe transport") {
  check_transport(MarginalPrior::horseshoe(1.0),
                  {{0.5, 0.35165064161624486, 0.13942046461995809},
                   {1, 1.2729326911608518, 1.0221770439038047},
                   {2, 11.104431033172890, 3.2821133911303951},
                   {3, 188.13995924790965, 6.4260115029100081}},
                  1e-9);
  check_transport(MarginalPrior::horseshoe(0.5),
                  {{0.5, 0.17582532080812243, -0.55372671593998722},
                   {1, 0.63646634558042588, 0.32902986334385936},
                   {2, 5.5522155165864448, 2.5889662105704498},
                   {3, 94.069979623954826, 5.7328643223500628}},
                  1e-9);
  // far tail, where the spline hands over to the asymptote
  double x, ld;
  MarginalPrior::horseshoe(1.0).transport_eval(5.0, &x, &ld);
  CHECK(x == doctest::Approx(886004.36436393557).epsilon(1e-8));
  CHECK(ld == doctest::Approx(15.340537016279500).epsilon(1e-8));
  MarginalPrior::horseshoe(1.0).transport_eval(8.0, &x, &ld);
  CHECK(x == doctest::Approx(408256153860440.98).epsilon(1e-7));
  CHECK(ld == doctest::Approx(35.737414548130299).epsilon(1e-7));
}

TEST_CASE("horseshoe density and survival spots") {
  const MarginalPrior m = MarginalPrior::horseshoe(1.0);
  struct Row {
    double x, log_sf, log_pdf;
  };
  const Row rows[] = {
      {0.01, -0.72233535355056238, 0.16922229374925144},
      {0.1, -0.88064573468951930, -0.50556904189316741},
      {1, -1.6807525490787889, -2.1438912910988604},
      {10, -3.6796407633468284, -5.9951235140001427},
      {1000, -8.2782771841415536, -15.186033796452402},
      {1e8, -19.791201982446493, -38.211882726398859},
  };
  for (const Row& r : rows) {
    CAPTURE(r.x);
    CHECK(m.log_sf(r.x) == doctest::Approx(r.log_sf).epsilon(1e-8));
    CHECK(m.log_pdf(r.x) == doctest::Approx(r.log_pdf).epsilon(1e-8));
  }
}

TEST_CASE("densities are normalized") {
  // symmetric kinds: 2 * mass on (0, L) + survival at L should be 1
  struct Case {
    MarginalPrior m;
    double cut;
  };
  const Case cases[] = {
      {MarginalPrior::laplace(1.0), 30.0},
      {MarginalPrior::exp_power(0.5, 1.0), 200.0},
      {MarginalPrior::cauchy(1.0), 500.0},
      {MarginalPrior::pareto(3.0), 300.0},
      {MarginalPrior::student_t(4.0), 300.0},
      {MarginalPrior::horseshoe(1.0), 500.0},
  };
  for (const Case& c : cases) {
    CAPTURE(c.m.name());
    const double mass = 2.0 * density_mass(c.m, 1e-9, c.cut) +
                        2.0 * std::exp(c.m.log_sf(c.cut));
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("survival matches density integral") {
  const MarginalPrior m = MarginalPrior::student_t(4.0);
  const double tail = density_mass(m, 2.0, 400.0) + std::exp(m.log_sf(400.0));
  CHECK(std::log(tail) == doctest::Approx(m.log_sf(2.0)).epsilon(1e-8));
}

TEST_CASE("quantile_from_log_sf inverts log_sf") {
  for (const MarginalPrior& m :
       {MarginalPrior::laplace(1.5), MarginalPrior::cauchy(0.5),
        MarginalPrior::pareto(1.0), MarginalPrior::student_t(1.0),
        MarginalPrior::exp_power(1.5, 2.0)}) {
    for (double ls : {-0.7, -3.0, -20.0, -100.0}) {
      CAPTURE(m.name());
      CAPTURE(ls);
      const double x = m.quantile_from_log_sf(ls);
      CHECK(m.log_sf(x) == doctest::Approx(ls).epsilon(1e-9));
    }
  }
}

TEST_CASE("numeric cdf table reproduces its source") {
  // tabulate a logistic CDF and compare the rebuilt transport against the
  // closed form T(z) = log(u/(1-u)) with u = Phi(z)
  std::vector<double> xs, cdf;
  for (int i = -400; i <= 400; ++i) {
    const double x = 0.05 * i;
    xs.push_back(x);
    cdf.push_back(1.0 / (1.0 + std::exp(-x)));
  }
  const MarginalPrior m = MarginalPrior::numeric_cdf(xs, cdf);
  CHECK(m.kind() == MarginalKind::NumericCdf);
  CHECK_FALSE(m.has_asymptote());
  for (double z : {-2.0, -0.5, 0.3, 1.0, 2.5}) {
    CAPTURE(z);
    const double u = ndtr(z);
    const double want = std::log(u / (1.0 - u));
    CHECK(m.transport_fwd(z) == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("monotone cubic interpolation") {
  // data with a flat-ish run; Fritsch-Carlson must not overshoot
  std::vector<double> x = {0, 1, 2, 3, 4, 5};
  std::vector<double> y = {0, 0.1, 0.11, 0.112, 2.0, 10.0};
  const MonotoneCubic f(x, y);
  double prev = f(0.0);
  for (int i = 1; i <= 500; ++i) {
    const double v = f(5.0 * i / 500.0);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(f(x[i]) == doctest::Approx(y[i]).epsilon(1e-14));
    CHECK(f.inverse(y[i]) == doctest::Approx(x[i]).epsilon(1e-10));
  }
}

}  // TEST_SUITE
