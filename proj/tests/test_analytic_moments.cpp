#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <complex>
#include <numbers>

#include "metasir/analytic_moments.hpp"
#include "metasir/density_moments.hpp"

using namespace metasir;
using namespace metasir::analytic;
using cplx = std::complex<double>;

namespace {

SystemConfig uplink(double alpha, double eps, double theta) {
  SystemConfig c;
  c.alpha = alpha;
  c.epsilon = eps;
  c.theta = theta;
  return c;
}

SystemConfig downlink(double alpha, double eps, double theta) {
  SystemConfig c = uplink(alpha, eps, theta);
  c.direction = Direction::downlink;
  return c;
}

SystemConfig tfpc(double alpha, double eps, double theta, double lambda, double p_hat) {
  SystemConfig c = uplink(alpha, eps, theta);
  c.power_model = PowerModel::tfpc;
  c.lambda = lambda;
  c.p_hat = p_hat;
  return c;
}

double real_moment(const SystemConfig& c, double b) {
  const auto m = moment(c, b);
  CHECK(m.converged);
  return m.value.real();
}

// With b = -1 the uplink exponent is linear in theta:
//   M_-1 = int_0^inf exp(-z + theta C z^q) dz, q = alpha (1 - eps) / 2,
//   C = (4/5) int_0^inf K(s) s^(-alpha/2) gamma(p + 1, s) ds, p = alpha eps / 2,
// K(s) = (1 - e^(-48 s / 25)) / (1 - e^(-s)). Both integrals are done here
// with plain trapezoids in log s and log z.
double uplink_delay_constant(double alpha, double eps) {
  const double a = 0.5 * alpha;
  const double p = a * eps;
  const double r = 48.0 / 25.0;
  double sum = 0.0;
  const double h = 1e-3;
  for (double l = -30.0; l <= 40.0; l += h) {
    const double s = std::exp(l);
    const double k = (s < 1e-8) ? r : -std::expm1(-r * s) / -std::expm1(-s);
    const double g = boost::math::tgamma_lower(p + 1.0, s);
    sum += k * g * std::pow(s, 1.0 - a);
  }
  return sum * h * 0.8;
}

double uplink_delay_oracle(double alpha, double eps, double theta) {
  const double q = 0.5 * alpha * (1.0 - eps);
  const double c = theta * uplink_delay_constant(alpha, eps);
  double sum = 0.0;
  const double h = 1e-3;
  for (double l = -40.0; l <= 6.0; l += h) {
    const double z = std::exp(l);
    sum += std::exp(-z + c * std::pow(z, q)) * z;
  }
  return sum * h;
}

}  // namespace

TEST_CASE("zeroth moment and vanishing threshold") {
  for (const auto& c : {uplink(4.0, 0.5, 1.0), downlink(3.0, 0.5, 1.0),
                        tfpc(4.0, 1.0, 1.0, 0.1, 10.0)}) {
    const auto m = moment(c, 0.0);
    CHECK(m.value == cplx{1.0, 0.0});
    CHECK(m.abs_error == 0.0);
  }
  for (double b : {1.0, 2.0}) {
    CHECK(real_moment(uplink(4.0, 0.5, 1e-8), b) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(real_moment(downlink(4.0, 0.5, 1e-8), b) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(uplink_moment_eps1(b, 1e-8, 4.0).value.real() == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("full-inversion uplink: reduced form agrees with the triple integral") {
  for (double theta : {0.1, 1.0, 10.0}) {
    for (double b : {1.0, 2.0, -1.0}) {
      const auto full = moment(uplink(4.0, 1.0, theta), b);
      const auto reduced = uplink_moment_eps1(b, theta, 4.0);
      CHECK(full.converged);
      CHECK(reduced.converged);
      CHECK(std::abs(full.value - reduced.value) < 1e-5 * std::abs(reduced.value));
    }
  }
  // imaginary orders too
  const auto full = moment(uplink(3.0, 1.0, 1.0), cplx{0.0, 3.0});
  const auto reduced = uplink_moment_eps1(cplx{0.0, 3.0}, 1.0, 3.0);
  CHECK(std::abs(full.value - reduced.value) < 1e-5);
}

TEST_CASE("full-inversion uplink mean local delay closed form") {
  CHECK(uplink_mld_eps1(0.0, 4.0) == 1.0);
  for (double theta : {1.0, 10.0, 100.0}) CHECK(std::isfinite(uplink_mld_eps1(theta, 4.0)));
  // The closed form rounds 48/25 to 2, so it is only close to the exact value.
  const double exact = uplink_moment_eps1(-1.0, 1.0, 4.0).value.real();
  CHECK(uplink_mld_eps1(1.0, 4.0) == doctest::Approx(exact).epsilon(0.02));
  CHECK(exact == doctest::Approx(uplink_delay_oracle(4.0, 1.0, 1.0)).epsilon(1e-5));
}

TEST_CASE("uplink mean local delay classification") {
  // eps = 0 at alpha = 4 and anything with q = alpha (1 - eps) / 2 > 1 diverges
  CHECK_FALSE(uplink_mld_finite(0.1, 4.0, 0.0));
  CHECK_FALSE(uplink_mld_finite(0.01, 3.0, 0.25));
  CHECK(uplink_mld_finite(100.0, 3.0, 0.5));
  CHECK(uplink_mld_finite(1e3, 4.0, 0.6));
  CHECK_FALSE(uplink_mld_finite(0.1, 4.0, 1.0, 100.0));

  const double tc = uplink_critical_theta(4.0);
  CHECK(tc == doctest::Approx(1.0 / uplink_delay_constant(4.0, 0.5)).epsilon(1e-5));
  CHECK(uplink_mld_finite(0.99 * tc, 4.0, 0.5));
  CHECK_FALSE(uplink_mld_finite(tc, 4.0, 0.5));

  const auto inf = moment(uplink(4.0, 0.0, 0.1), -1.0);
  CHECK(std::isinf(inf.value.real()));
  CHECK(inf.converged);
  CHECK(std::isinf(moment(tfpc(4.0, 1.0, 0.1, 1.0, 10.0), -1.0).value.real()));

  // q = 1: M_-1 = 1 / (1 - theta / theta_c)
  CHECK(real_moment(uplink(4.0, 0.5, 0.5 * tc), -1.0) == doctest::Approx(2.0).epsilon(1e-5));
  // q < 1: numeric oracle of the same reduction
  for (auto [alpha, eps, theta] : {std::tuple{4.0, 0.75, 1.0}, {3.0, 0.5, 0.5}, {3.0, 0.8, 2.0}}) {
    CHECK(real_moment(uplink(alpha, eps, theta), -1.0) ==
          doctest::Approx(uplink_delay_oracle(alpha, eps, theta)).epsilon(1e-5));
  }
}

TEST_CASE("truncated power control limits") {
  const double fpc = real_moment(uplink(4.0, 1.0, 1.0), 1.0);
  CHECK(real_moment(tfpc(4.0, 1.0, 1.0, 1.0, 1e8), 1.0) == doctest::Approx(fpc).epsilon(1e-3));
  const double none = real_moment(uplink(4.0, 0.0, 1.0), 1.0);
  CHECK(real_moment(tfpc(4.0, 1.0, 1.0, 1e-8, 10.0), 1.0) ==
        doctest::Approx(none).epsilon(1e-3));
  // lambda p_hat^(delta / eps) = 0.1 * 10^(0.5) in both
  const auto a = moment(tfpc(4.0, 1.0, 1.0, 0.1, 10.0), 2.0);
  const auto b = moment(tfpc(4.0, 1.0, 1.0, 0.1 * std::sqrt(10.0), 1.0), 2.0);
  CHECK(std::abs(a.value - b.value) <= 2.0 * (a.abs_error + b.abs_error) + 1e-12);
  // eps = 0 ignores the cap
  CHECK(real_moment(tfpc(4.0, 0.0, 1.0, 0.1, 1.0), 1.0) == doctest::Approx(none).epsilon(1e-12));
}

TEST_CASE("downlink closed forms") {
  CHECK(critical_theta(3.0) == doctest::Approx(0.625));
  CHECK(linear_to_db(critical_theta(3.0)) == doctest::Approx(-2.04).epsilon(0.01));
  CHECK(critical_theta(4.0) == doctest::Approx(1.25));
  CHECK(std::abs(linear_to_db(critical_theta(4.0)) - 1.0) < 0.1);

  CHECK(real_moment(downlink(4.0, 0.5, 1.0), -1.0) == doctest::Approx(std::exp(0.8)).epsilon(1e-5));
  CHECK(real_moment(downlink(4.0, 0.0, 1.0), -1.0) == doctest::Approx(5.0).epsilon(1e-5));
  CHECK(downlink_mld(1.0, 4.0, 0.0) == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(std::isinf(downlink_mld(1.25, 4.0, 0.0)));
  CHECK(std::isinf(downlink_mld(0.01, 4.0, 0.6)));
  {
    // int_0^inf exp(k sqrt(y) - y) dy with k = c Gamma(3/2), c = 0.8
    const double k = 0.8 * std::tgamma(1.5);
    double sum = 0.0;
    for (double y = 0.5e-4; y < 60.0; y += 1e-4) sum += std::exp(k * std::sqrt(y) - y);
    CHECK(downlink_mld(1.0, 4.0, 0.25) == doctest::Approx(sum * 1e-4).epsilon(1e-6));
    // 2.1884 results when the Gamma(3/2) factor is dropped from k
    const double c = 0.8;
    const double no_gamma = 1.0 + c * std::sqrt(std::numbers::pi) / 2.0 * std::exp(c * c / 4.0) *
                                      std::erfc(-c / 2.0);
    CHECK(no_gamma == doctest::Approx(2.1884).epsilon(1e-4));
    CHECK(downlink_mld(1.0, 4.0, 0.25) < no_gamma - 0.1);
  }
  CHECK(downlink_mld_closed(0.0, 4.0, MldCase::eps_delta) == 1.0);
  CHECK(std::isinf(downlink_mld_closed(0.625, 3.0, MldCase::eps0)));

  for (double alpha : {3.0, 4.0}) {
    const double d = 2.0 / alpha;
    CHECK(downlink_mld_closed(0.5, alpha, MldCase::eps0) ==
          doctest::Approx(downlink_mld(0.5, alpha, 0.0)).epsilon(1e-6));
    CHECK(downlink_mld_closed(0.5, alpha, MldCase::eps_half_delta) ==
          doctest::Approx(downlink_mld(0.5, alpha, d / 2)).epsilon(1e-6));
    CHECK(downlink_mld_closed(0.5, alpha, MldCase::eps_delta) ==
          doctest::Approx(downlink_mld(0.5, alpha, d)).epsilon(1e-6));
  }
  // the triple integral at eps = 0 reproduces the rational form
  for (double theta : {0.1, 0.3, 0.5}) {
    CHECK(real_moment(downlink(3.0, 0.0, theta), -1.0) ==
          doctest::Approx(downlink_mld_closed(theta, 3.0, MldCase::eps0)).epsilon(1e-5));
  }
}

TEST_CASE("moment ordering, variance and imaginary orders") {
  for (const auto& c : {uplink(4.0, 0.0, 1.0), uplink(4.0, 0.5, 10.0), uplink(3.0, 1.0, 0.3),
                        downlink(4.0, 0.5, 1.0), downlink(3.0, 1.0, 3.0),
                        tfpc(4.0, 1.0, 1.0, 0.1, 3.0)}) {
    const double m1 = real_moment(c, 1.0);
    const double m2 = real_moment(c, 2.0);
    const double m3 = real_moment(c, 3.0);
    CHECK(m1 > 0.0);
    CHECK(m1 < 1.0);
    CHECK(m2 <= m1);
    CHECK(m3 <= m2);
    CHECK(m2 - m1 * m1 >= -1e-6);
    CHECK(real_moment(c, 0.5) >= m1);
    for (double t : {0.1, 1.0}) {
      const auto m = moment(c, cplx{0.0, t});
      CHECK(std::abs(m.value) <= 1.0 + m.abs_error);
    }
    // large t through the tabulated density, which is checked against the
    // nested integrals below
    const DensityMoments dm(c);
    for (double t : {0.1, 1.0, 10.0, 100.0}) {
      const auto m = dm(cplx{0.0, t});
      CHECK(std::abs(m.value) <= 1.0 + m.abs_error);
    }
    CHECK(std::abs(moment(c, cplx{0.0, 1e-7}).value - 1.0) < 1e-6);
  }
}

TEST_CASE("FPC moments do not depend on the intensity") {
  for (auto c : {uplink(4.0, 0.5, 1.0), downlink(3.0, 0.5, 1.0)}) {
    const double ref = real_moment(c, 1.0);
    c.lambda = 37.0;
    CHECK(real_moment(c, 1.0) == ref);
  }
}

TEST_CASE("tabulated-density moments agree with the nested integrals") {
  for (const auto& c : {uplink(4.0, 0.0, 1.0), uplink(4.0, 0.5, 1.0), uplink(3.0, 0.75, 0.5),
                        downlink(4.0, 0.5, 1.0), downlink(3.0, 0.0, 2.0),
                        tfpc(4.0, 1.0, 1.0, 0.1, 10.0), tfpc(4.0, 0.5, 3.0, 1.0, 1.0)}) {
    const DensityMoments dm(c);
    for (cplx b : {cplx{1.0, 0.0}, cplx{2.0, 0.0}, cplx{0.0, 0.5}, cplx{0.0, 3.0}}) {
      const auto fast = dm(b);
      const auto slow = moment(c, b);
      CHECK(std::abs(fast.value - slow.value) < 1e-5);
    }
    // truncation makes the density jump at tau = 0
    for (double tau : {-3.0, -0.5, -0.01, 0.7, 2.0}) {
      CHECK(dm.scaled_density(tau) == doctest::Approx(dm.scaled_density_exact(tau)).epsilon(1e-7));
    }
  }
  CHECK_THROWS_AS(DensityMoments(uplink(4.0, 0.5, 1.0))(-1.0), Error);
}

TEST_CASE("uplink power-control optimizer") {
  CHECK(epsilon_opt_uplink(100.0, 4.0) < 0.1);
  // M1 is maximized near 0.79 at -20 dB and the optimum moves down with theta
  const double low = epsilon_opt_uplink(0.01, 4.0);
  CHECK(low > 0.7);
  const double eps = epsilon_opt_uplink(1.0, 4.0);
  CHECK(eps < low);
  const double best = real_moment(uplink(4.0, eps, 1.0), 1.0);
  for (double e : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    CHECK(best >= real_moment(uplink(4.0, e, 1.0), 1.0) - 1e-6);
  }
}

TEST_CASE("downlink power-control optimizer") {
  const double small = rho_opt_downlink(1e-3);
  CHECK(small >= 0.45);
  CHECK(small <= 0.55);
  const double large = rho_opt_downlink(1e3);
  CHECK(large >= 0.9);
  CHECK(large <= 1.0);
  for (double c : {0.1, 1.0, 5.0}) {
    const double rho = rho_opt_downlink(c);
    auto objective = [c](double r) { return log_mld_integral(c * std::tgamma(1.0 + r), r); };
    CHECK(objective(rho) <= objective(std::max(rho - 0.05, 1e-3)) + 1e-12);
    if (rho + 0.05 <= 1.0) CHECK(objective(rho) <= objective(rho + 0.05) + 1e-12);
  }
}
