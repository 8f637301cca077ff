#include "metasir/analytic_moments.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace metasir::analytic {
namespace {

using cplx = std::complex<double>;
using quad::QuadResult;

constexpr double kRatio = kB2 / kB1;  // 48/25
// exp(-v) v^3 is below 1e-28 past this point; truncating the y-range here
// keeps the Kronrod nodes on the part of the interval that carries mass.
constexpr double kVCut = 80.0;

/// Collects convergence flags and evaluation counts across nesting levels.
struct Tracker {
  bool converged = true;
  std::size_t evaluations = 0;

  QuadResult note(QuadResult r) {
    evaluations += r.evaluations;
    if (!r.ok() || !std::isfinite(std::abs(r.value))) converged = false;
    return r;
  }
};

/// int_a^b f(v) dv. For fractional p the integrand behaves like v^p at the
/// origin; v = u^4 turns that into u^(4p+3), smooth enough for Kronrod.
QuadResult integrate_v(const quad::Integrand& f, double a, double b, double p,
                       const MomentOptions& o) {
  if (p == std::floor(p)) return quad::integrate(f, a, b, o.inner, o.budget);
  auto g = [&](double u) -> std::complex<double> {
    const double u2 = u * u;
    return f(u2 * u2) * (4.0 * u2 * u);
  };
  return quad::integrate(g, std::sqrt(std::sqrt(a)), std::sqrt(std::sqrt(b)), o.inner, o.budget);
}

/// int_lower^inf f(s) ds for f decaying like s^-decay, decay > 1. The range
/// past L = lower + 2 scale is mapped by s = L t^-m, m = 1/(decay - 1), which
/// turns such a tail into a bounded integrand on (0, 1].
QuadResult integrate_power_tail(const quad::Integrand& f, double lower, double scale,
                                double decay, quad::Tolerance tol, std::size_t budget) {
  const double cut = lower + 2.0 * scale;
  const double m = 1.0 / (decay - 1.0);
  QuadResult head = quad::integrate(f, lower, cut, tol, budget);
  auto g = [&](double t) -> std::complex<double> {
    if (t == 0.0) return 0.0;
    const double s = cut * std::pow(t, -m);
    if (!std::isfinite(s)) return 0.0;
    return f(s) * (m * s / t);
  };
  const QuadResult tail = quad::integrate(g, 0.0, 1.0, tol, budget);
  head.value += tail.value;
  head.abs_error += tail.abs_error;
  head.evaluations += tail.evaluations;
  if (!tail.ok()) head.status = tail.status;
  return head;
}

MomentValue finish(const QuadResult& outer, const Tracker& t) {
  MomentValue m;
  m.value = outer.value;
  m.abs_error = outer.abs_error;
  m.converged = t.converged && outer.ok() && std::isfinite(std::abs(outer.value));
  return m;
}

// ---------------------------------------------------------------------------
// Uplink. After the substitutions s = z x and v = z y, the exponent
// z * int f_b(z, x) dx becomes
//   Psi(z) = B1^-1 int_0^inf K(s) int_0^s e^-v g(w) dv ds,
//   w = theta z^(alpha/2) s^(-alpha/2) P(v) / P(z),  P(u) = min(u, S)^p,
// with p = alpha eps / 2, g(w) = 1 - (1 + w)^-b and S = inf for plain FPC.
// The peak-power cap enters only through the clamp at S.

struct UplinkKernel {
  cplx b;
  double theta;
  double alpha;
  double p;
  double cap;  // S, +inf without truncation
};

double uplink_log_base(const UplinkKernel& k, double z) {
  const double half_alpha = 0.5 * k.alpha;
  if (k.p == 0.0) return std::log(k.theta) + half_alpha * std::log(z);
  if (z <= k.cap) return std::log(k.theta) + (half_alpha - k.p) * std::log(z);
  return std::log(k.theta) + half_alpha * std::log(z) - k.p * std::log(k.cap);
}

cplx uplink_exponent(const UplinkKernel& k, double z, const MomentOptions& o,
                     Tracker& t) {
  const double log_base = uplink_log_base(k, z);
  const double half_alpha = 0.5 * k.alpha;

  auto inner = [&](double s) -> cplx {
    const double log_s_term = log_base - half_alpha * std::log(s);
    if (k.p == 0.0) {
      return -std::expm1(-s) * detail::one_minus_pow(std::exp(log_s_term), k.b);
    }
    auto f = [&](double v) -> cplx {
      const double log_w = log_s_term + k.p * std::log(std::min(v, k.cap));
      return std::exp(-v) * detail::one_minus_pow(std::exp(log_w), k.b);
    };
    const double hi = std::min(s, kVCut);
    if (k.cap < hi) {
      return t.note(integrate_v(f, 0.0, k.cap, k.p, o)).value +
             t.note(quad::integrate(f, k.cap, hi, o.inner, o.budget)).value;
    }
    return t.note(integrate_v(f, 0.0, hi, k.p, o)).value;
  };

  // w(s) = 1 at v = 1 marks the transition the s-integral has to resolve.
  const double log_w_unit = log_base + k.p * std::log(std::min(1.0, k.cap));
  const double scale = std::max(1.0, std::exp(log_w_unit / half_alpha));
  const auto mid = t.note(integrate_power_tail(
      [&](double s) { return detail::cell_ratio(s) * inner(s); }, 0.0,
      std::isfinite(scale) ? scale : 1.0, half_alpha, o.middle, o.budget));
  return mid.value / kB1;
}

MomentValue uplink_core(const UplinkKernel& k, const MomentOptions& o) {
  Tracker t;
  if (k.b == cplx{0.0, 0.0}) return {cplx{1.0, 0.0}, 0.0, true};

  // Full inversion without a cap: Psi does not depend on z and the z-integral
  // of e^-z is exactly one.
  if (std::isinf(k.cap) && k.p == 0.5 * k.alpha) {
    const cplx psi = uplink_exponent(k, 1.0, o, t);
    MomentValue m;
    m.value = std::exp(-psi);
    m.abs_error = std::abs(m.value) * o.middle.rel;
    m.converged = t.converged;
    return m;
  }

  auto outer = [&](double z) -> cplx { return std::exp(-z - uplink_exponent(k, z, o, t)); };
  // Past z ~ 50 the integrand is below e^-50, so a far cap needs no split.
  if (k.cap > 50.0) {
    return finish(quad::integrate_semi_infinite(outer, o.outer, o.budget), t);
  }
  QuadResult lo = quad::integrate(outer, 0.0, k.cap, o.outer, o.budget);
  QuadResult hi = quad::integrate_semi_infinite(outer, o.outer, o.budget, k.cap, 1.0);
  lo.value += hi.value;
  lo.abs_error += hi.abs_error;
  if (!hi.ok()) lo.status = hi.status;
  return finish(lo, t);
}

// ---------------------------------------------------------------------------
// Downlink. With v = z y the exponent z * int_1^inf f(z, x) dx is
//   z B1^-1 int_1^inf int_0^inf e^-v g(theta z^-p v^p x^(-alpha/2)) dv dx.

cplx downlink_exponent(cplx b, double theta, double alpha, double p, double z,
                       const MomentOptions& o, Tracker& t) {
  const double half_alpha = 0.5 * alpha;
  const double log_base = std::log(theta) - p * std::log(z);
  auto inner = [&](double x) -> cplx {
    const double log_x_term = log_base - half_alpha * std::log(x);
    if (p == 0.0) return detail::one_minus_pow(std::exp(log_x_term), b);
    auto f = [&](double v) -> cplx {
      return std::exp(-v) * detail::one_minus_pow(std::exp(log_x_term + p * std::log(v)), b);
    };
    return t.note(integrate_v(f, 0.0, kVCut, p, o)).value;
  };
  const double scale = std::max(1.0, std::exp(log_base / half_alpha));
  const auto mid = t.note(integrate_power_tail(inner, 1.0, std::isfinite(scale) ? scale : 1.0,
                                               half_alpha, o.middle, o.budget));
  return z * mid.value / kB1;
}

// ---------------------------------------------------------------------------
// Scalar optimization used by both optimizers.

double golden_section(const std::function<double(double)>& f, double lo, double hi,
                      double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Minimizes f on [lo, hi]. A 5-point pre-scan locates the bracket; if the
/// scan is not unimodal the search falls back to a grid with spacing tol.
double minimize_on_interval(const std::function<double(double)>& f, double lo, double hi,
                            double tol) {
  constexpr int kScan = 5;
  std::vector<double> xs(kScan), fs(kScan);
  for (int i = 0; i < kScan; ++i) {
    xs[i] = lo + (hi - lo) * i / (kScan - 1);
    fs[i] = f(xs[i]);
  }
  const auto best = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  bool unimodal = true;
  for (int i = 0; i < best; ++i) unimodal = unimodal && fs[i] >= fs[i + 1];
  for (int i = best; i + 1 < kScan; ++i) unimodal = unimodal && fs[i] <= fs[i + 1];
  if (!unimodal) {
    double arg = xs[best], val = fs[best];
    const int steps = static_cast<int>(std::ceil((hi - lo) / tol));
    for (int i = 0; i <= steps; ++i) {
      const double x = lo + (hi - lo) * i / steps;
      const double v = f(x);
      if (v < val) {
        val = v;
        arg = x;
      }
    }
    return arg;
  }
  const double a = xs[std::max(best - 1, 0)];
  const double b = xs[std::min(best + 1, kScan - 1)];
  return golden_section(f, a, b, tol);
}

}  // namespace

namespace detail {

double cell_ratio(double s) {
  if (s < 1e-6) return kRatio * (1.0 + 0.5 * (1.0 - kRatio) * s);
  return std::expm1(-s * kRatio) / std::expm1(-s);
}

double cell_ratio_u(double u) {
  const double eta = 1.0 - u;
  if (eta < 1e-6) return kRatio * (1.0 + 0.5 * (1.0 - kRatio) * eta);
  if (u <= 0.0) return 1.0;
  return -std::expm1(kRatio * std::log(u)) / eta;
}

cplx one_minus_exp_neg(double l, cplx b) {
  if (b.imag() == 0.0) return {-std::expm1(-b.real() * l), 0.0};
  // -expm1(c) for complex c = x + iy without cancellation when |c| is small.
  const double x = -b.real() * l;
  const double y = -b.imag() * l;
  const double sh = std::sin(0.5 * y);
  const double re = std::expm1(x) * std::cos(y) - 2.0 * sh * sh;
  const double im = std::exp(x) * std::sin(y);
  return {-re, -im};
}

cplx one_minus_pow(double w, cplx b) { return one_minus_exp_neg(std::log1p(w), b); }

}  // namespace detail

MomentOptions MomentOptions::fast() {
  MomentOptions o;
  o.outer = {1e-6, 1e-5};
  o.middle = {1e-7, 1e-6};
  o.inner = {1e-8, 1e-7};
  return o;
}

double uplink_critical_theta(double alpha) {
  // C = B1^-1 int_0^inf K(s) s^(-a) gamma(a, s) ds, a = alpha/2, with the
  // lower incomplete gamma. The tail s > 1 is mapped by s = t^(-m),
  // m = 1/(a-1), which makes its integrand bounded.
  const double a = 0.5 * alpha;
  const double m = 1.0 / (a - 1.0);
  auto scaled_gamma = [a](double s) {  // gamma(a, s) s^-a
    if (s < 1e-6) return 1.0 / a - s / (a + 1.0);
    return boost::math::tgamma_lower(a, s) * std::pow(s, -a);
  };
  auto head = quad::real_integrand(
      [&](double s) { return detail::cell_ratio(s) * scaled_gamma(s); });
  auto tail = quad::real_integrand([&](double t) {
    if (t == 0.0) return m * std::tgamma(a);
    const double s = std::pow(t, -m);
    return m * detail::cell_ratio(s) * boost::math::tgamma_lower(a, s);
  });
  const quad::Tolerance tol{1e-12, 1e-11};
  const double c =
      (quad::integrate(head, 0.0, 1.0, tol).real() + quad::integrate(tail, 0.0, 1.0, tol).real()) /
      kB1;
  return 1.0 / c;
}

bool uplink_mld_finite(double theta, double alpha, double epsilon, double p_hat) {
  if (!(alpha > 2.0)) throw Error(ErrorCode::AlphaOutOfRange, "alpha must be > 2");
  if (theta == 0.0) return true;
  if (std::isfinite(p_hat)) return false;
  const double q = 0.5 * alpha * (1.0 - epsilon);
  if (std::abs(q - 1.0) < 1e-12) return theta < uplink_critical_theta(alpha);
  return q < 1.0;
}

MomentValue uplink_moment(const MomentRequest& req, const MomentOptions& opts) {
  const SystemConfig cfg = validate_config(req.cfg);
  if (req.b == cplx{-1.0, 0.0} && !uplink_mld_finite(cfg.theta, cfg.alpha, cfg.epsilon)) {
    return {cplx{kInf, 0.0}, 0.0, true};
  }
  return uplink_core({req.b, cfg.theta, cfg.alpha, 0.5 * cfg.alpha * cfg.epsilon, kInf},
                     opts);
}

MomentValue uplink_moment_eps1(cplx b, double theta, double alpha,
                               const MomentOptions& opts) {
  if (b == cplx{0.0, 0.0}) return {cplx{1.0, 0.0}, 0.0, true};
  const double half_alpha = 0.5 * alpha;
  const cplx a_coef = detail::one_minus_pow(theta, b);
  // h(x) = b theta (alpha/2) x^(alpha/2-1) / (1 + theta x^(alpha/2))^(b+1)
  auto h = [&](double x) -> cplx {
    const double xa = std::pow(x, half_alpha);
    return b * theta * half_alpha * std::pow(x, half_alpha - 1.0) *
           std::exp(-(b + 1.0) * std::log1p(theta * xa));
  };
  Tracker t;
  // The A-term does not depend on x.
  const auto k0 = t.note(quad::integrate(
      quad::real_integrand(detail::cell_ratio_u), 0.0, 1.0, opts.inner, opts.budget));
  // int_0^1 K(u) u^(x-1) du = 1/x + int_0^1 e(u) u^x du with
  // e(u) = (K(u) - 1)/u = (1 - u^(kRatio-1))/(1 - u), bounded on [0, 1].
  auto excess = [](double u) {
    if (u <= 0.0) return 1.0;
    if (1.0 - u < 1e-6) return kRatio - 1.0;
    return -std::expm1((kRatio - 1.0) * std::log(u)) / (1.0 - u);
  };
  auto u_excess = [&](double x) -> double {
    const auto r = t.note(quad::integrate(
        quad::real_integrand([&, x](double u) { return excess(u) * std::pow(u, x); }), 0.0, 1.0,
        opts.inner, opts.budget));
    return r.value.real();
  };
  // x = v^4 keeps h(x)/x ~ x^(alpha/2-2) integrable without an endpoint
  // singularity.
  auto outer = [&](double v) -> cplx {
    const double v2 = v * v;
    const double x = v2 * v2;
    const cplx hx = h(x);
    return (a_coef * k0.value.real() * 4.0 * v2 * v - hx * (4.0 / v + 4.0 * v2 * v * u_excess(x))) /
           kB1;
  };
  const auto r = quad::integrate(outer, 0.0, 1.0, opts.middle, opts.budget);
  MomentValue m;
  m.value = std::exp(r.value);
  m.abs_error = std::abs(m.value) * r.abs_error;
  m.converged = t.converged && r.ok();
  return m;
}

double uplink_mld_eps1(double theta, double alpha) {
  using boost::math::digamma;
  const double d = 2.0 / alpha;
  const double bracket = 2.0 * d / (1.0 - d) + std::log(2.0) -
                         digamma((1.0 - d) / d) + digamma((1.0 - d) / (2.0 * d));
  const double c = (1.5 - bracket / d) / kB1;
  return std::exp(-theta * c);
}

MomentValue uplink_tfpc_moment(cplx b, double theta, double alpha, double epsilon,
                               double lambda, double p_hat, const MomentOptions& opts) {
  SystemConfig cfg;
  cfg.theta = theta;
  cfg.alpha = alpha;
  cfg.epsilon = epsilon;
  cfg.lambda = lambda;
  cfg.p_hat = p_hat;
  cfg.power_model = PowerModel::tfpc;
  validate_config(cfg);
  if (!cfg.truncated()) return uplink_moment({cfg, b}, opts);
  if (b == cplx{-1.0, 0.0} && !uplink_mld_finite(theta, alpha, epsilon, p_hat)) {
    return {cplx{kInf, 0.0}, 0.0, true};
  }
  const double cap =
      kB1 * lambda * std::numbers::pi * std::pow(p_hat, cfg.delta() / epsilon);
  return uplink_core({b, theta, alpha, 0.5 * alpha * epsilon, cap}, opts);
}

MomentValue downlink_moment(cplx b, double theta, double alpha, double epsilon,
                            const MomentOptions& opts) {
  SystemConfig cfg;
  cfg.theta = theta;
  cfg.alpha = alpha;
  cfg.epsilon = epsilon;
  validate_config(cfg);
  if (b == cplx{0.0, 0.0}) return {cplx{1.0, 0.0}, 0.0, true};
  const double p = 0.5 * alpha * epsilon;
  Tracker t;
  auto outer = [&](double z) -> cplx {
    return std::exp(-z - downlink_exponent(b, theta, alpha, p, z, opts, t));
  };
  return finish(quad::integrate_semi_infinite(outer, opts.outer, opts.budget), t);
}

MomentValue moment(const SystemConfig& cfg, cplx b, const MomentOptions& opts) {
  validate_config(cfg);
  if (cfg.direction == Direction::downlink) {
    return downlink_moment(b, cfg.theta, cfg.alpha, cfg.epsilon, opts);
  }
  if (cfg.truncated()) {
    return uplink_tfpc_moment(b, cfg.theta, cfg.alpha, cfg.epsilon, cfg.lambda,
                              cfg.p_hat, opts);
  }
  return uplink_moment({cfg, b}, opts);
}

double mld_constant(double theta, double alpha) {
  const double d = 2.0 / alpha;
  return theta * d / (kB1 * (1.0 - d));
}

double critical_theta(double alpha) {
  const double d = 2.0 / alpha;
  return kB1 * (1.0 / d - 1.0);
}

bool downlink_mld_finite(double theta, double alpha, double epsilon) {
  const double d = 2.0 / alpha;
  if (epsilon > d) return false;
  if (epsilon == 0.0) return theta < critical_theta(alpha);
  return true;
}

double log_mld_integral(double k, double rho) {
  if (rho == 0.0) return k < 1.0 ? -std::log1p(-k) : kInf;
  if (rho == 1.0) return k;
  if (rho > 1.0) return kInf;
  const double q = 1.0 - rho;
  // Exponent phi(y) = k y^q - y peaks at y* = (k q)^(1/rho).
  const double log_peak_y = std::log(k * q) / rho;
  if (log_peak_y > 700.0) return kInf;
  const double y_peak = std::exp(log_peak_y);
  const double phi_peak = y_peak * rho / q;
  auto f = quad::real_integrand(
      [&](double y) { return std::exp(k * std::pow(y, q) - y - phi_peak); });
  const quad::Tolerance tol{1e-13, 1e-12};
  const double left = quad::integrate(f, 0.0, y_peak, tol).real();
  const double right =
      quad::integrate_semi_infinite(f, tol, quad::kDefaultBudget, y_peak, 1.0).real();
  return phi_peak + std::log(left + right);
}

double downlink_mld(double theta, double alpha, double epsilon) {
  if (!(alpha > 2.0)) throw Error(ErrorCode::AlphaOutOfRange, "alpha must be > 2");
  if (!downlink_mld_finite(theta, alpha, epsilon)) return kInf;
  const double rho = epsilon * alpha / 2.0;
  const double k = mld_constant(theta, alpha) * std::tgamma(1.0 + rho);
  return std::exp(log_mld_integral(k, rho));
}

double downlink_mld_closed(double theta, double alpha, MldCase which) {
  const double c = mld_constant(theta, alpha);
  switch (which) {
    case MldCase::eps0:
      return theta < critical_theta(alpha) ? 1.0 / (1.0 - c) : kInf;
    case MldCase::eps_half_delta: {
      // int_0^inf exp(k sqrt(y) - y) dy with k = c Gamma(3/2).
      const double half_sqrt_pi = 0.5 * std::sqrt(std::numbers::pi);
      const double k = c * half_sqrt_pi;
      return 1.0 + k * half_sqrt_pi * std::exp(0.25 * k * k) * std::erfc(-0.5 * k);
    }
    case MldCase::eps_delta:
      return std::exp(c);
  }
  return kInf;
}

double epsilon_opt_uplink(double theta, double alpha, const MomentOptions& opts) {
  auto neg_m1 = [&](double eps) {
    SystemConfig cfg;
    cfg.theta = theta;
    cfg.alpha = alpha;
    cfg.epsilon = eps;
    return -uplink_moment({cfg, cplx{1.0, 0.0}}, opts).value.real();
  };
  return minimize_on_interval(neg_m1, 0.0, 1.0, 1e-3);
}

double rho_opt_downlink(double c) {
  if (!(c > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "c must be positive");
  auto objective = [c](double rho) {
    return log_mld_integral(c * std::tgamma(1.0 + rho), rho);
  };
  return minimize_on_interval(objective, 1e-3, 1.0, 1e-3);
}

}  // namespace metasir::analytic
