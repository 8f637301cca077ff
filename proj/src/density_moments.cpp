#include "metasir/density_moments.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <map>
#include <numbers>

#include "metasir/analytic_moments.hpp"

namespace metasir::analytic {
namespace {

using cplx = std::complex<double>;

constexpr int kN = 16;
constexpr double kPhasePerSub = 10.0;  // radians of oscillation per sub-panel
constexpr double kVCut = 80.0;
constexpr double kFitTol = 1e-14;
constexpr int kMaxDepth = 12;

struct GaussRule {
  std::array<double, kN> x{};
  std::array<double, kN> w{};
};

const GaussRule& gauss_rule() {
  static const GaussRule rule = [] {
    using G = boost::math::quadrature::gauss<double, kN>;
    GaussRule r;
    const auto& a = G::abscissa();
    const auto& w = G::weights();
    for (int i = 0; i < kN / 2; ++i) {
      r.x[kN / 2 - 1 - i] = -a[i];
      r.w[kN / 2 - 1 - i] = w[i];
      r.x[kN / 2 + i] = a[i];
      r.w[kN / 2 + i] = w[i];
    }
    return r;
  }();
  return rule;
}

double log1p_exp(double u) { return u > 36.0 ? u + std::exp(-u) : std::log1p(std::exp(u)); }

/// Width of the strip left of which g_b is replaced by its power series.
double linear_edge(cplx b) { return -20.0 - std::log1p(std::abs(b)); }

/// Leading series coefficients of g_b(y) = b y - b(b+1)/2 y^2 + ...
std::array<cplx, 3> series(cplx b) {
  return {b, -b * (b + 1.0) / 2.0, b * (b + 1.0) * (b + 2.0) / 6.0};
}

}  // namespace

/// g_b(e^u) e^(-delta u) on a lattice of unit panels in u, each split into
/// Gauss-Legendre sub-panels fine enough for the oscillation of g_b.
class DensityMoments::OrderCache {
 public:
  struct Sub {
    double a = 0.0;
    double b = 0.0;
    std::array<double, kN> u{};
    std::array<cplx, kN> wh{};  // quadrature weight times h(u)
  };

  OrderCache(cplx b, double delta, double min_width)
      : b_(b), delta_(delta), min_width_(min_width), coef_(series(b)) {}

  cplx order() const { return b_; }

  cplx h(double u) const {
    if (u < -40.0) {
      const double y = std::exp(u);
      return std::exp((1.0 - delta_) * u) * (coef_[0] + coef_[1] * y);
    }
    return detail::one_minus_exp_neg(log1p_exp(u), b_) * std::exp(-delta_ * u);
  }

  const std::vector<Sub>& panel(long k) const {
    auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    const double a = static_cast<double>(k);
    const double rate = std::abs(b_.imag()) / (1.0 + std::exp(-(a + 1.0)));
    const int m = std::max({1, static_cast<int>(std::ceil(rate / kPhasePerSub)),
                            static_cast<int>(std::ceil(0.5 / min_width_))});
    std::vector<Sub> subs(static_cast<std::size_t>(m));
    const auto& g = gauss_rule();
    for (int j = 0; j < m; ++j) {
      Sub& s = subs[static_cast<std::size_t>(j)];
      s.a = a + static_cast<double>(j) / m;
      s.b = a + static_cast<double>(j + 1) / m;
      const double mid = 0.5 * (s.a + s.b), half = 0.5 * (s.b - s.a);
      for (int i = 0; i < kN; ++i) {
        s.u[i] = mid + half * g.x[i];
        s.wh[i] = half * g.w[i] * h(s.u[i]);
      }
    }
    return cache_.emplace(k, std::move(subs)).first->second;
  }

 private:
  cplx b_;
  double delta_;
  double min_width_;
  std::array<cplx, 3> coef_;
  mutable std::map<long, std::vector<Sub>> cache_;
};

DensityMoments::DensityMoments(const SystemConfig& cfg, quad::Tolerance tol)
    : cfg_(validate_config(cfg)), tol_(tol) {
  if (cfg_.direction == Direction::downlink && cfg_.truncated()) {
    throw Error(ErrorCode::DegenerateInput, "downlink moments are defined for FPC only");
  }
  delta_ = cfg_.delta();
  p_ = 0.5 * cfg_.alpha * cfg_.epsilon;
  const double eps = cfg_.epsilon;
  const double base = delta_ / kB1;
  if (cfg_.direction == Direction::uplink && cfg_.truncated()) {
    cap_ = kB1 * cfg_.lambda * std::numbers::pi * std::pow(cfg_.p_hat, delta_ / eps);
    c0_ = base * (boost::math::tgamma_lower(1.0 + eps, cap_) +
                  std::pow(cap_, eps) * std::exp(-cap_));
    breaks_.push_back((eps - 1.0) * std::log(cap_) / delta_);
  } else {
    c0_ = base * std::tgamma(1.0 + eps);
    const bool jump = cfg_.direction == Direction::uplink ? eps == 1.0 : eps == 0.0;
    if (jump) breaks_.push_back(0.0);
  }

  // Range where the table is needed: left of tau_lo the scaled density is
  // c0 to machine precision, right of tau_hi the density carries no mass.
  int settled = 0;
  for (tau_lo_ = 0.0; tau_lo_ > -5000.0 && settled < 2; tau_lo_ -= 0.5) {
    settled = std::abs(scaled_density_exact(tau_lo_) - c0_) <= kFitTol * c0_ ? settled + 1 : 0;
  }
  settled = 0;
  for (tau_hi_ = 0.0; tau_hi_ < 5000.0 && settled < 2; tau_hi_ += 0.5) {
    const double rho = scaled_density_exact(tau_hi_) * std::exp(-delta_ * tau_hi_);
    settled = rho <= 1e-16 * c0_ * delta_ ? settled + 1 : 0;
  }
  for (double& t : breaks_) t = std::clamp(t, tau_lo_, tau_hi_);

  std::vector<double> cuts{tau_lo_, tau_hi_};
  cuts.insert(cuts.end(), breaks_.begin(), breaks_.end());
  for (double t = std::ceil(tau_lo_); t < tau_hi_; t += 1.0) cuts.push_back(t);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] - cuts[i] > 1e-12) fit(cuts[i], cuts[i + 1], 0);
  }

  const auto& g = gauss_rule();
  for (int k = 1; k <= 3; ++k) {
    const double kd = k - delta_;
    double m = c0_ * std::exp(kd * tau_lo_) / kd;
    for (const Panel& p : panels_) {
      const double mid = 0.5 * (p.a + p.b), half = 0.5 * (p.b - p.a);
      for (int i = 0; i < kN; ++i) {
        const double t = mid + half * g.x[i];
        m += half * g.w[i] * std::exp(kd * t) * scaled_density(t);
      }
    }
    moments_[k - 1] = m;
  }
}

double DensityMoments::scaled_density_exact(double tau) const {
  const double base = delta_ / kB1;
  const double eps = cfg_.epsilon;
  if (cfg_.direction == Direction::downlink) {
    if (p_ == 0.0) return tau <= 0.0 ? base : 0.0;
    const double lower = tau / p_;
    if (lower > 700.0) return 0.0;
    return base * boost::math::tgamma(1.0 + eps, std::exp(lower));
  }
  const double e = std::exp(-delta_ * tau);
  if (p_ == 0.0) return -base * std::expm1(-(kB2 / kB1) * e);

  auto f = quad::real_integrand([&](double v) {
    const double pv = std::pow(std::min(v, cap_), eps);
    return std::exp(-v) * pv * detail::cell_ratio(pv * e);
  });
  const quad::Tolerance tol{1e-17, 1e-13};
  double total = 0.0;
  // The cell ratio turns over where P(v) e = 1; a rule spanning [0, 80]
  // would step over that feature when it sits at tiny v.
  const double turn = std::pow(e, -1.0 / eps);
  auto add = [&](double a, double b) {
    a = std::max(a, 0.0);
    b = std::min(b, kVCut);
    for (double knot : {1e-2 * turn, 1e-1 * turn, turn, 1e1 * turn, 1e2 * turn}) {
      if (knot > a && knot < b) {
        total += quad::integrate(f, a, knot, tol).real();
        a = knot;
      }
    }
    if (b > a) total += quad::integrate(f, a, b, tol).real();
  };
  // Piece v < S: the condition v <= s reads v^(1 - eps) <= e.
  const double top = std::min(cap_, kVCut);
  if (eps < 1.0) {
    add(0.0, std::min(top, std::pow(e, 1.0 / (1.0 - eps))));
  } else if (eps == 1.0) {
    if (e >= 1.0) add(0.0, top);
  } else {
    add(std::pow(e, -1.0 / (eps - 1.0)), top);
  }
  // Piece v >= S: power is capped and the condition reads v <= S^eps e.
  if (std::isfinite(cap_)) add(cap_, std::pow(cap_, eps) * e);
  return base * total;
}

void DensityMoments::fit(double a, double b, int depth) {
  Panel p;
  p.a = a;
  p.b = b;
  double f[kN];
  for (int j = 0; j < kN; ++j) {
    const double x = std::cos(std::numbers::pi * (j + 0.5) / kN);
    f[j] = scaled_density_exact(0.5 * (a + b) + 0.5 * (b - a) * x);
  }
  for (int k = 0; k < kN; ++k) {
    double s = 0.0;
    for (int j = 0; j < kN; ++j) s += f[j] * std::cos(std::numbers::pi * k * (j + 0.5) / kN);
    p.coef[k] = (k == 0 ? 1.0 : 2.0) * s / kN;
  }
  const double tail = std::abs(p.coef[kN - 1]) + std::abs(p.coef[kN - 2]);
  if (tail > kFitTol * c0_ && depth < kMaxDepth) {
    fit(a, 0.5 * (a + b), depth + 1);
    fit(0.5 * (a + b), b, depth + 1);
    return;
  }
  min_width_ = std::min(min_width_, b - a);
  panels_.push_back(p);
}

double DensityMoments::scaled_density(double tau) const {
  if (tau <= tau_lo_) return c0_;
  if (tau >= tau_hi_) return 0.0;
  auto it = std::upper_bound(panels_.begin(), panels_.end(), tau,
                             [](double t, const Panel& p) { return t < p.a; });
  const Panel& p = *std::prev(it);
  const double y = (2.0 * tau - p.a - p.b) / (p.b - p.a);
  double b1 = 0.0, b2 = 0.0;
  for (int k = kN - 1; k >= 1; --k) {
    const double t = 2.0 * y * b1 - b2 + p.coef[k];
    b2 = b1;
    b1 = t;
  }
  return y * b1 - b2 + p.coef[0];
}

double DensityMoments::kappa(double z) const {
  const double log_theta = std::log(cfg_.theta);
  if (cfg_.direction == Direction::downlink) return log_theta - p_ * std::log(z);
  return log_theta + 0.5 * cfg_.alpha * std::log(z) - p_ * std::log(std::min(z, cap_));
}

double DensityMoments::weight(double z) const {
  return cfg_.direction == Direction::downlink ? z : 1.0;
}

cplx DensityMoments::phi(const OrderCache& cache, double kap) const {
  const cplx b = cache.order();
  const double edge = linear_edge(b);
  const auto c = series(b);

  // The whole support sits where g_b is linear to double precision: only the
  // moments of the density matter.
  if (kap + tau_hi_ < edge) {
    cplx sum{0.0, 0.0};
    for (int k = 1; k <= 3; ++k) {
      sum += c[static_cast<std::size_t>(k - 1)] * std::exp(k * kap) * moments_[k - 1];
    }
    return sum;
  }

  const double u_lo = std::floor(std::min(edge, kap + tau_lo_));
  const double u_hi = kap + tau_hi_;
  cplx sum{0.0, 0.0};
  for (int k = 1; k <= 3; ++k) {
    const double kd = k - delta_;
    sum += c[static_cast<std::size_t>(k - 1)] * c0_ * std::exp(kd * u_lo) / kd;
  }
  const auto& g = gauss_rule();
  auto fresh = [&](double a, double b) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    cplx s{0.0, 0.0};
    for (int i = 0; i < kN; ++i) {
      const double u = mid + half * g.x[i];
      s += half * g.w[i] * cache.h(u) * scaled_density(u - kap);
    }
    return s;
  };
  const long k_end = static_cast<long>(std::ceil(u_hi));
  for (long k = static_cast<long>(u_lo); k < k_end; ++k) {
    for (const auto& sub : cache.panel(k)) {
      if (sub.a >= u_hi) break;
      double split = kInf;
      for (double t : breaks_) {
        const double bu = kap + t;
        if (bu > sub.a && bu < sub.b) split = bu;
      }
      if (std::isfinite(split)) {
        sum += fresh(sub.a, split) + fresh(split, sub.b);
        continue;
      }
      for (int i = 0; i < kN; ++i) sum += sub.wh[i] * scaled_density(sub.u[i] - kap);
    }
  }
  return std::exp(delta_ * kap) * sum;
}

MomentValue DensityMoments::operator()(cplx b) const {
  if (b == cplx{0.0, 0.0}) return {cplx{1.0, 0.0}, 0.0, true};
  if (b.real() < 0.0) {
    throw Error(ErrorCode::DegenerateInput, "tabulated moments need Re(b) >= 0");
  }
  const OrderCache cache(b, delta_, min_width_);

  // kappa does not depend on z: the z-integral is elementary.
  if (cfg_.direction == Direction::uplink && !std::isfinite(cap_) &&
      cfg_.epsilon == 1.0) {
    const cplx m = std::exp(-phi(cache, std::log(cfg_.theta)));
    return {m, tol_.rel * std::abs(m), true};
  }
  if (cfg_.direction == Direction::downlink && p_ == 0.0) {
    const cplx m = 1.0 / (1.0 + phi(cache, std::log(cfg_.theta)));
    return {m, tol_.rel * std::abs(m), true};
  }

  auto outer = [&](double z) -> cplx {
    return std::exp(-z - weight(z) * phi(cache, kappa(z)));
  };
  quad::QuadResult r;
  if (std::isfinite(cap_)) {
    r = quad::integrate(outer, 0.0, cap_, tol_);
    const auto hi = quad::integrate_semi_infinite(outer, tol_, quad::kDefaultBudget, cap_);
    r.value += hi.value;
    r.abs_error += hi.abs_error;
    if (!hi.ok()) r.status = hi.status;
  } else {
    r = quad::integrate_semi_infinite(outer, tol_);
  }
  return {r.value, r.abs_error, r.ok()};
}

}  // namespace metasir::analytic
