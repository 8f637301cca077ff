#include "metasir/metadist.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numbers>

#include "metasir/density_moments.hpp"

namespace metasir::meta {
namespace {

using cplx = std::complex<double>;

constexpr double kLinearEnd = 32.0;
constexpr double kLinearCell = 2.0;
constexpr double kLogCell = 0.25;
constexpr long kLinearCells = 16;
constexpr int kMaxDepth = 10;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

bool is_valid(const MetaCurve& curve, double slack) {
  if (curve.x.size() != curve.values.size()) return false;
  for (std::size_t i = 0; i < curve.values.size(); ++i) {
    const double v = curve.values[i];
    if (!(v >= 0.0 && v <= 1.0)) return false;
    if (i > 0 && v > curve.values[i - 1] + slack) return false;
  }
  return true;
}

double curve_mean(const MetaCurve& curve) {
  double area = 0.0;
  double px = 0.0, pv = 1.0;
  for (std::size_t i = 0; i < curve.x.size(); ++i) {
    area += 0.5 * (curve.values[i] + pv) * (curve.x[i] - px);
    px = curve.x[i];
    pv = curve.values[i];
  }
  return area + 0.5 * pv * (1.0 - px);
}

MetaPoint gil_pelaez(const MomentOracle& oracle, double x, quad::Tolerance tol) {
  if (x <= 0.0) return {1.0, 0.0, true};
  if (x >= 1.0) return {0.0, 0.0, true};
  const double omega = -std::log(x);
  auto integrand = quad::real_integrand([&](double t) {
    t = std::max(t, kSmallT);
    return (std::exp(cplx{0.0, omega * t}) * oracle(t)).imag() / t;
  });
  const auto r = quad::integrate_oscillatory(integrand, omega, tol);
  return {clamp01(0.5 + r.real() / std::numbers::pi), r.abs_error / std::numbers::pi,
          r.ok()};
}

MetaCurve gil_pelaez_curve(const MomentOracle& oracle, std::span<const double> x_grid,
                           quad::Tolerance tol) {
  MetaCurve c;
  c.provenance = Provenance::gil_pelaez;
  for (double x : x_grid) {
    const MetaPoint p = gil_pelaez(oracle, x, tol);
    c.x.push_back(x);
    c.values.push_back(p.value);
    c.converged = c.converged && p.converged;
  }
  return c;
}

InterpolatedOracle::InterpolatedOracle(MomentOracle base, double tol)
    : base_(std::move(base)), tol_(tol) {}

void InterpolatedOracle::fill(double a, double b, bool log_scale, int depth,
                              std::vector<Piece>& out) const {
  Piece p;
  p.a = a;
  p.b = b;
  cplx f[kNodes];
  for (int j = 0; j < kNodes; ++j) {
    const double y = std::cos(std::numbers::pi * (j + 0.5) / kNodes);
    const double s = 0.5 * (a + b) + 0.5 * (b - a) * y;
    f[j] = base_(log_scale ? kLinearEnd * std::exp(s) : s);
    ++calls_;
  }
  for (int k = 0; k < kNodes; ++k) {
    cplx sum{0.0, 0.0};
    for (int j = 0; j < kNodes; ++j) {
      sum += f[j] * std::cos(std::numbers::pi * k * (j + 0.5) / kNodes);
    }
    p.coef[k] = (k == 0 ? 1.0 : 2.0) * sum / static_cast<double>(kNodes);
  }
  const double tail = std::abs(p.coef[kNodes - 1]) + std::abs(p.coef[kNodes - 2]);
  if (tail > tol_ && depth < kMaxDepth) {
    fill(a, 0.5 * (a + b), log_scale, depth + 1, out);
    fill(0.5 * (a + b), b, log_scale, depth + 1, out);
    return;
  }
  out.push_back(p);
}

const std::vector<InterpolatedOracle::Piece>& InterpolatedOracle::cell(long index) const {
  auto it = cells_.find(index);
  if (it != cells_.end()) return it->second;
  std::vector<Piece> pieces;
  if (index < kLinearCells) {
    const double a = kLinearCell * static_cast<double>(index);
    fill(a, a + kLinearCell, false, 0, pieces);
  } else {
    const double a = kLogCell * static_cast<double>(index - kLinearCells);
    fill(a, a + kLogCell, true, 0, pieces);
  }
  return cells_.emplace(index, std::move(pieces)).first->second;
}

std::complex<double> InterpolatedOracle::operator()(double t) const {
  if (t < 0.0) return std::conj((*this)(-t));
  long index;
  double s;
  if (t < kLinearEnd) {
    index = static_cast<long>(t / kLinearCell);
    s = t;
  } else {
    s = std::log(t / kLinearEnd);
    index = kLinearCells + static_cast<long>(s / kLogCell);
  }
  const auto& pieces = cell(index);
  auto pos = std::upper_bound(pieces.begin(), pieces.end(), s,
                              [](double v, const Piece& p) { return v < p.a; });
  const Piece& p = pos == pieces.begin() ? *pos : *std::prev(pos);
  const double y = std::clamp((2.0 * s - p.a - p.b) / (p.b - p.a), -1.0, 1.0);
  cplx b1{0.0, 0.0}, b2{0.0, 0.0};
  for (int k = kNodes - 1; k >= 1; --k) {
    const cplx next = 2.0 * y * b1 - b2 + p.coef[k];
    b2 = b1;
    b1 = next;
  }
  return y * b1 - b2 + p.coef[0];
}

MetaCurve analytic_meta(const SystemConfig& cfg, std::span<const double> x_grid,
                        quad::Tolerance tol) {
  const analytic::DensityMoments moments(cfg);
  const InterpolatedOracle oracle(
      [&moments](double t) { return moments(cplx{0.0, t}).value; });
  return gil_pelaez_curve([&oracle](double t) { return oracle(t); }, x_grid, tol);
}

BetaParams beta_fit(double m1, double m2) {
  if (!(m1 > 0.0 && m1 < 1.0) || !(m2 < m1) || !std::isfinite(m2)) {
    throw Error(ErrorCode::InvalidMoments, "beta fit needs 0 < M1 < 1 and M2 < M1");
  }
  if (m2 <= m1 * m1 + 1e-12) {
    throw Error(ErrorCode::DegenerateVariance, "variance is zero or negative");
  }
  return {m1, (m1 - m2) * (1.0 - m1) / (m2 - m1 * m1)};
}

double beta_ccdf(const BetaParams& params, double x) {
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return 0.0;
  return boost::math::ibetac(params.first_shape(), params.beta_shape, x);
}

MetaCurve beta_ccdf(const BetaParams& params, std::span<const double> x_grid) {
  MetaCurve c;
  c.provenance = Provenance::beta;
  for (double x : x_grid) {
    c.x.push_back(x);
    c.values.push_back(beta_ccdf(params, x));
  }
  return c;
}

Bounds markov_bounds(std::span<const double> moments, int b, double x) {
  if (b < 1 || b > 4) throw Error(ErrorCode::InvalidMoments, "Markov order must be 1..4");
  if (static_cast<std::size_t>(b) > moments.size()) {
    throw Error(ErrorCode::InsufficientMoments, "Markov bound needs M_1..M_b");
  }
  auto m = [&](int i) { return i == 0 ? 1.0 : moments[static_cast<std::size_t>(i - 1)]; };
  // E((1 - Ps)^b) = sum_i C(b, i) (-1)^i M_i
  double complement = 0.0;
  double binom = 1.0;
  for (int i = 0; i <= b; ++i) {
    complement += (i % 2 == 0 ? 1.0 : -1.0) * binom * m(i);
    binom = binom * (b - i) / (i + 1);
  }
  Bounds out;
  out.upper = x > 0.0 ? clamp01(m(b) / std::pow(x, b)) : 1.0;
  out.lower = x < 1.0 ? clamp01(1.0 - complement / std::pow(1.0 - x, b)) : 0.0;
  return out;
}

Bounds chebyshev_bounds(double m1, double m2, double x) {
  const double v = std::max(m2 - m1 * m1, 0.0);
  Bounds out;
  if (x < m1) out.lower = clamp01(1.0 - v / ((x - m1) * (x - m1)));
  if (x > m1) out.upper = clamp01(v / ((x - m1) * (x - m1)));
  return out;
}

double paley_zygmund(double m1, double m2, double x) {
  const double num = (1.0 - x) * (1.0 - x) * m1 * m1;
  const double den = m2 + x * (x - 2.0) * m1 * m1;
  if (num <= 0.0) return 0.0;
  if (den <= 0.0) return 1.0;
  return clamp01(num / den);
}

}  // namespace metasir::meta
