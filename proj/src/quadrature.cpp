#include "metasir/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace metasir::quad {
namespace {

using cplx = std::complex<double>;

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600082811470, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
// Gauss weights for the nodes kXgk[1], kXgk[3], ..., kXgk[9].
constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = std::numeric_limits<double>::min();
constexpr std::size_t kRuleEvaluations = 21;

struct Segment {
  double a;
  double b;
  cplx value;
  double error;
};

bool worse(const Segment& lhs, const Segment& rhs) { return lhs.error < rhs.error; }

Segment kronrod21(const Integrand& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double abs_half = std::abs(half);

  std::array<cplx, 21> fv{};
  fv[20] = f(center);
  cplx res_k = fv[20] * kWgk[10];
  cplx res_g{0.0, 0.0};
  double res_abs = std::abs(res_k);
  for (std::size_t j = 0; j < 10; ++j) {
    const double dx = half * kXgk[j];
    const cplx f1 = f(center - dx);
    const cplx f2 = f(center + dx);
    fv[2 * j] = f1;
    fv[2 * j + 1] = f2;
    res_k += kWgk[j] * (f1 + f2);
    res_abs += kWgk[j] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) res_g += kWg[j / 2] * (f1 + f2);
  }
  const cplx mean = 0.5 * res_k;
  double res_asc = kWgk[10] * std::abs(fv[20] - mean);
  for (std::size_t j = 0; j < 10; ++j) {
    res_asc += kWgk[j] * (std::abs(fv[2 * j] - mean) + std::abs(fv[2 * j + 1] - mean));
  }
  const cplx value = res_k * half;
  res_abs *= abs_half;
  res_asc *= abs_half;
  double err = std::abs((res_k - res_g) * half);
  if (res_asc != 0.0 && err != 0.0) {
    err = res_asc * std::min(1.0, std::pow(200.0 * err / res_asc, 1.5));
  }
  if (res_abs > kTiny / (50.0 * kEps)) err = std::max(50.0 * kEps * res_abs, err);
  if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
  return {a, b, value, err};
}

double target(Tolerance tol, cplx value) {
  return std::max(tol.abs, tol.rel * std::abs(value));
}

}  // namespace

QuadResult integrate(const Integrand& f, double a, double b, Tolerance tol,
                     std::size_t budget) {
  QuadResult out;
  if (a == b) return out;
  if (a > b) {
    out = integrate(f, b, a, tol, budget);
    out.value = -out.value;
    return out;
  }

  std::vector<Segment> heap;
  std::vector<Segment> frozen;  // too narrow to split further
  heap.push_back(kronrod21(f, a, b));
  out.evaluations = kRuleEvaluations;
  cplx total = heap.front().value;
  double total_err = heap.front().error;

  while (total_err > target(tol, total)) {
    if (heap.empty() || out.evaluations + 2 * kRuleEvaluations > budget) {
      out.status = Status::budget_exceeded;
      break;
    }
    std::pop_heap(heap.begin(), heap.end(), worse);
    const Segment worst = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (worst.a + worst.b);
    const double width = worst.b - worst.a;
    if (width <= 1e3 * kEps * std::max(std::abs(mid), kTiny) || mid <= worst.a ||
        mid >= worst.b) {
      frozen.push_back(worst);
      continue;
    }
    const Segment left = kronrod21(f, worst.a, mid);
    const Segment right = kronrod21(f, mid, worst.b);
    out.evaluations += 2 * kRuleEvaluations;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end(), worse);
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end(), worse);
  }

  // Re-sum in interval order so the result does not carry the drift of the
  // incremental updates.
  heap.insert(heap.end(), frozen.begin(), frozen.end());
  std::sort(heap.begin(), heap.end(),
            [](const Segment& l, const Segment& r) { return l.a < r.a; });
  cplx sum{0.0, 0.0};
  double err = 0.0;
  for (const auto& s : heap) {
    sum += s.value;
    err += s.error;
  }
  out.value = sum;
  out.abs_error = err;
  if (out.status == Status::ok && err > target(tol, sum) * (1.0 + 1e-9)) {
    out.status = Status::budget_exceeded;
  }
  return out;
}

QuadResult integrate_semi_infinite(const Integrand& f, Tolerance tol,
                                   std::size_t budget, double lower,
                                   double scale) {
  const auto mapped = [&](double u) -> cplx {
    const double one_minus = 1.0 - u;
    const double z = lower + scale * u / one_minus;
    if (!std::isfinite(z)) return {0.0, 0.0};
    const cplx fz = f(z);
    if (fz == cplx{0.0, 0.0}) return fz;
    return fz * (scale / (one_minus * one_minus));
  };
  return integrate(mapped, 0.0, 1.0, tol, budget);
}

std::pair<cplx, double> wynn_epsilon(std::span<const cplx> partial_sums) {
  const std::size_t n = partial_sums.size();
  if (n == 0) return {{0.0, 0.0}, 0.0};
  if (n < 3) {
    const double change = n == 2 ? std::abs(partial_sums[1] - partial_sums[0]) : 0.0;
    return {partial_sums.back(), change};
  }
  // Column k holds eps_k^{(i)}; only the two previous columns are kept.
  auto estimate = [](std::span<const cplx> s) -> cplx {
    std::vector<cplx> prev(s.size() + 1, cplx{0.0, 0.0});  // eps_{-1}
    std::vector<cplx> cur(s.begin(), s.end());             // eps_0
    cplx best = s.back();
    for (std::size_t k = 1; cur.size() > 1; ++k) {
      std::vector<cplx> next(cur.size() - 1);
      for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
        const cplx diff = cur[i + 1] - cur[i];
        if (std::abs(diff) < 1e-300) return k % 2 == 1 ? cur[i + 1] : best;
        next[i] = prev[i + 1] + 1.0 / diff;
      }
      prev = std::move(cur);
      cur = std::move(next);
      if (k % 2 == 0) {
        if (!std::isfinite(std::abs(cur.back()))) return best;
        best = cur.back();
      }
    }
    return best;
  };
  const cplx full = estimate(partial_sums);
  const cplx shorter = estimate(partial_sums.first(n - 1));
  return {full, std::abs(full - shorter)};
}

QuadResult integrate_oscillatory(const Integrand& f, double omega,
                                 Tolerance tol, std::size_t budget) {
  omega = std::abs(omega);
  if (omega < 1e-12) return integrate_semi_infinite(f, tol, budget);

  constexpr std::size_t kWindow = 40;  // partial sums fed to the accelerator
  constexpr int kQuietPanels = 3;
  const double panel = std::acos(-1.0) / omega;
  const Tolerance panel_tol{tol.abs / 10.0, tol.rel};

  QuadResult out;
  std::vector<cplx> partial;
  cplx sum{0.0, 0.0};
  double quad_err = 0.0;
  int quiet = 0;
  cplx last_accel{0.0, 0.0};
  double last_change = std::numeric_limits<double>::infinity();
  int stable = 0;

  for (std::size_t k = 0;; ++k) {
    if (out.evaluations >= budget) {
      out.status = Status::slow_decay;
      break;
    }
    const double a = static_cast<double>(k) * panel;
    QuadResult piece = integrate(f, a, a + panel, panel_tol, budget - out.evaluations);
    out.evaluations += piece.evaluations;
    sum += piece.value;
    quad_err += piece.abs_error;
    partial.push_back(sum);

    quiet = std::abs(piece.value) < tol.abs / 10.0 ? quiet + 1 : 0;
    if (quiet >= kQuietPanels) {
      out.value = sum;
      out.abs_error = quad_err + 3.0 * std::abs(piece.value);
      return out;
    }
    if (partial.size() >= 6) {
      const std::size_t first = partial.size() > kWindow ? partial.size() - kWindow : 0;
      const auto [accel, change] =
          wynn_epsilon(std::span<const cplx>(partial).subspan(first));
      const double goal = target(tol, accel);
      if (change < goal && std::abs(accel - last_accel) < goal) {
        if (++stable >= 2) {
          out.value = accel;
          out.abs_error = quad_err + std::max(change, last_change);
          return out;
        }
      } else {
        stable = 0;
      }
      last_accel = accel;
      last_change = change;
    }
  }
  out.value = partial.empty() ? sum : last_accel;
  out.abs_error = quad_err + last_change;
  return out;
}

}  // namespace metasir::quad
