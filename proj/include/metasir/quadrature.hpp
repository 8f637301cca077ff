#pragma once

// Adaptive Gauss-Kronrod integration of complex-valued integrands on finite,
// semi-infinite and oscillatory domains. Nested integrals are built by
// calling these routines from inside an integrand.

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>

namespace metasir::quad {

struct Tolerance {
  double abs;
  double rel;
};

inline constexpr Tolerance kInnerTolerance{1e-9, 1e-7};
inline constexpr Tolerance kOuterTolerance{1e-7, 1e-6};
inline constexpr std::size_t kDefaultBudget = 1'000'000;

enum class Status {
  ok,
  budget_exceeded,  ///< tolerance not met within the evaluation budget
  slow_decay,       ///< oscillatory tail did not settle within the budget
};

struct QuadResult {
  std::complex<double> value{};
  double abs_error = 0.0;
  std::size_t evaluations = 0;
  Status status = Status::ok;

  bool ok() const { return status == Status::ok; }
  double real() const { return value.real(); }
};

using Integrand = std::function<std::complex<double>(double)>;

/// Adaptive 21-point Gauss-Kronrod on [a, b]. Integrable endpoint
/// singularities are fine since the rule never samples the endpoints.
/// A result that misses the tolerance is returned with a flagged status.
QuadResult integrate(const Integrand& f, double a, double b,
                     Tolerance tol = kInnerTolerance,
                     std::size_t budget = kDefaultBudget);

/// Integral over [lower, inf) through z = lower + scale * u / (1 - u).
/// `scale` should be the characteristic length of the integrand.
QuadResult integrate_semi_infinite(const Integrand& f,
                                   Tolerance tol = kInnerTolerance,
                                   std::size_t budget = kDefaultBudget,
                                   double lower = 0.0, double scale = 1.0);

/// Integral over [0, inf) of an integrand whose oscillation has angular rate
/// `omega`. Works panel by panel over half periods pi/omega; partial sums
/// are accelerated with Wynn's epsilon algorithm and the sum stops once
/// three consecutive panels each contribute less than tol.abs / 10.
/// For omega below ~1e-12 this falls back to integrate_semi_infinite.
QuadResult integrate_oscillatory(const Integrand& f, double omega,
                                 Tolerance tol = kInnerTolerance,
                                 std::size_t budget = kDefaultBudget);

/// Limit estimate of a partial-sum sequence by Wynn's epsilon algorithm.
/// Returns {estimate, |estimate - estimate without the last term|}.
std::pair<std::complex<double>, double> wynn_epsilon(
    std::span<const std::complex<double>> partial_sums);

/// Real-valued convenience wrapper.
inline Integrand real_integrand(std::function<double(double)> f) {
  return [f = std::move(f)](double x) { return std::complex<double>(f(x), 0.0); };
}

}  // namespace metasir::quad
