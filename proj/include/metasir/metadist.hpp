#pragma once

// Meta distribution F(x) = P(Ps > x) from moments: exact Gil-Pelaez
// inversion, the moment-matched beta approximation and the classical
// moment bounds.

#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "metasir/core_model.hpp"
#include "metasir/quadrature.hpp"

namespace metasir::meta {

enum class Provenance { gil_pelaez, beta, empirical, bound };

struct MetaCurve {
  std::vector<double> x;  ///< strictly increasing, inside (0, 1)
  std::vector<double> values;
  Provenance provenance = Provenance::gil_pelaez;
  bool converged = true;
};

/// Checks range and monotonicity, allowing `slack` of upward movement.
bool is_valid(const MetaCurve& curve, double slack = 0.0);

/// int_0^1 F(x) dx by the trapezoid rule over the grid, with F(0) = 1 and
/// F(1) = 0 appended. Equals M_1 for an exact curve on a fine grid.
double curve_mean(const MetaCurve& curve);

/// t -> M_{jt}
using MomentOracle = std::function<std::complex<double>(double)>;

/// Below this t the Gil-Pelaez integrand is replaced by its value here.
inline constexpr double kSmallT = 1e-4;

inline constexpr quad::Tolerance kGilPelaezTolerance{1e-6, 0.0};

struct MetaPoint {
  double value = 0.0;
  double abs_error = 0.0;
  bool converged = true;  ///< false when the t-integral reported SlowDecay
};

/// F(x) = 1/2 + (1/pi) int_0^inf Im(e^{-jt log x} M_{jt}) / t dt, clamped
/// to [0, 1].
MetaPoint gil_pelaez(const MomentOracle& oracle, double x,
                     quad::Tolerance tol = kGilPelaezTolerance);

MetaCurve gil_pelaez_curve(const MomentOracle& oracle, std::span<const double> x_grid,
                           quad::Tolerance tol = kGilPelaezTolerance);

/// Piecewise Chebyshev interpolant of an expensive oracle, built lazily.
/// Cells are linear in t up to 32 and linear in log t beyond; each cell is
/// bisected until its trailing coefficients drop below `tol`. Not
/// thread-safe.
class InterpolatedOracle {
 public:
  explicit InterpolatedOracle(MomentOracle base, double tol = 1e-9);

  std::complex<double> operator()(double t) const;

  std::size_t base_calls() const { return calls_; }

 private:
  static constexpr int kNodes = 16;
  struct Piece {
    double a = 0.0;
    double b = 0.0;
    std::complex<double> coef[kNodes];
  };

  const std::vector<Piece>& cell(long index) const;
  void fill(double a, double b, bool log_scale, int depth, std::vector<Piece>& out) const;

  MomentOracle base_;
  double tol_;
  mutable std::size_t calls_ = 0;
  mutable std::map<long, std::vector<Piece>> cells_;
};

/// Exact meta distribution of a configuration: tabulated moments, an
/// interpolated oracle and Gil-Pelaez inversion on `x_grid`.
MetaCurve analytic_meta(const SystemConfig& cfg, std::span<const double> x_grid,
                        quad::Tolerance tol = kGilPelaezTolerance);

struct BetaParams {
  double mu = 0.5;          ///< mean
  double beta_shape = 1.0;  ///< second shape parameter

  double first_shape() const { return mu * beta_shape / (1.0 - mu); }
  double variance() const { return mu * (1.0 - mu) * (1.0 - mu) / (beta_shape + 1.0 - mu); }
};

/// Moment matching. Throws InvalidMoments unless 0 < M1 < 1 and M2 < M1,
/// DegenerateVariance when M2 <= M1^2 + 1e-12.
BetaParams beta_fit(double m1, double m2);

double beta_ccdf(const BetaParams& params, double x);
MetaCurve beta_ccdf(const BetaParams& params, std::span<const double> x_grid);

struct Bounds {
  double lower = 0.0;
  double upper = 1.0;
};

/// Markov bounds of order b in {1, ..., 4} from moments = {M1, ..., Mk}:
/// upper M_b / x^b, lower 1 - E((1 - Ps)^b) / (1 - x)^b, both clamped.
/// Throws InsufficientMoments when b > k, InvalidMoments for b outside 1..4.
Bounds markov_bounds(std::span<const double> moments, int b, double x);

/// One-sided Chebyshev bounds with V = M2 - M1^2: a lower bound below the
/// mean, an upper bound above it, vacuous at x = M1.
Bounds chebyshev_bounds(double m1, double m2, double x);

/// Paley-Zygmund lower bound on F(x M1) for x in [0, 1].
double paley_zygmund(double m1, double m2, double x);

}  // namespace metasir::meta
