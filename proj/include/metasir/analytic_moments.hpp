#pragma once

// Analytical moments M_b of the conditional success probability for the
// uplink (FPC and truncated FPC) and downlink (FPC) of a Poisson cellular
// network, plus the mean-local-delay forms and the power-control optimizers.

#include <complex>
#include <cstddef>

#include "metasir/core_model.hpp"
#include "metasir/quadrature.hpp"

namespace metasir::analytic {

/// Constants of the Poisson-Voronoi link-distance and interferer-intensity
/// approximations: f_R(r) = 2 B1 pi lambda r exp(-B1 lambda pi r^2) and
/// lambda_I(r) = lambda (1 - exp(-B2 lambda pi r^2)).
inline constexpr double kB1 = 5.0 / 4.0;
inline constexpr double kB2 = 12.0 / 5.0;

struct MomentRequest {
  SystemConfig cfg;
  std::complex<double> b;
};

/// Tolerances per nesting level (outermost first) and a per-call budget.
struct MomentOptions {
  quad::Tolerance outer = quad::kOuterTolerance;
  quad::Tolerance middle{1e-8, 1e-7};
  quad::Tolerance inner = quad::kInnerTolerance;
  std::size_t budget = quad::kDefaultBudget;

  /// Looser settings for oracles that are called many times, e.g. inside
  /// the Gil-Pelaez integral.
  static MomentOptions fast();
};

/// Uplink FPC moment (triple integral over z, x, y).
MomentValue uplink_moment(const MomentRequest& req, const MomentOptions& opts = {});

/// Uplink moment for full inversion (epsilon = 1), reduced to a double
/// integral inside a single exponential.
MomentValue uplink_moment_eps1(std::complex<double> b, double theta, double alpha,
                               const MomentOptions& opts = {});

/// Closed-form uplink mean local delay at epsilon = 1 (uses the B2/B1 ~ 2
/// simplification, so it is itself approximate).
double uplink_mld_eps1(double theta, double alpha);

/// Uplink FPC threshold at epsilon = 1 - delta above which the mean local
/// delay diverges.
double uplink_critical_theta(double alpha);

/// Convergence classification of the uplink mean local delay. With b = -1
/// the exponent is -theta C z^q, q = alpha (1 - epsilon) / 2, so the delay
/// is finite for q < 1, for q = 1 below uplink_critical_theta, and never
/// under truncation (p_hat finite).
bool uplink_mld_finite(double theta, double alpha, double epsilon,
                       double p_hat = kInf);

/// Uplink truncated-FPC moment. Depends on lambda and p_hat only through
/// S = B1 lambda pi p_hat^(delta/epsilon).
MomentValue uplink_tfpc_moment(std::complex<double> b, double theta, double alpha,
                               double epsilon, double lambda, double p_hat,
                               const MomentOptions& opts = {});

/// Downlink FPC moment (triple integral over z, x in [1, inf), y).
MomentValue downlink_moment(std::complex<double> b, double theta, double alpha,
                            double epsilon, const MomentOptions& opts = {});

/// Dispatches on direction and power model.
MomentValue moment(const SystemConfig& cfg, std::complex<double> b,
                   const MomentOptions& opts = {});

/// c = theta delta / (B1 (1 - delta)).
double mld_constant(double theta, double alpha);

/// theta_c = B1 (1/delta - 1), the epsilon = 0 downlink phase transition.
double critical_theta(double alpha);

/// Convergence classification of the downlink mean local delay.
bool downlink_mld_finite(double theta, double alpha, double epsilon);

/// log of int_0^inf exp(k y^(1-rho) - y) dy; +inf when divergent.
double log_mld_integral(double k, double rho);

/// Downlink mean local delay; +inf exactly when the classification says
/// it diverges.
double downlink_mld(double theta, double alpha, double epsilon);

enum class MldCase { eps0, eps_half_delta, eps_delta };

/// Closed forms of the downlink mean local delay at epsilon in
/// {0, delta/2, delta}.
double downlink_mld_closed(double theta, double alpha, MldCase which);

/// argmax over epsilon in [0, 1] of the uplink M_1, to within 1e-3.
double epsilon_opt_uplink(double theta, double alpha, const MomentOptions& opts = {});

/// argmin over rho in (0, 1] of the downlink mean local delay as a function
/// of c, to within 1e-3.
double rho_opt_downlink(double c);

namespace detail {

/// (1 - e^{-s r}) / (1 - e^{-s}) with its limit r at s = 0.
double cell_ratio(double s);

/// (1 - u^r) / (1 - u) with its limit r at u = 1.
double cell_ratio_u(double u);

/// 1 - (1 + w)^{-b} for real w >= 0, free of cancellation for small w.
std::complex<double> one_minus_pow(double w, std::complex<double> b);

/// 1 - e^{-b l}, the same quantity written in terms of l = log(1 + w).
std::complex<double> one_minus_exp_neg(double l, std::complex<double> b);

}  // namespace detail

}  // namespace metasir::analytic
