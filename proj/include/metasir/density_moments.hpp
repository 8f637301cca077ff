#pragma once

// Moments for oracles that are queried at many orders b, e.g. the
// imaginary orders of the Gil-Pelaez integral.
//
// Both the uplink and the downlink moment reduce to
//   M_b = int_0^inf exp(-z - A(z) Phi_b(kappa(z))) dz,
//   Phi_b(kappa) = int g_b(exp(kappa + tau)) rho(tau) dtau,
// with g_b(w) = 1 - (1 + w)^-b. Here tau is the log of the factor of w that
// does not depend on z, and rho is its density under the inner measure
// (the cell-ratio weighted area element for the uplink, x >= 1 for the
// downlink). rho depends on the configuration only, so it is tabulated once
// and shared by every z and every order.

#include <complex>
#include <vector>

#include "metasir/core_model.hpp"
#include "metasir/quadrature.hpp"

namespace metasir::analytic {

class DensityMoments {
 public:
  /// Uplink FPC or TFPC, downlink FPC. Throws on an invalid configuration.
  explicit DensityMoments(const SystemConfig& cfg,
                          quad::Tolerance tol = {1e-11, 1e-9});

  /// M_b for Re(b) >= 0. Throws DegenerateInput for Re(b) < 0, where the
  /// moment may diverge.
  MomentValue operator()(std::complex<double> b) const;

  /// rho(tau) exp(delta tau), the tabulated smooth part of the density.
  double scaled_density(double tau) const;

  /// Same quantity from its defining integral, without the table.
  double scaled_density_exact(double tau) const;

  const SystemConfig& config() const { return cfg_; }

 private:
  static constexpr int kNodes = 16;

  struct Panel {
    double a = 0.0;
    double b = 0.0;
    double coef[kNodes] = {};
  };

  class OrderCache;

  void fit(double a, double b, int depth);
  std::complex<double> phi(const OrderCache& cache, double kappa) const;
  double kappa(double z) const;
  double weight(double z) const;

  SystemConfig cfg_;
  quad::Tolerance tol_;
  double delta_ = 0.0;
  double p_ = 0.0;
  double cap_ = kInf;  // S, +inf without truncation
  double c0_ = 0.0;    // limit of the scaled density as tau -> -inf
  double tau_lo_ = 0.0;
  double tau_hi_ = 0.0;
  double min_width_ = 1.0;
  std::vector<double> breaks_;  // jumps or kinks of the scaled density
  std::vector<Panel> panels_;
  double moments_[3] = {};  // int e^{(k - delta) tau} r(tau) dtau, k = 1..3
};

}  // namespace metasir::analytic
