#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "metasir/errors.hpp"

namespace metasir {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Direction { uplink, downlink };
enum class PowerModel { fpc, tfpc };

/// Network and physical parameters of one experiment. All quantities are
/// linear; dB conversion happens only at the CLI boundary.
struct SystemConfig {
  double lambda = 1.0;   ///< BS intensity (points per unit area)
  double alpha = 4.0;    ///< path-loss exponent, > 2
  double epsilon = 0.0;  ///< power-control exponent, >= 0
  double p_hat = kInf;   ///< normalized maximum transmit power (TFPC only)
  double theta = 1.0;    ///< SIR threshold
  Direction direction = Direction::uplink;
  PowerModel power_model = PowerModel::fpc;

  double delta() const { return 2.0 / alpha; }

  /// True when the peak-power cap is active. TFPC with epsilon = 0 has
  /// unit power everywhere and therefore behaves exactly like FPC.
  bool truncated() const {
    return power_model == PowerModel::tfpc && epsilon > 0.0;
  }

  bool operator==(const SystemConfig&) const = default;
};

/// Returns `cfg` unchanged or throws `Error` with AlphaOutOfRange,
/// NonPositiveParameter or TruncationWithoutCap.
SystemConfig validate_config(const SystemConfig& cfg);

/// Transmit power for serving-link distance `r`, with the unit-distance
/// power normalized to 1.
double transmit_power(double r, const SystemConfig& cfg);

struct Interferer {
  double d;  ///< distance from the interferer to the receiver of interest
  double r;  ///< serving-link distance inside the interferer's own cell
};

/// Distances that determine the conditional success probability of one link.
struct LinkGeometry {
  double r = 0.0;
  std::vector<Interferer> interferers;
};

/// Checks the distance invariants for the given direction: uplink needs
/// r_x <= d_x, downlink needs d_x > r.
bool satisfies_invariants(const LinkGeometry& geom, Direction direction);

struct MomentValue {
  std::complex<double> value{};
  double abs_error = 0.0;
  bool converged = true;
};

/// P(SIR > theta | point process) with Rayleigh fading averaged in closed
/// form: prod_x 1 / (1 + theta P(r_x) r^alpha / (P(r) d_x^alpha)).
double conditional_ps(const LinkGeometry& geom, const SystemConfig& cfg);

/// Single factor of the product above; exposed so callers that stream
/// interferers need not materialize a LinkGeometry.
inline double interference_term(double r, double signal_power, double d,
                                double interferer_power,
                                const SystemConfig& cfg) {
  return cfg.theta * interferer_power / signal_power *
         std::pow(r / d, cfg.alpha);
}

double db_to_linear(double db);
double linear_to_db(double linear);

}  // namespace metasir
