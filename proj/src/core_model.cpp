#include "metasir/core_model.hpp"

#include <cmath>
#include <string>

namespace metasir {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorCode::TruncationWithoutCap: return "TruncationWithoutCap";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::BoundaryCell: return "BoundaryCell";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::OriginCellTouchesBoundary: return "OriginCellTouchesBoundary";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::SlowDecay: return "SlowDecay";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::InvalidMoments: return "InvalidMoments";
    case ErrorCode::InsufficientMoments: return "InsufficientMoments";
    case ErrorCode::EmptySampleSet: return "EmptySampleSet";
    case ErrorCode::ConfigParseError: return "ConfigParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
  }
  return "Unknown";
}

SystemConfig validate_config(const SystemConfig& cfg) {
  if (!(cfg.alpha > 2.0) || !std::isfinite(cfg.alpha)) {
    throw Error(ErrorCode::AlphaOutOfRange,
                "alpha must be finite and > 2, got " + std::to_string(cfg.alpha));
  }
  if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda)) {
    throw Error(ErrorCode::NonPositiveParameter, "lambda must be positive");
  }
  if (!(cfg.theta > 0.0) || !std::isfinite(cfg.theta)) {
    throw Error(ErrorCode::NonPositiveParameter, "theta must be positive");
  }
  if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon)) {
    throw Error(ErrorCode::NonPositiveParameter, "epsilon must be >= 0");
  }
  if (!(cfg.p_hat > 0.0)) {
    throw Error(ErrorCode::NonPositiveParameter, "p_hat must be positive");
  }
  if (cfg.power_model == PowerModel::tfpc && std::isinf(cfg.p_hat)) {
    throw Error(ErrorCode::TruncationWithoutCap,
                "TFPC requires a finite maximum power");
  }
  return cfg;
}

double transmit_power(double r, const SystemConfig& cfg) {
  if (cfg.epsilon == 0.0) return 1.0;
  const double exponent = cfg.alpha * cfg.epsilon;
  if (cfg.truncated()) {
    const double r_cap = std::pow(cfg.p_hat, 1.0 / exponent);
    if (r > r_cap) return cfg.p_hat;
  }
  return std::pow(r, exponent);
}

bool satisfies_invariants(const LinkGeometry& geom, Direction direction) {
  if (!(geom.r > 0.0)) return false;
  for (const auto& x : geom.interferers) {
    if (!(x.d > 0.0) || !(x.r > 0.0)) return false;
    if (direction == Direction::uplink && x.r > x.d) return false;
    if (direction == Direction::downlink && !(x.d > geom.r)) return false;
  }
  return true;
}

double conditional_ps(const LinkGeometry& geom, const SystemConfig& cfg) {
  const double signal = transmit_power(geom.r, cfg);
  double log_ps = 0.0;
  for (const auto& x : geom.interferers) {
    log_ps -= std::log1p(interference_term(geom.r, signal, x.d,
                                           transmit_power(x.r, cfg), cfg));
  }
  return std::exp(log_ps);
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

}  // namespace metasir
