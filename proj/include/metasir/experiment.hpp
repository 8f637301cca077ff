#pragma once

// Experiment descriptions, figure presets, the flat config format and the
// runners behind each CLI command.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "metasir/core_model.hpp"

namespace metasir::experiment {

enum class Command { moments, meta, mld, bounds, simulate, kfun, compare, opt };

std::string_view to_string(Command c);
/// Throws ConfigParseError for an unknown name.
Command parse_command(std::string_view name);

struct ExperimentSpec {
  Command command = Command::moments;
  /// Direction, power model, lambda and alpha; theta, epsilon and p_hat come
  /// from the sweeps below.
  SystemConfig cfg;
  std::vector<double> theta_db{0.0};
  std::vector<double> epsilons{0.0};
  std::vector<double> orders{1.0, 2.0};
  std::vector<double> x_grid;
  std::vector<double> p_hat_db;  ///< TFPC caps; "inf" gives the untruncated model
  std::vector<double> radii;
  std::string output = ".";
  std::string name = "out";
  std::uint64_t seed = 1;
  std::size_t realizations = 0;  ///< 0: enough for 10^4 guarded links
  bool far_field = true;

  bool operator==(const ExperimentSpec&) const = default;
};

/// "start:step:stop" (both ends included), a comma list, or a single
/// value; "inf" is accepted. Throws ConfigParseError.
std::vector<double> parse_sweep(std::string_view text);

/// Throws UnknownPreset.
ExperimentSpec figure_preset(std::string_view name);
std::vector<std::string> preset_names();

/// Flat key-value object; sweeps are arrays and infinities the string "inf".
nlohmann::json to_json(const ExperimentSpec& spec);
/// Keys absent from `j` keep their values in `base`. Sweeps may be arrays or
/// sweep strings. Throws ConfigParseError.
ExperimentSpec from_json(const nlohmann::json& j, ExperimentSpec base = {});
ExperimentSpec load_spec(const std::filesystem::path& path, ExperimentSpec base = {});

/// Throws ConfigParseError for empty or unsorted sweeps, or the
/// SystemConfig errors for invalid physical parameters.
void validate_spec(const ExperimentSpec& spec);

/// Seed from METASIR_SEED, else 1.
std::uint64_t default_seed();

/// 0 ok, 2 config, 3 numerics, 4 I/O.
int exit_code(ErrorCode code);

struct RunReport {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> flagged;  ///< rows whose numerics did not converge
  int status = 0;
};

/// Writes <output>/<name>.csv plus <name>.meta.json (and per-configuration
/// sample files for simulate). Rows whose quadrature did not converge are
/// still written, listed in the metadata and make the status 3.
RunReport run(const ExperimentSpec& spec);

/// Number formatting used in every CSV: shortest round-trip form, with
/// "inf", "-inf" and "nan" tokens.
std::string format_number(double v);

}  // namespace metasir::experiment
