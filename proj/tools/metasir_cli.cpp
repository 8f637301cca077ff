// metasir: analytic moments, meta distributions, bounds and simulations of
// uplink/downlink Poisson cellular networks with fractional power control.

#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "metasir/experiment.hpp"

namespace {

using metasir::Error;
using metasir::ErrorCode;
namespace ex = metasir::experiment;

int report_error(ErrorCode code, const std::string& message) {
  const int status = ex::exit_code(code);
  nlohmann::json j = {{"error", std::string(metasir::to_string(code))},
                      {"message", message},
                      {"exit_code", status}};
  std::cerr << j.dump() << '\n';
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metasir: SIR reliability statistics for uplink and downlink Poisson cellular networks"};
  app.set_version_flag("--version", METASIR_VERSION);

  std::optional<std::string> command, preset, config, direction, power_model;
  std::optional<std::string> eps, theta_db, orders, x_grid, p_hat_db, radii, output, name;
  std::optional<double> lambda, alpha;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> realizations;
  bool no_far_field = false, print_spec = false, list_presets = false;

  app.add_option("command", command,
                 "moments | meta | mld | bounds | simulate | kfun | compare | opt");
  app.add_option("--preset", preset, "figure preset, see --list-presets");
  app.add_option("--config", config, "flat JSON config; flags override its values");
  app.add_option("--direction", direction, "uplink | downlink");
  app.add_option("--power-model", power_model, "fpc | tfpc");
  app.add_option("--lambda", lambda, "BS intensity");
  app.add_option("--alpha", alpha, "path-loss exponent (> 2)");
  app.add_option("--eps", eps, "power-control exponents, list or start:step:stop");
  app.add_option("--theta-db", theta_db, "SIR thresholds in dB, list or start:step:stop");
  app.add_option("--b", orders, "moment orders");
  app.add_option("--x", x_grid, "reliability grid in (0, 1)");
  app.add_option("--p-hat-db", p_hat_db, "TFPC maximum powers in dB (inf allowed)");
  app.add_option("--radii", radii, "radii for kfun");
  app.add_option("-o,--output", output, "output directory");
  app.add_option("--name", name, "output base name");
  app.add_option("--seed", seed, "master seed (default METASIR_SEED or 1)");
  app.add_option("--realizations", realizations, "network realizations (0: about 10^4 links)");
  app.add_flag("--no-far-field", no_far_field, "drop the mean-field term for interferers beyond the window");
  app.add_flag("--print-spec", print_spec, "print the resolved config and exit");
  app.add_flag("--list-presets", list_presets, "list figure presets and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error(ErrorCode::ConfigParseError, e.what());
  }

  try {
    if (list_presets) {
      for (const auto& p : ex::preset_names()) std::cout << p << '\n';
      return 0;
    }
    ex::ExperimentSpec spec = preset ? ex::figure_preset(*preset) : ex::ExperimentSpec{};
    spec.seed = ex::default_seed();
    if (config) spec = ex::load_spec(*config, spec);
    if (command) spec.command = ex::parse_command(*command);
    nlohmann::json flags = nlohmann::json::object();
    if (direction) flags["direction"] = *direction;
    if (power_model) flags["power_model"] = *power_model;
    if (lambda) flags["lambda"] = *lambda;
    if (alpha) flags["alpha"] = *alpha;
    if (eps) flags["eps"] = *eps;
    if (theta_db) flags["theta_db"] = *theta_db;
    if (orders) flags["b"] = *orders;
    if (x_grid) flags["x"] = *x_grid;
    if (p_hat_db) flags["p_hat_db"] = *p_hat_db;
    if (radii) flags["radii"] = *radii;
    if (output) flags["output"] = *output;
    if (name) flags["name"] = *name;
    if (seed) flags["seed"] = *seed;
    if (realizations) flags["realizations"] = *realizations;
    if (no_far_field) flags["far_field"] = false;
    spec = ex::from_json(flags, spec);

    if (print_spec) {
      ex::validate_spec(spec);
      std::cout << ex::to_json(spec).dump(2) << '\n';
      return 0;
    }
    const auto report = ex::run(spec);
    nlohmann::json out = {{"status", report.status}, {"flagged", report.flagged}};
    out["files"] = nlohmann::json::array();
    for (const auto& f : report.files) out["files"].push_back(f.string());
    std::cout << out.dump(2) << '\n';
    if (report.status != 0) {
      return report_error(ErrorCode::QuadratureFailure,
                          std::to_string(report.flagged.size()) + " values did not converge");
    }
    return 0;
  } catch (const Error& e) {
    return report_error(e.code(), e.what());
  } catch (const std::exception& e) {
    return report_error(ErrorCode::IoError, e.what());
  }
}
