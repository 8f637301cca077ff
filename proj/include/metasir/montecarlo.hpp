#pragma once

// Monte Carlo estimation of the conditional success probability: repeated
// network realizations, per-link Ps samples, empirical moments, empirical
// meta distributions and K-function estimates.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "metasir/core_model.hpp"
#include "metasir/geometry.hpp"
#include "metasir/metadist.hpp"

namespace metasir::mc {

struct LinkSample {
  std::uint64_t realization = 0;
  std::size_t cell = 0;
  double r = 0.0;
  std::size_t n_interferers = 0;
  double ps = 0.0;
};

struct SimulationOptions {
  double window_radius = 0.0;  ///< 0 selects 15 / sqrt(lambda)
  double guard_radius = 0.0;   ///< 0 selects 10 / sqrt(lambda)
  /// Accounts for interferers beyond the window by their mean field
  /// (linearized, homogeneous density lambda, mean power of the sampled
  /// users).
  bool far_field = true;
  unsigned workers = 0;  ///< 0 selects the hardware concurrency
};

struct PsSampleSet {
  std::vector<LinkSample> links;
  SystemConfig cfg;
  std::uint64_t seed = 0;
  std::size_t realizations = 0;
  double window_radius = 0.0;
  double guard_radius = 0.0;
  bool far_field = true;

  std::vector<double> values() const;
};

/// Realizations needed for about `links` guarded links (about 100 pi per
/// realization with the default guard).
std::size_t realizations_for_links(std::size_t links);

/// Runs `tasks` in parallel; results are written by index, so the outcome
/// does not depend on `workers`. The first exception is rethrown.
void parallel_for(std::size_t tasks, unsigned workers, const std::function<void(std::size_t)>& body);

/// For every guarded cell, Ps of its link under each configuration.
/// Uplink interferers are the users of all other cells, downlink
/// interferers all other BSs with their own users' link distances as power
/// arguments. Result is indexed [config][link].
std::vector<std::vector<LinkSample>> evaluate_links(const geo::NetworkRealization& net,
                                                    std::span<const SystemConfig> cfgs,
                                                    bool far_field,
                                                    std::uint64_t realization = 0);

/// int_{|x| > w} |x - y|^{-alpha} dx for |y| = rho < w.
double outside_disk_integral(double rho, double w, double alpha);

/// Every configuration is evaluated on the same realizations; all must
/// share lambda. Geometry errors are rethrown with the realization index.
std::vector<PsSampleSet> run_experiments(std::span<const SystemConfig> cfgs,
                                         std::size_t n_realizations, std::uint64_t seed,
                                         const SimulationOptions& options = {});

PsSampleSet run_experiment(const SystemConfig& cfg, std::size_t n_realizations,
                           std::uint64_t seed, const SimulationOptions& options = {});

/// (1/n) sum s^b with the standard error in abs_error. For Re b < 0,
/// converged is false when the largest 1% of the summands carry more than
/// half of the total (heavy tail). Throws EmptySampleSet.
MomentValue empirical_moment(std::span<const double> samples, std::complex<double> b);
MomentValue empirical_moment(const PsSampleSet& set, std::complex<double> b);

/// Fraction of samples strictly above each x. Throws EmptySampleSet.
meta::MetaCurve empirical_meta(std::span<const double> samples, std::span<const double> x_grid);
meta::MetaCurve empirical_meta(const PsSampleSet& set, std::span<const double> x_grid);

struct KFunctionResult {
  std::vector<double> radii;
  std::vector<double> empirical;
  std::vector<double> k1;  ///< from the fitted interferer intensity
  std::vector<double> k2;  ///< from the baseline interferer intensity
  std::size_t centers = 0;
};

/// Mean number of users of other cells within r of a BS, divided by lambda.
/// Every guarded BS serves as a center.
KFunctionResult k_function_experiment(double lambda, std::size_t n_realizations,
                                      std::span<const double> radii, std::uint64_t seed,
                                      const SimulationOptions& options = {});

/// Flat object with infinite values written as the string "inf".
nlohmann::json config_json(const SystemConfig& cfg);

nlohmann::json metadata(const PsSampleSet& set);

/// Writes realization_id,cell_id,R,n_interferers,ps rows to `csv` and the
/// metadata next to it as <stem>.meta.json. Throws IoError.
void write_samples(const PsSampleSet& set, const std::filesystem::path& csv);

}  // namespace metasir::mc
