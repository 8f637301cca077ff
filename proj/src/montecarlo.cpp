#include "metasir/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <thread>

#include "metasir/rng.hpp"

namespace metasir::mc {
namespace {

using cplx = std::complex<double>;
using std::numbers::pi;

constexpr int kCsvSchemaVersion = 1;

geo::Window window_for(double lambda, const SimulationOptions& o) {
  return o.window_radius > 0.0 ? geo::Window::disk(o.window_radius) : geo::default_window(lambda);
}

double guard_for(double lambda, const SimulationOptions& o) {
  return o.guard_radius > 0.0 ? o.guard_radius : geo::default_guard_radius(lambda);
}

cplx power(double s, cplx b) {
  if (b == cplx{0.0, 0.0}) return 1.0;
  if (s <= 0.0) return b.real() > 0.0 ? cplx{0.0, 0.0} : cplx{kInf, 0.0};
  return std::exp(b * std::log(s));
}

std::vector<double> values_of(const PsSampleSet& set) { return set.values(); }

void require_samples(std::span<const double> s) {
  if (s.empty()) throw Error(ErrorCode::EmptySampleSet, "no samples");
}

}  // namespace

std::vector<double> PsSampleSet::values() const {
  std::vector<double> v;
  v.reserve(links.size());
  for (const auto& l : links) v.push_back(l.ps);
  return v;
}

std::size_t realizations_for_links(std::size_t links) {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(links) / (100.0 * pi))) + 1;
}

void parallel_for(std::size_t tasks, unsigned workers, const std::function<void(std::size_t)>& body) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(tasks, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex guard;
  auto run = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks) return;
      try {
        body(k);
      } catch (...) {
        std::lock_guard lock(guard);
        if (!failure) failure = std::current_exception();
        next = tasks;
        return;
      }
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

double outside_disk_integral(double rho, double w, double alpha) {
  // Angular average of |x - y|^{-alpha} at |x| = s is
  // s^{-alpha} sum_k ((alpha/2)_k / k!)^2 (rho/s)^{2k}; integrate s over (w, inf).
  const double z = (rho / w) * (rho / w);
  double coef = 1.0, zk = 1.0, sum = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const double term = coef * coef * zk / (alpha + 2.0 * k - 2.0);
    sum += term;
    if (term < 1e-16 * sum) break;
    coef *= (0.5 * alpha + k) / (k + 1.0);
    zk *= z;
  }
  return 2.0 * pi * std::pow(w, 2.0 - alpha) * sum;
}

std::vector<std::vector<LinkSample>> evaluate_links(const geo::NetworkRealization& net,
                                                    std::span<const SystemConfig> cfgs,
                                                    bool far_field, std::uint64_t realization) {
  const auto& bs = net.bs.points;
  const auto& cells = net.tessellation.cells();
  const bool disk = net.bs.window.shape == geo::WindowShape::disk;
  const double w = net.bs.window.extent;

  std::vector<double> mean_power(cfgs.size(), 0.0);
  if (far_field && disk) {
    for (std::size_t k = 0; k < cfgs.size(); ++k) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < bs.size(); ++i) {
        if (!cells[i].interior) continue;
        sum += transmit_power(geo::dist(net.users[i], bs[i]), cfgs[k]);
        ++n;
      }
      mean_power[k] = n > 0 ? sum / static_cast<double>(n) : 0.0;
    }
  }

  std::vector<std::vector<LinkSample>> out(cfgs.size());
  for (std::size_t i = 0; i < bs.size(); ++i) {
    if (!net.guarded[i]) continue;
    const LinkGeometry up = net.uplink(i);
    const LinkGeometry down = net.downlink(i);
    for (std::size_t k = 0; k < cfgs.size(); ++k) {
      const SystemConfig& cfg = cfgs[k];
      const bool uplink = cfg.direction == Direction::uplink;
      const LinkGeometry& g = uplink ? up : down;
      double ps = conditional_ps(g, cfg);
      if (far_field && disk) {
        const double rho = geo::norm(uplink ? bs[i] : net.users[i]);
        const double c = cfg.theta * std::pow(g.r, cfg.alpha) / transmit_power(g.r, cfg);
        ps *= std::exp(-cfg.lambda * mean_power[k] * c * outside_disk_integral(rho, w, cfg.alpha));
      }
      out[k].push_back({realization, i, g.r, g.interferers.size(), ps});
    }
  }
  return out;
}

std::vector<PsSampleSet> run_experiments(std::span<const SystemConfig> cfgs,
                                         std::size_t n_realizations, std::uint64_t seed,
                                         const SimulationOptions& options) {
  if (cfgs.empty()) return {};
  if (n_realizations < 1) {
    throw Error(ErrorCode::NonPositiveParameter, "need at least one realization");
  }
  for (const auto& c : cfgs) {
    validate_config(c);
    if (c.lambda != cfgs[0].lambda) {
      throw Error(ErrorCode::DegenerateInput, "configurations must share lambda");
    }
  }
  const double lambda = cfgs[0].lambda;
  const geo::Window window = window_for(lambda, options);
  const double guard = guard_for(lambda, options);

  std::vector<std::vector<std::vector<LinkSample>>> per(n_realizations);
  parallel_for(n_realizations, options.workers, [&](std::size_t r) {
    auto rng = make_stream(seed, r);
    try {
      const auto net = geo::sample_realization(cfgs[0], window, guard, rng);
      per[r] = evaluate_links(net, cfgs, options.far_field, r);
    } catch (const Error& e) {
      throw Error(e.code(), "realization " + std::to_string(r) + ": " + e.what());
    }
  });

  std::vector<PsSampleSet> out(cfgs.size());
  for (std::size_t k = 0; k < cfgs.size(); ++k) {
    PsSampleSet& s = out[k];
    s.cfg = cfgs[k];
    s.seed = seed;
    s.realizations = n_realizations;
    s.window_radius = window.extent;
    s.guard_radius = guard;
    s.far_field = options.far_field;
    for (auto& r : per) s.links.insert(s.links.end(), r[k].begin(), r[k].end());
  }
  return out;
}

PsSampleSet run_experiment(const SystemConfig& cfg, std::size_t n_realizations,
                           std::uint64_t seed, const SimulationOptions& options) {
  return std::move(run_experiments(std::span(&cfg, 1), n_realizations, seed, options).front());
}

MomentValue empirical_moment(std::span<const double> samples, cplx b) {
  require_samples(samples);
  const double n = static_cast<double>(samples.size());
  cplx mean{0.0, 0.0};
  std::vector<cplx> terms;
  terms.reserve(samples.size());
  for (double s : samples) {
    terms.push_back(power(s, b));
    mean += terms.back();
  }
  mean /= n;
  double var = 0.0;
  for (const cplx& t : terms) var += std::norm(t - mean);
  MomentValue out;
  out.value = mean;
  out.abs_error = samples.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : kInf;
  if (b.real() < 0.0) {
    std::vector<double> mag(terms.size());
    std::transform(terms.begin(), terms.end(), mag.begin(), [](cplx t) { return std::abs(t); });
    std::sort(mag.begin(), mag.end(), std::greater<>());
    const std::size_t top = (mag.size() + 99) / 100;
    double head = 0.0, total = 0.0;
    for (std::size_t k = 0; k < mag.size(); ++k) {
      if (k < top) head += mag[k];
      total += mag[k];
    }
    out.converged = std::isfinite(total) && !(head > 0.5 * total);
  }
  return out;
}

MomentValue empirical_moment(const PsSampleSet& set, cplx b) {
  const auto v = values_of(set);
  return empirical_moment(std::span<const double>(v), b);
}

meta::MetaCurve empirical_meta(std::span<const double> samples, std::span<const double> x_grid) {
  require_samples(samples);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  meta::MetaCurve c;
  c.provenance = meta::Provenance::empirical;
  const double n = static_cast<double>(sorted.size());
  for (double x : x_grid) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), x);
    c.x.push_back(x);
    c.values.push_back(static_cast<double>(above) / n);
  }
  return c;
}

meta::MetaCurve empirical_meta(const PsSampleSet& set, std::span<const double> x_grid) {
  const auto v = values_of(set);
  return empirical_meta(std::span<const double>(v), x_grid);
}

KFunctionResult k_function_experiment(double lambda, std::size_t n_realizations,
                                      std::span<const double> radii, std::uint64_t seed,
                                      const SimulationOptions& options) {
  SystemConfig cfg;
  cfg.lambda = lambda;
  validate_config(cfg);
  const geo::Window window = window_for(lambda, options);
  const double guard = guard_for(lambda, options);
  for (double r : radii) {
    if (r < 0.0 || r > window.extent - guard) {
      throw Error(ErrorCode::InsufficientPoints, "radius beyond the guard margin");
    }
  }

  struct Tally {
    std::vector<double> counts;
    std::size_t centers = 0;
  };
  std::vector<Tally> per(n_realizations);
  parallel_for(n_realizations, options.workers, [&](std::size_t r) {
    auto rng = make_stream(seed, r);
    const auto net = geo::sample_realization(cfg, window, guard, rng);
    Tally t;
    t.counts.assign(radii.size(), 0.0);
    const auto& bs = net.bs.points;
    for (std::size_t i = 0; i < bs.size(); ++i) {
      if (!net.guarded[i]) continue;
      ++t.centers;
      for (std::size_t j = 0; j < bs.size(); ++j) {
        if (j == i) continue;
        const double d = geo::dist(net.users[j], bs[i]);
        for (std::size_t k = 0; k < radii.size(); ++k) {
          if (d <= radii[k]) t.counts[k] += 1.0;
        }
      }
    }
    per[r] = std::move(t);
  });

  KFunctionResult out;
  out.radii.assign(radii.begin(), radii.end());
  out.empirical.assign(radii.size(), 0.0);
  for (const auto& t : per) {
    out.centers += t.centers;
    for (std::size_t k = 0; k < radii.size(); ++k) out.empirical[k] += t.counts[k];
  }
  for (std::size_t k = 0; k < radii.size(); ++k) {
    out.empirical[k] = out.centers > 0 ? out.empirical[k] / static_cast<double>(out.centers) / lambda : 0.0;
    out.k1.push_back(geo::k_function(radii[k], lambda, geo::IntensityVariant::fitted));
    out.k2.push_back(geo::k_function(radii[k], lambda, geo::IntensityVariant::baseline));
  }
  return out;
}

nlohmann::json config_json(const SystemConfig& cfg) {
  auto number = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  return {{"direction", cfg.direction == Direction::uplink ? "uplink" : "downlink"},
          {"power_model", cfg.power_model == PowerModel::fpc ? "fpc" : "tfpc"},
          {"lambda", cfg.lambda},
          {"alpha", cfg.alpha},
          {"epsilon", cfg.epsilon},
          {"theta", cfg.theta},
          {"p_hat", number(cfg.p_hat)}};
}

nlohmann::json metadata(const PsSampleSet& set) {
  return {{"config", config_json(set.cfg)},
          {"seed", set.seed},
          {"realizations", set.realizations},
          {"links", set.links.size()},
          {"window", {{"shape", "disk"}, {"radius", set.window_radius}}},
          {"guard_radius", set.guard_radius},
          {"far_field_correction", set.far_field},
          {"links_per_realization", "all guarded cells"},
          {"rng", "mt19937_64 seeded with splitmix64(seed + 0x9E3779B97F4A7C15 * (index + 1))"},
          {"csv_schema_version", kCsvSchemaVersion},
          {"tool_version", METASIR_VERSION}};
}

void write_samples(const PsSampleSet& set, const std::filesystem::path& csv) {
  std::ofstream out(csv);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + csv.string());
  out << "realization_id,cell_id,R,n_interferers,ps\n" << std::setprecision(17);
  for (const auto& l : set.links) {
    out << l.realization << ',' << l.cell << ',' << l.r << ',' << l.n_interferers << ',' << l.ps
        << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + csv.string());
  auto side = csv;
  side.replace_extension();
  side += ".meta.json";
  std::ofstream meta(side);
  if (!meta) throw Error(ErrorCode::IoError, "cannot write " + side.string());
  meta << metadata(set).dump(2) << '\n';
  if (!meta) throw Error(ErrorCode::IoError, "write failed for " + side.string());
}

}  // namespace metasir::mc
