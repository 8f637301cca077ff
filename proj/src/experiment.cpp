#include "metasir/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>

#include "metasir/analytic_moments.hpp"
#include "metasir/metadist.hpp"
#include "metasir/montecarlo.hpp"

namespace metasir::experiment {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kCsvSchemaVersion = 1;
constexpr std::size_t kDefaultLinks = 10000;

[[noreturn]] void parse_error(const std::string& what) {
  throw Error(ErrorCode::ConfigParseError, what);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(std::string_view text) {
  const std::string t = trim(text);
  if (t == "inf" || t == "+inf") return kInf;
  if (t == "-inf") return -kInf;
  double v = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || end != t.data() + t.size() || std::isnan(v)) {
    parse_error("not a number: '" + t + "'");
  }
  return v;
}

json number_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json sweep_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_json(x));
  return a;
}

std::vector<double> sweep_from_json(const json& j, const std::string& key) {
  if (j.is_string()) return parse_sweep(j.get<std::string>());
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) parse_error("'" + key + "' must be an array or a sweep string");
  std::vector<double> out;
  for (const auto& e : j) {
    if (e.is_number()) {
      out.push_back(e.get<double>());
    } else if (e.is_string()) {
      out.push_back(parse_number(e.get<std::string>()));
    } else {
      parse_error("'" + key + "' has a non-numeric entry");
    }
  }
  return out;
}

// One point of the parameter sweep.
struct Point {
  double p_hat_db = kInf;
  double eps = 0.0;
  double theta_db = 0.0;
  SystemConfig cfg;
};

bool truncated(const ExperimentSpec& s) { return s.cfg.power_model == PowerModel::tfpc; }

std::vector<Point> sweep_points(const ExperimentSpec& s) {
  std::vector<double> caps = truncated(s) ? s.p_hat_db : std::vector<double>{kInf};
  std::vector<Point> out;
  for (double cap : caps) {
    for (double eps : s.epsilons) {
      for (double tdb : s.theta_db) {
        Point p;
        p.p_hat_db = cap;
        p.eps = eps;
        p.theta_db = tdb;
        p.cfg = s.cfg;
        p.cfg.epsilon = eps;
        p.cfg.theta = db_to_linear(tdb);
        p.cfg.p_hat = std::isinf(cap) ? kInf : db_to_linear(cap);
        if (std::isinf(cap)) p.cfg.power_model = PowerModel::fpc;
        out.push_back(p);
      }
    }
  }
  return out;
}

std::string label(const Point& p, const ExperimentSpec& s) {
  std::ostringstream o;
  if (truncated(s)) o << "p_hat_db=" << format_number(p.p_hat_db) << ' ';
  o << "eps=" << format_number(p.eps) << " theta_db=" << format_number(p.theta_db);
  return o.str();
}

bool numeric_code(ErrorCode c) { return exit_code(c) == 3; }

class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add(std::vector<double> row) { rows_.push_back(std::move(row)); }
  const std::vector<std::string>& columns() const { return columns_; }

  void write(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (std::size_t k = 0; k < columns_.size(); ++k) out << (k ? "," : "") << columns_[k];
    out << '\n';
    for (const auto& r : rows_) {
      for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "," : "") << format_number(r[k]);
      out << '\n';
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

// Collects flags from worker threads.
class Flags {
 public:
  void add(std::string s) {
    std::lock_guard lock(m_);
    items_.push_back(std::move(s));
  }
  std::vector<std::string> sorted() const {
    auto v = items_;
    std::sort(v.begin(), v.end());
    return v;
  }

 private:
  std::mutex m_;
  std::vector<std::string> items_;
};

std::vector<std::string> prefix_columns(const ExperimentSpec& s) {
  std::vector<std::string> c;
  if (truncated(s)) c.push_back("p_hat_db");
  c.push_back("theta_db");
  c.push_back("eps");
  return c;
}

std::vector<double> prefix_values(const Point& p, const ExperimentSpec& s) {
  std::vector<double> v;
  if (truncated(s)) v.push_back(p.p_hat_db);
  v.push_back(p.theta_db);
  v.push_back(p.eps);
  return v;
}

std::vector<std::string> concat(std::vector<std::string> a, std::initializer_list<const char*> b) {
  for (const char* s : b) a.emplace_back(s);
  return a;
}

std::vector<double> concat(std::vector<double> a, std::initializer_list<double> b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Real moment with failures turned into flags and NaN.
double real_moment(const SystemConfig& cfg, double b, Flags& flags, const std::string& where) {
  try {
    const MomentValue m = analytic::moment(cfg, b);
    if (!m.converged) flags.add(where + " b=" + format_number(b) + ": not converged");
    return m.value.real();
  } catch (const Error& e) {
    if (!numeric_code(e.code())) throw;
    flags.add(where + " b=" + format_number(b) + ": " + e.what());
    return std::nan("");
  }
}

double beta_value(double m1, double m2, double x, Flags& flags, const std::string& where,
                  bool report) {
  try {
    return meta::beta_ccdf(meta::beta_fit(m1, m2), x);
  } catch (const Error& e) {
    if (!numeric_code(e.code())) throw;
    if (report) flags.add(where + " beta: " + e.what());
    return std::nan("");
  }
}

std::size_t realizations(const ExperimentSpec& s) {
  return s.realizations > 0 ? s.realizations : mc::realizations_for_links(kDefaultLinks);
}

mc::SimulationOptions sim_options(const ExperimentSpec& s) {
  mc::SimulationOptions o;
  o.far_field = s.far_field;
  return o;
}

std::vector<SystemConfig> configs(const std::vector<Point>& pts) {
  std::vector<SystemConfig> c;
  for (const auto& p : pts) c.push_back(p.cfg);
  return c;
}

struct Bounds {
  double markov_lower = 0.0, markov_upper = 1.0;
  double cheb_lower = 0.0, cheb_upper = 1.0;
  double pz = 0.0;
};

Bounds all_bounds(const std::array<double, 4>& m, double x) {
  Bounds b;
  for (int k = 1; k <= 4; ++k) {
    const auto mk = meta::markov_bounds(m, k, x);
    b.markov_lower = std::max(b.markov_lower, mk.lower);
    b.markov_upper = std::min(b.markov_upper, mk.upper);
  }
  const auto c = meta::chebyshev_bounds(m[0], m[1], x);
  b.cheb_lower = c.lower;
  b.cheb_upper = c.upper;
  b.pz = x < m[0] ? meta::paley_zygmund(m[0], m[1], x / m[0]) : 0.0;
  return b;
}

struct Output {
  Table table;
  json extra = json::object();
};

Output run_moments(const ExperimentSpec& s, Flags& flags) {
  const auto pts = sweep_points(s);
  Output out{Table(concat(prefix_columns(s), {"b", "re", "im", "abs_err"}))};
  std::vector<MomentValue> values(pts.size() * s.orders.size());
  mc::parallel_for(values.size(), 0, [&](std::size_t k) {
    const Point& p = pts[k / s.orders.size()];
    const double b = s.orders[k % s.orders.size()];
    try {
      values[k] = analytic::moment(p.cfg, b);
      if (!values[k].converged) flags.add(label(p, s) + " b=" + format_number(b) + ": not converged");
    } catch (const Error& e) {
      if (!numeric_code(e.code())) throw;
      values[k] = {std::complex<double>(std::nan(""), std::nan("")), std::nan(""), false};
      flags.add(label(p, s) + " b=" + format_number(b) + ": " + e.what());
    }
  });
  for (std::size_t k = 0; k < values.size(); ++k) {
    const Point& p = pts[k / s.orders.size()];
    const double b = s.orders[k % s.orders.size()];
    out.table.add(concat(prefix_values(p, s),
                         {b, values[k].value.real(), values[k].value.imag(), values[k].abs_error}));
  }
  return out;
}

Output run_mld(const ExperimentSpec& s, Flags& flags) {
  const auto pts = sweep_points(s);
  Output out{Table(concat(prefix_columns(s), {"mld", "divergent"}))};
  std::vector<double> v(pts.size());
  mc::parallel_for(pts.size(), 0, [&](std::size_t k) {
    const SystemConfig& c = pts[k].cfg;
    if (c.direction == Direction::downlink) {
      v[k] = analytic::downlink_mld(c.theta, c.alpha, c.epsilon);
    } else {
      v[k] = real_moment(c, -1.0, flags, label(pts[k], s));
    }
  });
  for (std::size_t k = 0; k < pts.size(); ++k) {
    out.table.add(concat(prefix_values(pts[k], s), {v[k], std::isinf(v[k]) ? 1.0 : 0.0}));
  }
  if (s.cfg.direction == Direction::downlink) {
    const double tc = analytic::critical_theta(s.cfg.alpha);
    out.extra["critical_theta"] = tc;
    out.extra["critical_theta_db"] = linear_to_db(tc);
  } else if (s.cfg.power_model == PowerModel::fpc) {
    // Applies at epsilon = 1 - 2/alpha only.
    const double tc = analytic::uplink_critical_theta(s.cfg.alpha);
    out.extra["critical_eps"] = 1.0 - 2.0 / s.cfg.alpha;
    out.extra["critical_theta"] = tc;
    out.extra["critical_theta_db"] = linear_to_db(tc);
  }
  return out;
}

std::vector<std::array<double, 4>> four_moments(const std::vector<Point>& pts,
                                                const ExperimentSpec& s, Flags& flags) {
  std::vector<std::array<double, 4>> m(pts.size());
  mc::parallel_for(pts.size() * 4, 0, [&](std::size_t k) {
    m[k / 4][k % 4] = real_moment(pts[k / 4].cfg, static_cast<double>(k % 4 + 1), flags,
                                  label(pts[k / 4], s));
  });
  return m;
}

Output run_bounds(const ExperimentSpec& s, Flags& flags) {
  const auto pts = sweep_points(s);
  auto cols = concat(prefix_columns(s), {"x"});
  for (int k = 1; k <= 4; ++k) cols.push_back("markov_lower_" + std::to_string(k));
  for (int k = 1; k <= 4; ++k) cols.push_back("markov_upper_" + std::to_string(k));
  cols = concat(cols, {"chebyshev_lower", "chebyshev_upper", "paley_zygmund"});
  Output out{Table(cols)};
  const auto m = four_moments(pts, s, flags);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    for (double x : s.x_grid) {
      auto row = concat(prefix_values(pts[k], s), {x});
      std::array<meta::Bounds, 4> mk;
      for (int b = 1; b <= 4; ++b) mk[b - 1] = meta::markov_bounds(m[k], b, x);
      for (int b = 0; b < 4; ++b) row.push_back(mk[b].lower);
      for (int b = 0; b < 4; ++b) row.push_back(mk[b].upper);
      const auto all = all_bounds(m[k], x);
      out.table.add(concat(row, {all.cheb_lower, all.cheb_upper, all.pz}));
    }
  }
  return out;
}

std::vector<meta::MetaCurve> gp_curves(const std::vector<Point>& pts, const ExperimentSpec& s,
                                       Flags& flags) {
  std::vector<meta::MetaCurve> curves(pts.size());
  mc::parallel_for(pts.size(), 0, [&](std::size_t k) {
    curves[k] = meta::analytic_meta(pts[k].cfg, s.x_grid);
    if (!curves[k].converged) flags.add(label(pts[k], s) + " gil_pelaez: not converged");
  });
  return curves;
}

Output run_meta(const ExperimentSpec& s, Flags& flags) {
  const auto pts = sweep_points(s);
  Output out{Table(concat(prefix_columns(s), {"x", "gil_pelaez", "beta"}))};
  const auto curves = gp_curves(pts, s, flags);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const std::string where = label(pts[k], s);
    const double m1 = real_moment(pts[k].cfg, 1.0, flags, where);
    const double m2 = real_moment(pts[k].cfg, 2.0, flags, where);
    for (std::size_t i = 0; i < s.x_grid.size(); ++i) {
      const double x = s.x_grid[i];
      out.table.add(concat(prefix_values(pts[k], s),
                           {x, curves[k].values[i], beta_value(m1, m2, x, flags, where, i == 0)}));
    }
  }
  return out;
}

json sim_extra(const mc::PsSampleSet& set) {
  json j = mc::metadata(set);
  j.erase("config");
  return j;
}

Output run_simulate(const ExperimentSpec& s, Flags& flags, std::vector<fs::path>& files) {
  const auto pts = sweep_points(s);
  Output out{Table(concat(prefix_columns(s), {"links", "m1", "m1_se", "variance", "m1_analytic",
                                              "variance_analytic"}))};
  const auto cfgs = configs(pts);
  const auto sets = mc::run_experiments(cfgs, realizations(s), s.seed, sim_options(s));
  std::vector<std::array<double, 2>> analytic(pts.size());
  mc::parallel_for(pts.size() * 2, 0, [&](std::size_t k) {
    analytic[k / 2][k % 2] = real_moment(cfgs[k / 2], static_cast<double>(k % 2 + 1), flags,
                                         label(pts[k / 2], s));
  });
  json samples = json::array();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto m1 = mc::empirical_moment(sets[k], 1.0);
    const auto m2 = mc::empirical_moment(sets[k], 2.0);
    const double a1 = analytic[k][0], a2 = analytic[k][1];
    out.table.add(concat(prefix_values(pts[k], s),
                         {static_cast<double>(sets[k].links.size()), m1.value.real(), m1.abs_error,
                          m2.value.real() - m1.value.real() * m1.value.real(), a1, a2 - a1 * a1}));
    const fs::path path = fs::path(s.output) / (s.name + "_samples_" + std::to_string(k) + ".csv");
    mc::write_samples(sets[k], path);
    files.push_back(path);
    auto side = path;
    side.replace_extension();
    side += ".meta.json";
    files.push_back(side);
    samples.push_back({{"file", path.filename().string()}, {"point", label(pts[k], s)}});
  }
  if (!sets.empty()) out.extra["simulation"] = sim_extra(sets.front());
  out.extra["sample_files"] = samples;
  return out;
}

Output run_kfun(const ExperimentSpec& s) {
  Output out{Table({"r", "empirical", "k1", "k2"})};
  const std::size_t n = s.realizations > 0 ? s.realizations : 1000;
  const auto k = mc::k_function_experiment(s.cfg.lambda, n, s.radii, s.seed, sim_options(s));
  for (std::size_t i = 0; i < k.radii.size(); ++i) {
    out.table.add({k.radii[i], k.empirical[i], k.k1[i], k.k2[i]});
  }
  out.extra["realizations"] = n;
  out.extra["centers"] = k.centers;
  return out;
}

Output run_compare(const ExperimentSpec& s, Flags& flags) {
  const auto pts = sweep_points(s);
  Output out{Table(concat(prefix_columns(s),
                          {"x", "gil_pelaez", "empirical", "beta", "markov_lower", "markov_upper",
                           "chebyshev_lower", "chebyshev_upper", "paley_zygmund"}))};
  const auto cfgs = configs(pts);
  const auto sets = mc::run_experiments(cfgs, realizations(s), s.seed, sim_options(s));
  const auto curves = gp_curves(pts, s, flags);
  const auto m = four_moments(pts, s, flags);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto ecdf = mc::empirical_meta(sets[k], s.x_grid);
    const std::string where = label(pts[k], s);
    for (std::size_t i = 0; i < s.x_grid.size(); ++i) {
      const double x = s.x_grid[i];
      const auto b = all_bounds(m[k], x);
      out.table.add(concat(prefix_values(pts[k], s),
                           {x, curves[k].values[i], ecdf.values[i],
                            beta_value(m[k][0], m[k][1], x, flags, where, i == 0), b.markov_lower,
                            b.markov_upper, b.cheb_lower, b.cheb_upper, b.pz}));
    }
  }
  if (!sets.empty()) {
    out.extra["simulation"] = sim_extra(sets.front());
    json links = json::array();
    for (const auto& set : sets) links.push_back(set.links.size());
    out.extra["simulation"]["links"] = links;
  }
  return out;
}

Output run_opt(const ExperimentSpec& s, Flags& flags) {
  const double alpha = s.cfg.alpha;
  const bool up = s.cfg.direction == Direction::uplink;
  Output out{Table(up ? std::vector<std::string>{"theta_db", "eps_opt", "m1_opt"}
                      : std::vector<std::string>{"theta_db", "c", "rho_opt", "eps_opt", "mld_opt"})};
  std::vector<std::vector<double>> rows(s.theta_db.size());
  mc::parallel_for(rows.size(), 0, [&](std::size_t k) {
    const double tdb = s.theta_db[k];
    const double theta = db_to_linear(tdb);
    if (up) {
      const double eps = analytic::epsilon_opt_uplink(theta, alpha);
      SystemConfig c = s.cfg;
      c.power_model = PowerModel::fpc;
      c.theta = theta;
      c.epsilon = eps;
      rows[k] = {tdb, eps, real_moment(c, 1.0, flags, "theta_db=" + format_number(tdb))};
    } else {
      const double c = analytic::mld_constant(theta, alpha);
      const double rho = analytic::rho_opt_downlink(c);
      const double eps = rho * 2.0 / alpha;
      rows[k] = {tdb, c, rho, eps, analytic::downlink_mld(theta, alpha, eps)};
    }
  });
  for (auto& r : rows) out.table.add(std::move(r));
  return out;
}

}  // namespace

std::string_view to_string(Command c) {
  switch (c) {
    case Command::moments: return "moments";
    case Command::meta: return "meta";
    case Command::mld: return "mld";
    case Command::bounds: return "bounds";
    case Command::simulate: return "simulate";
    case Command::kfun: return "kfun";
    case Command::compare: return "compare";
    case Command::opt: return "opt";
  }
  return "unknown";
}

Command parse_command(std::string_view name) {
  for (Command c : {Command::moments, Command::meta, Command::mld, Command::bounds,
                    Command::simulate, Command::kfun, Command::compare, Command::opt}) {
    if (to_string(c) == name) return c;
  }
  parse_error("unknown command '" + std::string(name) + "'");
}

std::vector<double> parse_sweep(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) parse_error("empty sweep");
  std::vector<double> out;
  if (t.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::string_view rest = t;
    for (;;) {
      const auto pos = rest.find(':');
      parts.push_back(parse_number(rest.substr(0, pos)));
      if (pos == std::string_view::npos) break;
      rest = rest.substr(pos + 1);
    }
    if (parts.size() != 3) parse_error("sweep must be start:step:stop, got '" + t + "'");
    const double a = parts[0], step = parts[1], b = parts[2];
    if (!std::isfinite(a) || !std::isfinite(b) || !(step > 0.0) || !std::isfinite(step) || b < a) {
      parse_error("sweep needs finite ends, a positive step and start <= stop: '" + t + "'");
    }
    const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9)) + 1;
    if (n > 1000000) parse_error("sweep has too many points");
    for (long k = 0; k < n; ++k) {
      double v = a + static_cast<double>(k) * step;
      if (std::abs(v) < 1e-12 * step) v = 0.0;
      // Remove the last-digit noise of a + k * step.
      v = std::round(v * 1e12) / 1e12;
      out.push_back(v);
    }
    return out;
  }
  std::string_view rest = t;
  for (;;) {
    const auto pos = rest.find(',');
    out.push_back(parse_number(rest.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    rest = rest.substr(pos + 1);
  }
  return out;
}

std::vector<std::string> preset_names() {
  return {"fig2",  "fig4",  "fig5",  "fig6",  "fig7",  "fig8",  "fig9", "fig11",
          "fig12", "fig13", "fig14", "fig15", "fig16", "tfpc"};
}

ExperimentSpec figure_preset(std::string_view name) {
  ExperimentSpec s;
  s.name = std::string(name);
  s.seed = 1;
  const auto theta_wide = parse_sweep("-10:2:20");
  const auto x_grid = parse_sweep("0.05:0.05:0.95");
  auto at = [&](Command c, Direction d, double alpha) {
    s.command = c;
    s.cfg.direction = d;
    s.cfg.alpha = alpha;
  };
  if (name == "fig2") {
    s.command = Command::kfun;
    s.radii = parse_sweep("0:0.05:3");
    s.realizations = 1000;
  } else if (name == "fig4" || name == "fig11" || name == "fig12") {
    at(Command::simulate, name == "fig4" ? Direction::uplink : Direction::downlink,
       name == "fig12" ? 3.0 : 4.0);
    s.epsilons = {0.0, 0.5, 1.0};
    s.theta_db = theta_wide;
  } else if (name == "fig5") {
    at(Command::moments, Direction::uplink, 4.0);
    s.epsilons = {0.5, 1.0, 1.5, 2.0};
    s.theta_db = theta_wide;
  } else if (name == "fig6") {
    at(Command::moments, Direction::uplink, 4.0);
    s.epsilons = parse_sweep("0:0.1:0.5");
    s.theta_db = parse_sweep("10:2:30");
    s.orders = {1.0};
  } else if (name == "fig7") {
    at(Command::mld, Direction::uplink, 3.0);
    s.epsilons = {0.0, 0.25, 0.5, 0.75, 1.0};
    s.theta_db = parse_sweep("-10:1:10");
  } else if (name == "fig8" || name == "fig9" || name == "fig16") {
    at(Command::compare, name == "fig16" ? Direction::downlink : Direction::uplink, 4.0);
    s.epsilons = name == "fig9" ? std::vector<double>{0.5} : std::vector<double>{0.0, 0.5, 1.0};
    s.theta_db = {0.0};
    s.x_grid = x_grid;
  } else if (name == "fig13" || name == "fig14") {
    const double alpha = name == "fig13" ? 3.0 : 4.0;
    at(Command::mld, Direction::downlink, alpha);
    const double delta = 2.0 / alpha;
    s.epsilons = {0.0, delta / 2.0, delta};
    s.theta_db = parse_sweep("-10:0.5:10");
  } else if (name == "fig15") {
    at(Command::compare, Direction::downlink, 3.0);
    s.epsilons = {0.0, 0.5, 1.0};
    s.theta_db = {-5.0};
    s.x_grid = x_grid;
  } else if (name == "tfpc") {
    at(Command::simulate, Direction::uplink, 4.0);
    s.cfg.power_model = PowerModel::tfpc;
    s.cfg.lambda = 0.1;
    s.epsilons = {1.0};
    s.p_hat_db = {0.0, 5.0, 10.0, 15.0, kInf};
    s.theta_db = theta_wide;
  } else {
    throw Error(ErrorCode::UnknownPreset, "unknown preset '" + std::string(name) + "'");
  }
  return s;
}

json to_json(const ExperimentSpec& s) {
  return {{"command", std::string(to_string(s.command))},
          {"direction", s.cfg.direction == Direction::uplink ? "uplink" : "downlink"},
          {"power_model", s.cfg.power_model == PowerModel::fpc ? "fpc" : "tfpc"},
          {"lambda", s.cfg.lambda},
          {"alpha", s.cfg.alpha},
          {"theta_db", sweep_json(s.theta_db)},
          {"eps", sweep_json(s.epsilons)},
          {"b", sweep_json(s.orders)},
          {"x", sweep_json(s.x_grid)},
          {"p_hat_db", sweep_json(s.p_hat_db)},
          {"radii", sweep_json(s.radii)},
          {"output", s.output},
          {"name", s.name},
          {"seed", s.seed},
          {"realizations", s.realizations},
          {"far_field", s.far_field}};
}

ExperimentSpec from_json(const json& j, ExperimentSpec s) {
  if (!j.is_object()) parse_error("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "command") {
        s.command = parse_command(v.get<std::string>());
      } else if (key == "direction") {
        const auto d = v.get<std::string>();
        if (d != "uplink" && d != "downlink") parse_error("direction must be uplink or downlink");
        s.cfg.direction = d == "uplink" ? Direction::uplink : Direction::downlink;
      } else if (key == "power_model") {
        const auto p = v.get<std::string>();
        if (p != "fpc" && p != "tfpc") parse_error("power_model must be fpc or tfpc");
        s.cfg.power_model = p == "fpc" ? PowerModel::fpc : PowerModel::tfpc;
      } else if (key == "lambda") {
        s.cfg.lambda = v.get<double>();
      } else if (key == "alpha") {
        s.cfg.alpha = v.get<double>();
      } else if (key == "theta_db") {
        s.theta_db = sweep_from_json(v, key);
      } else if (key == "eps") {
        s.epsilons = sweep_from_json(v, key);
      } else if (key == "b") {
        s.orders = sweep_from_json(v, key);
      } else if (key == "x") {
        s.x_grid = sweep_from_json(v, key);
      } else if (key == "p_hat_db") {
        s.p_hat_db = sweep_from_json(v, key);
      } else if (key == "radii") {
        s.radii = sweep_from_json(v, key);
      } else if (key == "output") {
        s.output = v.get<std::string>();
      } else if (key == "name") {
        s.name = v.get<std::string>();
      } else if (key == "seed") {
        s.seed = v.get<std::uint64_t>();
      } else if (key == "realizations") {
        s.realizations = v.get<std::size_t>();
      } else if (key == "far_field") {
        s.far_field = v.get<bool>();
      } else {
        parse_error("unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    parse_error(std::string("bad value type: ") + e.what());
  }
  return s;
}

ExperimentSpec load_spec(const fs::path& path, ExperimentSpec base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    parse_error(path.string() + ": " + e.what());
  }
  return from_json(j, std::move(base));
}

void validate_spec(const ExperimentSpec& s) {
  auto need = [](const std::vector<double>& v, const char* what) {
    if (v.empty()) parse_error(std::string(what) + " sweep is empty");
    if (!std::is_sorted(v.begin(), v.end())) parse_error(std::string(what) + " sweep is not sorted");
  };
  if (s.name.empty() || s.name.find('/') != std::string::npos) parse_error("bad output name");
  if (s.command == Command::kfun) {
    need(s.radii, "radii");
    SystemConfig c = s.cfg;
    c.power_model = PowerModel::fpc;
    validate_config(c);
    return;
  }
  need(s.theta_db, "theta_db");
  if (s.command != Command::opt) need(s.epsilons, "eps");
  if (s.command == Command::moments) need(s.orders, "b");
  if (s.command == Command::meta || s.command == Command::bounds || s.command == Command::compare) {
    need(s.x_grid, "x");
    if (s.x_grid.front() <= 0.0 || s.x_grid.back() >= 1.0) parse_error("x grid must lie in (0, 1)");
  }
  if (truncated(s)) need(s.p_hat_db, "p_hat_db");
  if (s.cfg.power_model == PowerModel::tfpc &&
      (s.cfg.direction == Direction::downlink || s.command == Command::opt)) {
    parse_error("TFPC is available for uplink moments and simulations only");
  }
  for (const auto& p : sweep_points(s)) validate_config(p.cfg);
  if (s.command == Command::opt) {
    SystemConfig c = s.cfg;
    c.power_model = PowerModel::fpc;
    validate_config(c);
  }
}

std::uint64_t default_seed() {
  const char* env = std::getenv("METASIR_SEED");
  if (env == nullptr || *env == '\0') return 1;
  std::uint64_t v = 0;
  const std::string_view t(env);
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size()) parse_error("METASIR_SEED is not an integer");
  return v;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigParseError:
    case ErrorCode::UnknownPreset:
    case ErrorCode::AlphaOutOfRange:
    case ErrorCode::NonPositiveParameter:
    case ErrorCode::TruncationWithoutCap:
      return 2;
    case ErrorCode::IoError:
      return 4;
    default:
      return 3;
  }
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

RunReport run(const ExperimentSpec& spec) {
  validate_spec(spec);
  const fs::path dir(spec.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create " + dir.string());

  RunReport report;
  Flags flags;
  std::vector<fs::path> extra_files;
  Output out{Table({})};
  switch (spec.command) {
    case Command::moments: out = run_moments(spec, flags); break;
    case Command::meta: out = run_meta(spec, flags); break;
    case Command::mld: out = run_mld(spec, flags); break;
    case Command::bounds: out = run_bounds(spec, flags); break;
    case Command::simulate: out = run_simulate(spec, flags, extra_files); break;
    case Command::kfun: out = run_kfun(spec); break;
    case Command::compare: out = run_compare(spec, flags); break;
    case Command::opt: out = run_opt(spec, flags); break;
  }

  const fs::path csv = dir / (spec.name + ".csv");
  const fs::path side = dir / (spec.name + ".meta.json");
  out.table.write(csv);
  report.flagged = flags.sorted();
  json meta = {{"spec", to_json(spec)},
               {"columns", out.table.columns()},
               {"csv_schema_version", kCsvSchemaVersion},
               {"tool_version", METASIR_VERSION},
               {"seed", spec.seed},
               {"tolerances",
                {{"moment_outer", {quad::kOuterTolerance.abs, quad::kOuterTolerance.rel}},
                 {"moment_inner", {quad::kInnerTolerance.abs, quad::kInnerTolerance.rel}},
                 {"gil_pelaez", {meta::kGilPelaezTolerance.abs, meta::kGilPelaezTolerance.rel}}}},
               {"flagged", report.flagged}};
  for (const auto& [k, v] : out.extra.items()) meta[k] = v;
  std::ofstream ms(side);
  if (!ms) throw Error(ErrorCode::IoError, "cannot write " + side.string());
  ms << meta.dump(2) << '\n';
  if (!ms) throw Error(ErrorCode::IoError, "write failed for " + side.string());

  report.files = {csv, side};
  report.files.insert(report.files.end(), extra_files.begin(), extra_files.end());
  report.status = report.flagged.empty() ? 0 : 3;
  return report;
}

}  // namespace metasir::experiment
