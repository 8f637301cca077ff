#include "metasir/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace metasir::geo {
namespace {

using std::numbers::pi;

constexpr int kDiskSides = 256;
constexpr int kMaxBucketsPerSide = 2048;
constexpr long kWindowEdge = -1;

struct LabeledPolygon {
  std::vector<Point> v;
  std::vector<long> label;  // label[k] belongs to the edge v[k] -> v[k+1]
};

// Keeps the part of `poly` where dot(p, n) <= c. New edges get `label`.
LabeledPolygon clip(const LabeledPolygon& poly, Point n, double c, long label) {
  LabeledPolygon out;
  const std::size_t m = poly.v.size();
  out.v.reserve(m + 1);
  out.label.reserve(m + 1);
  for (std::size_t k = 0; k < m; ++k) {
    const Point a = poly.v[k];
    const Point b = poly.v[(k + 1) % m];
    const double fa = dot(a, n) - c;
    const double fb = dot(b, n) - c;
    const bool in_a = fa <= 0.0;
    const bool in_b = fb <= 0.0;
    if (in_a) {
      out.v.push_back(a);
      out.label.push_back(poly.label[k]);
    }
    if (in_a != in_b) {
      const double t = fa / (fa - fb);
      out.v.push_back(a + t * (b - a));
      out.label.push_back(in_a ? label : poly.label[k]);
    }
  }
  return out;
}

void drop_short_edges(LabeledPolygon& poly, double eps) {
  std::size_t k = 0;
  while (poly.v.size() > 3 && k < poly.v.size()) {
    const std::size_t next = (k + 1) % poly.v.size();
    if (dist(poly.v[k], poly.v[next]) < eps) {
      poly.v.erase(poly.v.begin() + static_cast<std::ptrdiff_t>(k));
      poly.label.erase(poly.label.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      ++k;
    }
  }
}

double bounding_extent(const Window& w) {
  return w.shape == WindowShape::disk ? w.extent / std::cos(pi / kDiskSides) : w.extent;
}

}  // namespace

double Window::area() const {
  return shape == WindowShape::disk ? pi * extent * extent : 4.0 * extent * extent;
}

bool Window::contains(Point p) const {
  if (shape == WindowShape::disk) return norm(p) <= extent;
  return std::abs(p.x) <= extent && std::abs(p.y) <= extent;
}

double Window::boundary_distance(Point p) const {
  if (shape == WindowShape::disk) return extent - norm(p);
  return extent - std::max(std::abs(p.x), std::abs(p.y));
}

std::vector<Point> Window::polygon() const {
  if (shape == WindowShape::square) {
    const double e = extent;
    return {{-e, -e}, {e, -e}, {e, e}, {-e, e}};
  }
  std::vector<Point> out(kDiskSides);
  const double r = bounding_extent(*this);
  for (int k = 0; k < kDiskSides; ++k) {
    const double a = 2.0 * pi * k / kDiskSides;
    out[static_cast<std::size_t>(k)] = {r * std::cos(a), r * std::sin(a)};
  }
  return out;
}

Window default_window(double lambda) { return Window::disk(15.0 / std::sqrt(lambda)); }

double default_guard_radius(double lambda) { return 10.0 / std::sqrt(lambda); }

PointSet sample_ppp(double lambda, const Window& window, std::mt19937_64& rng) {
  if (!(lambda > 0.0) || !(window.extent > 0.0)) {
    throw Error(ErrorCode::NonPositiveParameter, "PPP needs lambda > 0 and a nonempty window");
  }
  std::poisson_distribution<long> count(lambda * window.area());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointSet out;
  out.window = window;
  const long n = count(rng);
  out.points.reserve(static_cast<std::size_t>(n));
  for (long k = 0; k < n; ++k) {
    if (window.shape == WindowShape::disk) {
      const double r = window.extent * std::sqrt(u(rng));
      const double a = 2.0 * pi * u(rng);
      out.points.push_back({r * std::cos(a), r * std::sin(a)});
    } else {
      const double x = window.extent * (2.0 * u(rng) - 1.0);
      const double y = window.extent * (2.0 * u(rng) - 1.0);
      out.points.push_back({x, y});
    }
  }
  return out;
}

double polygon_area(std::span<const Point> polygon) {
  double a = 0.0;
  for (std::size_t k = 0; k < polygon.size(); ++k) {
    a += cross(polygon[k], polygon[(k + 1) % polygon.size()]);
  }
  return 0.5 * a;
}

bool polygon_contains(std::span<const Point> polygon, Point p) {
  if (polygon.size() < 3) return false;
  for (std::size_t k = 0; k < polygon.size(); ++k) {
    const Point a = polygon[k];
    const Point b = polygon[(k + 1) % polygon.size()];
    const double scale = dist(a, b) * (norm(p - a) + 1.0);
    if (cross(b - a, p - a) < -1e-12 * scale) return false;
  }
  return true;
}

Point polygon_centroid(std::span<const Point> polygon) {
  double a = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t k = 0; k < polygon.size(); ++k) {
    const Point p = polygon[k];
    const Point q = polygon[(k + 1) % polygon.size()];
    const double w = cross(p, q);
    a += w;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  return {cx / (3.0 * a), cy / (3.0 * a)};
}

Tessellation::Tessellation(std::vector<Point> sites, Window window, std::vector<Cell> cells,
                           double bucket, int buckets_per_side)
    : sites_(std::move(sites)),
      window_(window),
      cells_(std::move(cells)),
      bucket_(bucket),
      per_side_(buckets_per_side),
      grid_(static_cast<std::size_t>(buckets_per_side) * buckets_per_side) {
  const double origin = -bucket_ * per_side_ / 2.0;
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const int bx = std::clamp(static_cast<int>((sites_[i].x - origin) / bucket_), 0, per_side_ - 1);
    const int by = std::clamp(static_cast<int>((sites_[i].y - origin) / bucket_), 0, per_side_ - 1);
    grid_[static_cast<std::size_t>(by) * per_side_ + bx].push_back(i);
  }
}

std::size_t Tessellation::nearest_site(Point p) const {
  const double origin = -bucket_ * per_side_ / 2.0;
  const int bx = std::clamp(static_cast<int>(std::floor((p.x - origin) / bucket_)), 0, per_side_ - 1);
  const int by = std::clamp(static_cast<int>(std::floor((p.y - origin) / bucket_)), 0, per_side_ - 1);
  // Distance from p to the outside of its bucket's ring k; p may lie
  // outside the grid, in which case the clamp makes this conservative.
  const double px = std::clamp(p.x, origin, origin + bucket_ * per_side_);
  const double py = std::clamp(p.y, origin, origin + bucket_ * per_side_);
  const double offset = dist(p, {px, py});
  std::size_t best = 0;
  double best_d = kInf;
  for (int ring = 0; ring <= per_side_; ++ring) {
    for (int dy = -ring; dy <= ring; ++dy) {
      for (int dx = -ring; dx <= ring; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
        const int x = bx + dx, y = by + dy;
        if (x < 0 || y < 0 || x >= per_side_ || y >= per_side_) continue;
        for (std::size_t j : grid_[static_cast<std::size_t>(y) * per_side_ + x]) {
          const double d = dist(p, sites_[j]);
          if (d < best_d) {
            best_d = d;
            best = j;
          }
        }
      }
    }
    if (best_d <= ring * bucket_ - offset) break;
  }
  return best;
}

Tessellation build_voronoi(const PointSet& bs) {
  if (bs.points.empty()) throw Error(ErrorCode::DegenerateInput, "no points to tessellate");
  const Window& window = bs.window;
  std::vector<Point> sites = bs.points;

  std::vector<std::size_t> order(sites.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sites[a].x < sites[b].x || (sites[a].x == sites[b].x && sites[a].y < sites[b].y);
  });
  const double nudge = 1e-12 * window.extent;
  for (std::size_t k = 1, run = 0; k < order.size(); ++k) {
    const Point& prev = bs.points[order[k - 1]];
    const Point& cur = bs.points[order[k]];
    run = (prev.x == cur.x && prev.y == cur.y) ? run + 1 : 0;
    if (run > 0) sites[order[k]].x += nudge * static_cast<double>(run);
  }

  const double half = bounding_extent(window);
  const double cs0 = std::sqrt(2.0 * window.area() / static_cast<double>(sites.size()));
  const int per_side = std::clamp(static_cast<int>(std::ceil(2.0 * half / cs0)), 1, kMaxBucketsPerSide);
  const double cs = 2.0 * half / per_side;
  std::vector<std::vector<std::size_t>> grid(static_cast<std::size_t>(per_side) * per_side);
  auto bucket_of = [&](Point p) {
    const int bx = std::clamp(static_cast<int>((p.x + half) / cs), 0, per_side - 1);
    const int by = std::clamp(static_cast<int>((p.y + half) / cs), 0, per_side - 1);
    return std::pair{bx, by};
  };
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto [bx, by] = bucket_of(sites[i]);
    grid[static_cast<std::size_t>(by) * per_side + bx].push_back(i);
  }

  LabeledPolygon frame;
  frame.v = window.polygon();
  frame.label.assign(frame.v.size(), kWindowEdge);

  std::vector<Cell> cells(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const Point s = sites[i];
    LabeledPolygon poly = frame;
    const auto [bx, by] = bucket_of(s);
    for (int ring = 0; ring <= per_side; ++ring) {
      for (int dy = -ring; dy <= ring; ++dy) {
        for (int dx = -ring; dx <= ring; ++dx) {
          if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
          const int x = bx + dx, y = by + dy;
          if (x < 0 || y < 0 || x >= per_side || y >= per_side) continue;
          for (std::size_t j : grid[static_cast<std::size_t>(y) * per_side + x]) {
            if (j == i) continue;
            const Point n = sites[j] - s;
            const double c = dot(0.5 * (sites[j] + s), n);
            const bool cuts = std::any_of(poly.v.begin(), poly.v.end(),
                                          [&](Point v) { return dot(v, n) > c; });
            if (cuts) poly = clip(poly, n, c, static_cast<long>(j));
          }
        }
      }
      double reach = 0.0;
      for (Point v : poly.v) reach = std::max(reach, dist(v, s));
      // Sites beyond ring k are at least k * cs away.
      if (ring * cs >= 2.0 * reach) break;
    }
    drop_short_edges(poly, 1e-13 * window.extent);

    Cell& cell = cells[i];
    cell.polygon = poly.v;
    bool touches = false;
    for (long l : poly.label) {
      if (l == kWindowEdge) {
        touches = true;
      } else {
        const auto j = static_cast<std::size_t>(l);
        if (std::find(cell.neighbors.begin(), cell.neighbors.end(), j) == cell.neighbors.end()) {
          cell.neighbors.push_back(j);
        }
      }
    }
    // A vertex is final only if no point outside the window could be
    // nearer to it than the site.
    bool settled = !touches;
    for (Point v : poly.v) {
      if (!settled) break;
      settled = window.boundary_distance(v) >= dist(v, s);
    }
    cell.interior = settled;
  }
  return Tessellation(std::move(sites), window, std::move(cells), cs, per_side);
}

Point sample_user_in_cell(const Tessellation& tess, std::size_t cell, std::mt19937_64& rng,
                          bool allow_boundary) {
  const Cell& c = tess.cells().at(cell);
  if (!c.interior && !allow_boundary) {
    throw Error(ErrorCode::BoundaryCell, "cell " + std::to_string(cell) + " touches the window");
  }
  const auto& v = c.polygon;
  if (v.size() < 3) throw Error(ErrorCode::DegenerateInput, "cell has fewer than 3 vertices");
  std::vector<double> cum(v.size() - 2);
  double total = 0.0;
  for (std::size_t k = 1; k + 1 < v.size(); ++k) {
    total += 0.5 * std::abs(cross(v[k] - v[0], v[k + 1] - v[0]));
    cum[k - 1] = total;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double pick = u(rng) * total;
  const std::size_t t = std::min<std::size_t>(
      static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin()),
      cum.size() - 1);
  const double r1 = std::sqrt(u(rng));
  const double r2 = u(rng);
  const Point a = v[0], b = v[t + 1], cc = v[t + 2];
  return (1.0 - r1) * a + (r1 * (1.0 - r2)) * b + (r1 * r2) * cc;
}

double interferer_intensity(double r, double lambda, IntensityVariant variant) {
  const double c = variant == IntensityVariant::fitted ? 12.0 / 5.0 : 1.0;
  return -lambda * std::expm1(-c * lambda * pi * r * r);
}

double link_distance_pdf(double r, double lambda) {
  if (r < 0.0) return 0.0;
  return 2.5 * pi * lambda * r * std::exp(-1.25 * lambda * pi * r * r);
}

double link_distance_cdf(double r, double lambda) {
  if (r <= 0.0) return 0.0;
  return -std::expm1(-1.25 * lambda * pi * r * r);
}

double truncated_link_distance_pdf(double r, double d, double lambda) {
  if (r < 0.0 || r > d) return 0.0;
  return link_distance_pdf(r, lambda) / link_distance_cdf(d, lambda);
}

double truncated_link_distance_cdf(double r, double d, double lambda) {
  if (r >= d) return 1.0;
  return link_distance_cdf(r, lambda) / link_distance_cdf(d, lambda);
}

double k_function(double r, double lambda, IntensityVariant variant) {
  const double c = variant == IntensityVariant::fitted ? 12.0 / 5.0 : 1.0;
  return pi * r * r + std::expm1(-c * lambda * pi * r * r) / (c * lambda);
}

std::vector<double> ripley_k(const PointSet& points, KCenter mode,
                             std::span<const double> radii, double lambda) {
  std::vector<double> out(radii.size(), 0.0);
  if (mode == KCenter::typical_bs) {
    if (!(lambda > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "lambda must be positive");
    for (std::size_t k = 0; k < radii.size(); ++k) {
      if (radii[k] > points.window.extent) {
        throw Error(ErrorCode::InsufficientPoints, "radius exceeds the window");
      }
      for (Point p : points.points) {
        if (norm(p) <= radii[k]) out[k] += 1.0;
      }
      out[k] /= lambda;
    }
    return out;
  }
  const auto& pts = points.points;
  if (pts.size() < 2) throw Error(ErrorCode::InsufficientPoints, "need at least two points");
  const double rmax = radii.empty() ? 0.0 : *std::max_element(radii.begin(), radii.end());
  const double density = static_cast<double>(pts.size()) / points.window.area();
  std::vector<std::size_t> centers;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (points.window.boundary_distance(pts[i]) >= rmax) centers.push_back(i);
  }
  if (centers.empty()) {
    throw Error(ErrorCode::InsufficientPoints, "no point is far enough from the boundary");
  }
  for (std::size_t k = 0; k < radii.size(); ++k) {
    double count = 0.0;
    for (std::size_t i : centers) {
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (j != i && dist(pts[i], pts[j]) <= radii[k]) count += 1.0;
      }
    }
    out[k] = count / static_cast<double>(centers.size()) / density;
  }
  return out;
}

LinkGeometry NetworkRealization::uplink(std::size_t cell) const {
  const auto& b = bs.points;
  LinkGeometry g;
  g.r = dist(users[cell], b[cell]);
  g.interferers.reserve(b.size() - 1);
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (j == cell) continue;
    g.interferers.push_back({dist(users[j], b[cell]), dist(users[j], b[j])});
  }
  return g;
}

LinkGeometry NetworkRealization::downlink(std::size_t cell) const {
  const auto& b = bs.points;
  LinkGeometry g;
  g.r = dist(users[cell], b[cell]);
  g.interferers.reserve(b.size() - 1);
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (j == cell) continue;
    g.interferers.push_back({dist(b[j], users[cell]), dist(users[j], b[j])});
  }
  return g;
}

NetworkRealization sample_realization(const SystemConfig& cfg, const Window& window,
                                      double guard_radius, std::mt19937_64& rng) {
  validate_config(cfg);
  PointSet ppp = sample_ppp(cfg.lambda, window, rng);
  PointSet bs;
  bs.window = window;
  bs.points.reserve(ppp.points.size() + 1);
  bs.points.push_back({0.0, 0.0});
  bs.points.insert(bs.points.end(), ppp.points.begin(), ppp.points.end());

  Tessellation tess = build_voronoi(bs);
  if (!tess.cells()[0].interior) {
    throw Error(ErrorCode::OriginCellTouchesBoundary, "typical cell is not interior");
  }
  bs.points = tess.sites();
  std::vector<Point> users;
  std::vector<bool> guarded;
  users.reserve(bs.points.size());
  guarded.reserve(bs.points.size());
  for (std::size_t i = 0; i < bs.points.size(); ++i) {
    users.push_back(sample_user_in_cell(tess, i, rng, true));
    guarded.push_back(tess.cells()[i].interior && norm(bs.points[i]) <= guard_radius);
  }
  return {std::move(bs), std::move(tess), std::move(users), std::move(guarded), guard_radius};
}

nlohmann::json to_json(const NetworkRealization& net) {
  nlohmann::json j;
  auto pairs = [](const std::vector<Point>& pts) {
    nlohmann::json a = nlohmann::json::array();
    for (Point p : pts) a.push_back({p.x, p.y});
    return a;
  };
  j["bs"] = pairs(net.bs.points);
  j["users"] = pairs(net.users);
  std::vector<std::size_t> ids(net.users.size());
  std::iota(ids.begin(), ids.end(), 0);
  j["cell_ids"] = ids;
  j["guarded"] = net.guarded;
  j["interior"] = nlohmann::json::array();
  for (const Cell& c : net.tessellation.cells()) j["interior"].push_back(c.interior);
  j["guard_radius"] = net.guard_radius;
  j["window"] = {{"shape", net.bs.window.shape == WindowShape::disk ? "disk" : "square"},
                 {"extent", net.bs.window.extent}};
  return j;
}

}  // namespace metasir::geo
