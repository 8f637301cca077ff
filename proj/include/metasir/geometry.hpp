#pragma once

// Poisson point processes, Voronoi tessellations clipped to a window,
// type-I users (one uniform point per cell) and the distance statistics the
// analysis approximates.

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "metasir/core_model.hpp"

namespace metasir::geo {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double dist(Point a, Point b) { return norm(a - b); }

enum class WindowShape { disk, square };

/// Window centered at the origin. `extent` is the radius of a disk or the
/// half side of a square.
struct Window {
  WindowShape shape = WindowShape::disk;
  double extent = 1.0;

  static Window disk(double radius) { return {WindowShape::disk, radius}; }
  static Window square(double half_side) { return {WindowShape::square, half_side}; }

  double area() const;
  bool contains(Point p) const;
  /// Distance from an inside point to the boundary.
  double boundary_distance(Point p) const;
  /// Convex polygon used for clipping, counterclockwise: the square itself,
  /// or a regular polygon circumscribing the disk.
  std::vector<Point> polygon() const;
};

/// Disk of radius 15 / sqrt(lambda).
Window default_window(double lambda);

/// Links are kept when their BS lies within 10 / sqrt(lambda) of the origin.
double default_guard_radius(double lambda);

struct PointSet {
  std::vector<Point> points;
  Window window;
};

PointSet sample_ppp(double lambda, const Window& window, std::mt19937_64& rng);

struct Cell {
  std::vector<Point> polygon;  ///< convex, counterclockwise
  std::vector<std::size_t> neighbors;
  bool interior = false;  ///< untouched by the window and fully determined
};

double polygon_area(std::span<const Point> polygon);
bool polygon_contains(std::span<const Point> polygon, Point p);
Point polygon_centroid(std::span<const Point> polygon);

class Tessellation {
 public:
  Tessellation(std::vector<Point> sites, Window window, std::vector<Cell> cells,
               double bucket, int buckets_per_side);

  const std::vector<Point>& sites() const { return sites_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const Window& window() const { return window_; }

  /// Index of the site nearest to p.
  std::size_t nearest_site(Point p) const;

 private:
  std::vector<Point> sites_;
  Window window_;
  std::vector<Cell> cells_;
  double bucket_;
  int per_side_;
  std::vector<std::vector<std::size_t>> grid_;
};

/// Half-plane clipping per site with a bucket grid for neighbor search.
/// Exact duplicates are moved apart by 1e-12 times the window extent.
/// Throws DegenerateInput for an empty point set.
Tessellation build_voronoi(const PointSet& bs);

/// Uniform point in the cell by fan triangulation. Throws BoundaryCell for
/// a cell clipped by the window unless `allow_boundary` is set.
Point sample_user_in_cell(const Tessellation& tess, std::size_t cell, std::mt19937_64& rng,
                          bool allow_boundary = false);

enum class IntensityVariant { fitted, baseline };

/// lambda (1 - exp(-c lambda pi r^2)) with c = 12/5 (fitted) or 1 (baseline).
double interferer_intensity(double r, double lambda, IntensityVariant variant);

/// (5/2) pi lambda r exp(-(5/4) lambda pi r^2)
double link_distance_pdf(double r, double lambda);
double link_distance_cdf(double r, double lambda);

/// Link-distance density conditioned on r <= d.
double truncated_link_distance_pdf(double r, double d, double lambda);
double truncated_link_distance_cdf(double r, double d, double lambda);

/// K of the interferer process implied by each intensity:
/// pi r^2 + (exp(-c lambda pi r^2) - 1) / (c lambda).
double k_function(double r, double lambda, IntensityVariant variant);

enum class KCenter { typical_bs, stationary };

/// typical_bs: number of points within r of the origin divided by lambda.
/// stationary: border-corrected estimator with the intensity estimated
/// from the points (lambda is ignored). Throws InsufficientPoints when
/// no point is far enough from the boundary for the largest radius.
std::vector<double> ripley_k(const PointSet& points, KCenter mode,
                             std::span<const double> radii, double lambda);

/// BS process with the typical BS at index 0 (origin), its tessellation and
/// one user in every cell. Cells clipped by the window get a user inside
/// the clipped polygon so that they still interfere.
struct NetworkRealization {
  PointSet bs;
  Tessellation tessellation;
  std::vector<Point> users;
  std::vector<bool> guarded;  ///< BS within the guard radius
  double guard_radius = 0.0;

  /// Uplink: receiver bs[i], interferers are the users of all other cells.
  LinkGeometry uplink(std::size_t cell) const;
  /// Downlink: receiver users[i], interferers are all other BSs.
  LinkGeometry downlink(std::size_t cell) const;
};

/// Throws OriginCellTouchesBoundary when the typical cell is not interior.
NetworkRealization sample_realization(const SystemConfig& cfg, const Window& window,
                                      double guard_radius, std::mt19937_64& rng);

/// Debug layout: {"bs": [[x, y], ...], "users": [[x, y], ...],
/// "cell_ids": [...], "guarded": [...], "window": {...}}.
nlohmann::json to_json(const NetworkRealization& net);

}  // namespace metasir::geo
