#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "nearcrit/geometry.hpp"
#include "nearcrit/lattice.hpp"
#include "nearcrit/union_find.hpp"

namespace nearcrit {

// Simple polygon with four marked vertices c0 < c1 < c2 < c3 (indices).
// Arc m (0-based, so arc 0 is the first arc) runs from corner m to corner m+1
// along the vertex order; arc 3 wraps from c3 through the last vertex to c0.
// A crossing joins arc 0 to arc 2.
class Quad {
 public:
  Quad(std::vector<Point> vertices, std::array<int, 4> corners, int level = -1);

  // Horizontal: arc 0 = left side, arc 2 = right side. Vertical: arc 0 = bottom, arc 2 = top.
  static Quad rectangle(const Rect& r, bool horizontal = true, int level = -1);

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::array<int, 4>& corners() const { return corners_; }
  int level() const { return level_; }

  std::vector<Point> arc(int m) const;
  // Same polygon with arcs relabelled m -> m-1, so its crossings join the old arcs 1 and 3.
  Quad rotated() const;
  Rect bounding_box() const;
  bool contains(Point p, double tol = 0.0) const { return polygon_contains(vertices_, p, tol); }
  double boundary_distance(Point p) const;
  double arc_distance(int m, Point p) const { return polyline_distance(p, arcs_[m]); }
  // Arc closest to p; ties go to the lower index.
  int nearest_arc(Point p) const;
  Quad scaled(double factor) const;
  Quad translated(Point offset) const;

 private:
  std::vector<Point> vertices_;
  std::array<int, 4> corners_;
  int level_;
  std::array<std::vector<Point>, 4> arcs_;
};

// Lattice image of a quad: sites with center in the closed polygon, and per site
// the set of arcs it touches. A site touches arc m when one of its six lattice
// neighbors lies outside the region and that exterior point is nearest to arc m.
struct QuadRegion {
  GridPtr grid;
  std::vector<int32_t> sites;
  std::vector<uint8_t> touch;  // bit m set: touches arc m
  std::vector<int32_t> local;  // grid-sized; index into sites or -1
  bool contains(int32_t site) const { return local[site] >= 0; }
};

QuadRegion discretize(const GridPtr& grid, const Quad& quad);

// Relaxed image used for "almost crossed": sites within distance `relax` of the
// closed polygon; a site also touches arc m when its center is within `relax` of it.
QuadRegion discretize_relaxed(const GridPtr& grid, const Quad& quad, double relax);

bool crosses(const SiteConfig& config, const Quad& quad);
// Closed crossing between arcs 1 and 3 of the same quad.
bool dual_crosses(const SiteConfig& config, const Quad& quad);

// Reusable evaluator holding the discretized region and scratch space.
// Not safe for concurrent use; give each worker its own instance.
class CrossingEvaluator {
 public:
  CrossingEvaluator(const GridPtr& grid, const Quad& quad);
  explicit CrossingEvaluator(QuadRegion region);

  // Path of `open`-colored sites from a site touching arc a to one touching arc b.
  bool connected(const SiteConfig& config, bool open, int a, int b) const;
  bool open_crossing(const SiteConfig& config) const { return connected(config, true, 0, 2); }
  bool closed_crossing(const SiteConfig& config) const { return connected(config, false, 1, 3); }
  // Sites of one open cluster joining arcs 0 and 2; empty when not crossed.
  std::vector<int32_t> witness(const SiteConfig& config) const;

  const QuadRegion& region() const { return region_; }

 private:
  QuadRegion region_;
  mutable StampSet seen_;
  mutable std::vector<int32_t> queue_;
};

}  // namespace nearcrit
