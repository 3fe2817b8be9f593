#include "nearcrit/geometry.hpp"

#include <limits>

namespace nearcrit {

double segment_distance(Point p, Point a, Point b) {
  Point ab = b - a;
  double len2 = dot(ab, ab);
  if (len2 == 0.0) return dist(p, a);
  double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return dist(p, a + t * ab);
}

namespace {

int orientation(Point a, Point b, Point c) {
  double v = cross(b - a, c - a);
  if (v > 0) return 1;
  if (v < 0) return -1;
  return 0;
}

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

}  // namespace

bool segments_intersect(Point a, Point b, Point c, Point d) {
  int o1 = orientation(a, b, c);
  int o2 = orientation(a, b, d);
  int o3 = orientation(c, d, a);
  int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

double polyline_distance(Point p, const std::vector<Point>& line) {
  if (line.empty()) return std::numeric_limits<double>::infinity();
  if (line.size() == 1) return dist(p, line[0]);
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < line.size(); ++i) best = std::min(best, segment_distance(p, line[i], line[i + 1]));
  return best;
}

bool polygon_contains(const std::vector<Point>& poly, Point p, double tol) {
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    if (segment_distance(p, poly[i], poly[(i + 1) % n]) <= tol) return true;
  }
  bool inside = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xc) inside = !inside;
    }
  }
  return inside;
}

double polygon_signed_area(const std::vector<Point>& poly) {
  double s = 0;
  for (size_t i = 0; i < poly.size(); ++i) s += cross(poly[i], poly[(i + 1) % poly.size()]);
  return s / 2;
}

bool polygon_is_simple(const std::vector<Point>& poly) {
  const size_t n = poly.size();
  if (n < 3) return false;
  for (size_t i = 0; i < n; ++i) {
    if (poly[i] == poly[(i + 1) % n]) return false;
  }
  for (size_t i = 0; i < n; ++i) {
    Point a = poly[i], b = poly[(i + 1) % n];
    for (size_t j = i + 1; j < n; ++j) {
      bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      Point c = poly[j], d = poly[(j + 1) % n];
      if (adjacent) {
        // Adjacent edges may only share their common vertex.
        Point shared = (j == i + 1) ? b : a;
        Point other_ab = (j == i + 1) ? a : b;
        Point other_cd = (j == i + 1) ? d : c;
        if (orientation(shared, other_ab, other_cd) == 0 && dot(other_ab - shared, other_cd - shared) > 0) return false;
        continue;
      }
      if (segments_intersect(a, b, c, d)) return false;
    }
  }
  return std::abs(polygon_signed_area(poly)) > 0;
}

}  // namespace nearcrit
