#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace nearcrit {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline bool operator==(Point a, Point b) { return a.x == b.x && a.y == b.y; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double dist(Point a, Point b) { return norm(a - b); }

// Closed axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(Point p, double tol = 0.0) const {
    return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
  }
  bool contains(const Rect& r, double tol = 0.0) const {
    return r.x0 >= x0 - tol && r.x1 <= x1 + tol && r.y0 >= y0 - tol && r.y1 <= y1 + tol;
  }
  Point center() const { return {(x0 + x1) / 2, (y0 + y1) / 2}; }
  static Rect square(Point c, double half) { return {c.x - half, c.y - half, c.x + half, c.y + half}; }
};

double segment_distance(Point p, Point a, Point b);
bool segments_intersect(Point a, Point b, Point c, Point d);

// Distance from p to an open polyline (consecutive vertices joined).
double polyline_distance(Point p, const std::vector<Point>& line);

// Even-odd point-in-polygon; points within tol of the boundary count as inside.
bool polygon_contains(const std::vector<Point>& poly, Point p, double tol);

double polygon_signed_area(const std::vector<Point>& poly);

bool polygon_is_simple(const std::vector<Point>& poly);

}  // namespace nearcrit
