#include "nearcrit/quad.hpp"

#include <cmath>
#include <limits>

#include "nearcrit/error.hpp"

namespace nearcrit {

Quad::Quad(std::vector<Point> vertices, std::array<int, 4> corners, int level)
    : vertices_(std::move(vertices)), corners_(corners), level_(level) {
  const int n = static_cast<int>(vertices_.size());
  if (n < 4) throw InvalidParameter("a quad needs at least four vertices");
  if (!(0 <= corners_[0] && corners_[0] < corners_[1] && corners_[1] < corners_[2] && corners_[2] < corners_[3] &&
        corners_[3] < n))
    throw InvalidParameter("quad corners must be increasing vertex indices");
  if (!polygon_is_simple(vertices_)) throw InvalidParameter("quad boundary must be a simple polygon");
  if (level_ >= 0) {
    const double scale = std::ldexp(1.0, level_);
    for (const Point& v : vertices_) {
      if (std::abs(v.x * scale - std::round(v.x * scale)) > 1e-9 ||
          std::abs(v.y * scale - std::round(v.y * scale)) > 1e-9)
        throw InvalidParameter("quad vertices must lie on the dyadic grid of its level");
    }
  }
  for (int m = 0; m < 4; ++m) {
    const int a = corners_[m];
    const int b = corners_[(m + 1) % 4];
    auto& line = arcs_[m];
    for (int k = a;; k = (k + 1) % n) {
      line.push_back(vertices_[k]);
      if (k == b) break;
    }
  }
}

Quad Quad::rectangle(const Rect& r, bool horizontal, int level) {
  std::vector<Point> v = {{r.x0, r.y1}, {r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}};
  if (horizontal) return Quad(v, {0, 1, 2, 3}, level);
  // Start at the bottom-left corner so arc 0 is the bottom side.
  std::vector<Point> w = {{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}};
  return Quad(w, {0, 1, 2, 3}, level);
}

std::vector<Point> Quad::arc(int m) const { return arcs_.at(m); }

Quad Quad::rotated() const {
  const int n = static_cast<int>(vertices_.size());
  const int s = corners_[1];
  std::vector<Point> v(n);
  for (int k = 0; k < n; ++k) v[k] = vertices_[(s + k) % n];
  return Quad(v, {0, corners_[2] - s, corners_[3] - s, corners_[0] - s + n}, level_);
}

Rect Quad::bounding_box() const {
  Rect b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Point& p : vertices_) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

double Quad::boundary_distance(Point p) const {
  double d = std::numeric_limits<double>::infinity();
  for (int m = 0; m < 4; ++m) d = std::min(d, arc_distance(m, p));
  return d;
}

int Quad::nearest_arc(Point p) const {
  int best = 0;
  double bd = arc_distance(0, p);
  for (int m = 1; m < 4; ++m) {
    double d = arc_distance(m, p);
    if (d < bd) {
      bd = d;
      best = m;
    }
  }
  return best;
}

Quad Quad::scaled(double factor) const {
  std::vector<Point> v;
  for (const Point& p : vertices_) v.push_back(factor * p);
  return Quad(v, corners_, -1);
}

Quad Quad::translated(Point offset) const {
  std::vector<Point> v;
  for (const Point& p : vertices_) v.push_back(p + offset);
  return Quad(v, corners_, -1);
}

namespace {

void label_touches(const LatticeGrid& g, const Quad& quad, QuadRegion& region) {
  region.touch.assign(region.sites.size(), 0);
  for (size_t k = 0; k < region.sites.size(); ++k) {
    const int32_t s = region.sites[k];
    const Axial a = g.axial(s);
    const auto& nb = g.neighbors(s);
    for (int d = 0; d < 6; ++d) {
      if (nb[d] >= 0 && region.local[nb[d]] >= 0) continue;
      const Point q = g.point_of(neighbor_of(a, d));
      region.touch[k] |= static_cast<uint8_t>(1u << quad.nearest_arc(q));
    }
  }
}

}  // namespace

QuadRegion discretize(const GridPtr& grid, const Quad& quad) {
  const LatticeGrid& g = *grid;
  const Rect bb = quad.bounding_box();
  if (!g.domain().contains(bb, g.tolerance())) throw InvalidParameter("quad must lie inside the grid domain");
  QuadRegion region;
  region.grid = grid;
  region.local.assign(g.size(), -1);
  for (int32_t s : g.sites_in(bb)) {
    if (quad.contains(g.position(s), g.tolerance())) {
      region.local[s] = static_cast<int32_t>(region.sites.size());
      region.sites.push_back(s);
    }
  }
  label_touches(g, quad, region);
  return region;
}

QuadRegion discretize_relaxed(const GridPtr& grid, const Quad& quad, double relax) {
  const LatticeGrid& g = *grid;
  Rect bb = quad.bounding_box();
  if (!g.domain().contains(bb, g.tolerance())) throw InvalidParameter("quad must lie inside the grid domain");
  bb = {bb.x0 - relax, bb.y0 - relax, bb.x1 + relax, bb.y1 + relax};
  QuadRegion region;
  region.grid = grid;
  region.local.assign(g.size(), -1);
  for (int32_t s : g.sites_in(bb)) {
    const Point p = g.position(s);
    if (quad.contains(p, g.tolerance()) || quad.boundary_distance(p) <= relax + g.tolerance()) {
      region.local[s] = static_cast<int32_t>(region.sites.size());
      region.sites.push_back(s);
    }
  }
  label_touches(g, quad, region);
  for (size_t k = 0; k < region.sites.size(); ++k) {
    const Point p = g.position(region.sites[k]);
    for (int m = 0; m < 4; ++m)
      if (quad.arc_distance(m, p) <= relax + g.tolerance()) region.touch[k] |= static_cast<uint8_t>(1u << m);
  }
  return region;
}

CrossingEvaluator::CrossingEvaluator(const GridPtr& grid, const Quad& quad)
    : CrossingEvaluator(discretize(grid, quad)) {}

CrossingEvaluator::CrossingEvaluator(QuadRegion region)
    : region_(std::move(region)), seen_(region_.sites.size()) {}

bool CrossingEvaluator::connected(const SiteConfig& config, bool open, int a, int b) const {
  const auto& g = config.grid();
  const uint8_t want = open ? 1 : 0;
  const uint8_t from = static_cast<uint8_t>(1u << a);
  const uint8_t to = static_cast<uint8_t>(1u << b);
  const auto& st = config.states();
  seen_.Clear();
  queue_.clear();
  for (size_t k = 0; k < region_.sites.size(); ++k) {
    if ((region_.touch[k] & from) && st[region_.sites[k]] == want) {
      if (region_.touch[k] & to) return true;
      seen_.Insert(k);
      queue_.push_back(region_.sites[k]);
    }
  }
  for (size_t head = 0; head < queue_.size(); ++head) {
    const int32_t s = queue_[head];
    for (int32_t n : g.neighbors(s)) {
      if (n < 0 || st[n] != want) continue;
      const int32_t l = region_.local[n];
      if (l < 0 || !seen_.Insert(l)) continue;
      if (region_.touch[l] & to) return true;
      queue_.push_back(n);
    }
  }
  return false;
}

std::vector<int32_t> CrossingEvaluator::witness(const SiteConfig& config) const {
  const auto& g = config.grid();
  const auto& st = config.states();
  seen_.Clear();
  for (size_t k = 0; k < region_.sites.size(); ++k) {
    if (!(region_.touch[k] & 1u) || !st[region_.sites[k]] || !seen_.Insert(k)) continue;
    std::vector<int32_t> cluster = {region_.sites[k]};
    bool hit = region_.touch[k] & 4u;
    for (size_t head = 0; head < cluster.size(); ++head) {
      for (int32_t n : g.neighbors(cluster[head])) {
        if (n < 0 || !st[n]) continue;
        const int32_t l = region_.local[n];
        if (l < 0 || !seen_.Insert(l)) continue;
        hit = hit || (region_.touch[l] & 4u);
        cluster.push_back(n);
      }
    }
    if (hit) return cluster;
  }
  return {};
}

bool crosses(const SiteConfig& config, const Quad& quad) {
  return CrossingEvaluator(config.grid_ptr(), quad).open_crossing(config);
}

bool dual_crosses(const SiteConfig& config, const Quad& quad) {
  return CrossingEvaluator(config.grid_ptr(), quad).closed_crossing(config);
}

}  // namespace nearcrit
