#include "nearcrit/arms.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "nearcrit/error.hpp"
#include "nearcrit/maxflow.hpp"

namespace nearcrit {

Annulus::Annulus(Point c, double inner, double outer) : center(c), r(inner), R(outer) {
  if (!(inner >= 0) || !(outer > inner)) throw InvalidParameter("annulus needs 0 <= r < R");
}

std::string ArmPattern::name() const {
  std::string s = half_plane ? "half:" : "";
  for (bool c : colors) s += c ? 'o' : 'c';
  return s;
}

ArmPattern ArmPattern::monochromatic(int j, bool open) {
  require(j >= 1, "arm count must be positive");
  return {std::vector<bool>(j, open), false, M_PI};
}

ArmPattern ArmPattern::alternating(int j) {
  require(j >= 1, "arm count must be positive");
  std::vector<bool> c(j);
  for (int k = 0; k < j; ++k) c[k] = (k % 2 == 0);
  return {c, false, M_PI};
}

ArmPattern ArmPattern::half_plane_alternating(int j) {
  ArmPattern p = alternating(j);
  p.half_plane = true;
  return p;
}

ArmPlan plan_for(const ArmPattern& pattern) {
  const int j = pattern.count();
  if (j == 0) throw InvalidParameter("empty arm pattern");
  const int opens = static_cast<int>(std::count(pattern.colors.begin(), pattern.colors.end(), true));
  if (opens == 0 || opens == j) {
    if (pattern.half_plane && pattern.sector != M_PI) throw InvalidParameter("only half-plane sectors are supported");
    return {ArmPlan::kMono, opens == j, j};
  }
  if (pattern.half_plane) {
    if (pattern.sector != M_PI) throw InvalidParameter("only half-plane sectors are supported");
    bool alternating = true;
    for (int k = 0; k + 1 < j; ++k) alternating = alternating && pattern.colors[k] != pattern.colors[k + 1];
    if (alternating && j % 2 == 1) return {ArmPlan::kHalfAlternating, pattern.colors[0], (j + 1) / 2};
    throw InvalidParameter("unsupported half-plane arm pattern " + pattern.name());
  }
  bool cyclic_alternating = (j % 2 == 0);
  for (int k = 0; k < j && cyclic_alternating; ++k)
    cyclic_alternating = pattern.colors[k] != pattern.colors[(k + 1) % j];
  if (cyclic_alternating) return {ArmPlan::kAlternating, true, j / 2};
  if (opens == 1) return {ArmPlan::kOneMinority, false, j - 1};
  if (opens == j - 1) return {ArmPlan::kOneMinority, true, j - 1};
  throw InvalidParameter("unsupported arm pattern " + pattern.name());
}

ArmRegion::ArmRegion(const GridPtr& grid, const std::vector<int32_t>& inner, const Rect& bounds,
                     const std::function<bool(Point)>& inside, bool clip, std::optional<double> base)
    : grid_(grid) {
  const LatticeGrid& g = *grid;
  if (inner.size() == 1) center_ = inner[0];
  const double tol = g.tolerance();
  if (!clip && !g.domain().contains(bounds, tol)) throw InvalidParameter("annulus must lie inside the grid domain");
  std::vector<int32_t> cand = g.sites_in(bounds);
  int imin = std::numeric_limits<int>::max(), imax = std::numeric_limits<int>::min();
  int jmin = imin, jmax = imax;
  auto extend = [&](int32_t s) {
    Axial a = g.axial(s);
    imin = std::min(imin, a.i);
    imax = std::max(imax, a.i);
    jmin = std::min(jmin, a.j);
    jmax = std::max(jmax, a.j);
  };
  for (int32_t s : cand) extend(s);
  for (int32_t s : inner) extend(s);
  if (cand.empty() && inner.empty()) return;
  i0_ = imin;
  j0_ = jmin;
  wi_ = imax - imin + 1;
  wj_ = jmax - jmin + 1;
  window_.assign(static_cast<size_t>(wi_) * wj_, -1);
  auto slot = [&](int32_t s) -> int32_t& {
    Axial a = g.axial(s);
    return window_[static_cast<size_t>(a.j - j0_) * wi_ + (a.i - i0_)];
  };
  for (int32_t s : inner) slot(s) = -2;
  auto exterior = [&](Point q) { return !inside(q) && (!base || q.y >= *base - tol); };
  for (int32_t s : cand) {
    if (slot(s) == -2) continue;
    const Point p = g.position(s);
    if (!inside(p) || (base && p.y < *base - tol)) continue;
    slot(s) = static_cast<int32_t>(sites_.size());
    sites_.push_back(s);
  }
  auto is_inner = [&](int32_t s) {
    const Axial a = g.axial(s);
    const int di = a.i - i0_, dj = a.j - j0_;
    if (di < 0 || dj < 0 || di >= wi_ || dj >= wj_) return false;
    return window_[static_cast<size_t>(dj) * wi_ + di] == -2;
  };
  flags_.assign(sites_.size(), 0);
  for (size_t k = 0; k < sites_.size(); ++k) {
    const int32_t s = sites_[k];
    const Axial a = g.axial(s);
    const auto& nb = g.neighbors(s);
    for (int d = 0; d < 6; ++d) {
      if (nb[d] >= 0 && is_inner(nb[d])) flags_[k] |= kStart;
      if (exterior(g.point_of(neighbor_of(a, d)))) flags_[k] |= kTarget;
    }
  }
  for (size_t k = 0; k < sites_.size(); ++k)
    if (flags_[k] & kStart) starts_.push_back(static_cast<int32_t>(k));
  for (int32_t s : inner) {
    const Axial a = g.axial(s);
    for (int d = 0; d < 6; ++d)
      if (exterior(g.point_of(neighbor_of(a, d)))) degenerate_ = true;
  }
}

ArmRegion ArmRegion::square(const GridPtr& grid, const std::vector<int32_t>& inner, const Rect& outer, bool clip,
                            std::optional<double> base) {
  const double tol = grid->tolerance();
  return ArmRegion(grid, inner, outer, [outer, tol](Point p) { return outer.contains(p, tol); }, clip, base);
}

ArmRegion ArmRegion::ball(const GridPtr& grid, int32_t site, double radius, bool clip) {
  const Point c = grid->position(site);
  const double tol = grid->tolerance();
  return ArmRegion(grid, {site}, Rect::square(c, radius), [c, radius, tol](Point p) { return dist(p, c) <= radius + tol; },
                   clip);
}

int32_t ArmRegion::local(int32_t site) const {
  if (window_.empty()) return -1;
  const Axial a = grid_->axial(site);
  const int di = a.i - i0_, dj = a.j - j0_;
  if (di < 0 || dj < 0 || di >= wi_ || dj >= wj_) return -1;
  const int32_t v = window_[static_cast<size_t>(dj) * wi_ + di];
  return v >= 0 ? v : -1;
}

std::vector<int32_t> annulus_inner_sites(const LatticeGrid& grid, const Annulus& annulus, std::optional<double> base) {
  const double eta = grid.eta();
  const double tol = grid.tolerance();
  std::vector<int32_t> out;
  for (int32_t s : grid.sites_in(Rect::square(annulus.center, annulus.r))) {
    const Point p = grid.position(s);
    if (std::abs(p.x - annulus.center.x) <= annulus.r - eta / 2 + tol &&
        std::abs(p.y - annulus.center.y) <= annulus.r - eta / kSqrt3 + tol && (!base || p.y >= *base - tol))
      out.push_back(s);
  }
  if (out.empty()) {
    const int32_t s = grid.nearest_site(annulus.center);
    if (s >= 0) out.push_back(s);
  }
  return out;
}

ArmRegion annulus_region(const GridPtr& grid, const Annulus& annulus, bool half_plane, bool clip) {
  std::optional<double> base;
  if (half_plane) base = annulus.center.y;
  auto inner = annulus_inner_sites(*grid, annulus, base);
  Rect outer = Rect::square(annulus.center, annulus.R);
  if (base) outer.y0 = *base;
  return ArmRegion::square(grid, inner, outer, clip, base);
}

int crossing_clusters(const ArmRegion& region, const StateFn& state, bool open, int need) {
  const auto& sites = region.sites();
  const auto& flags = region.flags();
  const LatticeGrid& g = *region.grid();
  thread_local StampSet seen;
  thread_local std::vector<int32_t> queue;
  seen.Resize(sites.size());
  seen.Clear();
  int count = 0;
  for (int32_t k : region.starts()) {
    if (seen.Contains(k) || state(sites[k]) != open) continue;
    seen.Insert(k);
    queue.assign(1, static_cast<int32_t>(k));
    bool hit = false;
    for (size_t h = 0; h < queue.size(); ++h) {
      const int32_t l = queue[h];
      hit = hit || (flags[l] & ArmRegion::kTarget);
      for (int32_t n : g.neighbors(sites[l])) {
        if (n < 0) continue;
        const int32_t m = region.local(n);
        if (m < 0 || seen.Contains(m) || state(n) != open) continue;
        seen.Insert(m);
        queue.push_back(m);
      }
    }
    if (hit && ++count >= need) return count;
  }
  return count;
}

int cyclic_alternations(const std::array<uint8_t, 6>& slots) {
  uint8_t seq[6];
  int len = 0;
  for (uint8_t v : slots)
    if (v) seq[len++] = v;
  int changes = 0;
  for (int k = 0; k < len; ++k) changes += seq[k] != seq[(k + 1) % len];
  return changes;
}

int alternations_around_center(const ArmRegion& region, const StateFn& state) {
  const auto& sites = region.sites();
  const auto& flags = region.flags();
  const LatticeGrid& g = *region.grid();
  thread_local StampSet seen;
  thread_local std::vector<int32_t> queue;
  seen.Resize(sites.size());
  seen.Clear();
  std::array<uint8_t, 6> slots{};
  std::array<int32_t, 6> loc{};
  const auto& nb = g.neighbors(region.center());
  for (int d = 0; d < 6; ++d) loc[d] = nb[d] >= 0 ? region.local(nb[d]) : -1;
  for (int d = 0; d < 6; ++d) {
    const int32_t k = loc[d];
    if (k < 0 || seen.Contains(k)) continue;
    const bool color = state(sites[k]);
    seen.Insert(k);
    queue.assign(1, k);
    bool hit = false;
    for (size_t h = 0; h < queue.size(); ++h) {
      const int32_t l = queue[h];
      hit = hit || (flags[l] & ArmRegion::kTarget);
      for (int32_t n : g.neighbors(sites[l])) {
        if (n < 0) continue;
        const int32_t m = region.local(n);
        if (m < 0 || seen.Contains(m) || state(n) != color) continue;
        seen.Insert(m);
        queue.push_back(m);
      }
    }
    if (!hit) continue;
    for (int e = d; e < 6; ++e)
      if (loc[e] >= 0 && std::find(queue.begin(), queue.end(), loc[e]) != queue.end())
        slots[e] = color ? 1 : 2;
  }
  return cyclic_alternations(slots);
}

int disjoint_crossings(const ArmRegion& region, const StateFn& state, bool open, int need) {
  const auto& sites = region.sites();
  const auto& flags = region.flags();
  const LatticeGrid& g = *region.grid();
  std::vector<int32_t> node(sites.size(), -1);
  int n = 0;
  for (size_t k = 0; k < sites.size(); ++k)
    if (state(sites[k]) == open) node[k] = n++;
  const int S = 2 * n, T = 2 * n + 1;
  MaxFlow flow(2 * n + 2);
  for (size_t k = 0; k < sites.size(); ++k) {
    if (node[k] < 0) continue;
    const int in = 2 * node[k], out = in + 1;
    flow.add_edge(in, out, 1);
    if (flags[k] & ArmRegion::kStart) flow.add_edge(S, in, 1);
    if (flags[k] & ArmRegion::kTarget) flow.add_edge(out, T, 1);
    for (int32_t nb : g.neighbors(sites[k])) {
      if (nb < 0) continue;
      const int32_t m = region.local(nb);
      if (m >= 0 && node[m] >= 0) flow.add_edge(out, 2 * node[m], 1);
    }
  }
  return static_cast<int>(std::lround(flow.run(S, T, need)));
}

bool arm_event(const ArmRegion& region, const StateFn& state, const ArmPattern& pattern) {
  const ArmPlan plan = plan_for(pattern);
  if (region.degenerate()) return true;
  switch (plan.kind) {
    case ArmPlan::kMono:
      if (plan.need == 1) return crossing_clusters(region, state, plan.color, 1) >= 1;
      return disjoint_crossings(region, state, plan.color, plan.need) >= plan.need;
    case ArmPlan::kAlternating:
      // Grid edges inside the region may separate arms, so count around the site.
      if (region.center() >= 0) return alternations_around_center(region, state) >= pattern.count();
      if (plan.need == 1)
        return crossing_clusters(region, state, true, 1) >= 1 && crossing_clusters(region, state, false, 1) >= 1;
      return crossing_clusters(region, state, true, plan.need) >= plan.need;
    case ArmPlan::kOneMinority:
      return crossing_clusters(region, state, !plan.color, 1) >= 1 &&
             disjoint_crossings(region, state, plan.color, plan.need) >= plan.need;
    case ArmPlan::kHalfAlternating:
      return crossing_clusters(region, state, plan.color, plan.need) >= plan.need;
  }
  return false;
}

bool arm_event(const SiteConfig& config, const ArmRegion& region, const ArmPattern& pattern) {
  const auto& st = config.states();
  return arm_event(region, [&st](int32_t s) { return st[s] != 0; }, pattern);
}

bool arm_event(const SiteConfig& config, const Annulus& annulus, const ArmPattern& pattern) {
  plan_for(pattern);
  ArmRegion region = annulus_region(config.grid_ptr(), annulus, pattern.half_plane, false);
  return arm_event(config, region, pattern);
}

double importance(const SiteConfig& config, int32_t site) {
  const LatticeGrid& g = config.grid();
  if (site < 0 || site >= g.size()) throw InvalidParameter("site outside grid");
  const Point p = g.position(site);
  const Rect& d = g.domain();
  const double eta = g.eta();
  const double far = std::max({p.x - d.x0, d.x1 - p.x, p.y - d.y0, d.y1 - p.y});
  const int kmax = static_cast<int>(std::ceil(far / eta)) + 2;
  const ArmPattern four = ArmPattern::alternating(4);
  auto holds = [&](int k) {
    ArmRegion region = ArmRegion::square(config.grid_ptr(), {site}, Rect::square(p, k * eta), true);
    return arm_event(config, region, four);
  };
  if (!holds(1)) return 0;
  int lo = 1, hi = kmax;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    (holds(mid) ? lo : hi) = mid;
  }
  return lo * eta;
}

Estimate binomial_estimate(int64_t successes, int64_t samples, double z) {
  Estimate e;
  e.successes = successes;
  e.samples = samples;
  if (samples <= 0) return e;
  const double n = static_cast<double>(samples);
  const double ph = successes / n;
  const double z2 = z * z;
  const double denom = 1 + z2 / n;
  const double center = (ph + z2 / (2 * n)) / denom;
  const double half = z * std::sqrt(ph * (1 - ph) / n + z2 / (4 * n * n)) / denom;
  e.value = ph;
  e.ci_low = std::max(0.0, center - half);
  e.ci_high = std::min(1.0, center + half);
  return e;
}

Estimate estimate_arm_probability_at(double eta, double r, double R, const ArmPattern& pattern, double p,
                                     int64_t samples, const RngSpec& spec) {
  require(eta > 0, "mesh must be positive");
  require(r >= 0 && R >= r, "arm radii need 0 <= r <= R");
  require(samples >= 1, "need at least one sample");
  require(p >= 0 && p <= 1, "p must lie in [0,1]");
  plan_for(pattern);
  if (R == r) {
    Estimate e = binomial_estimate(samples, samples);
    e.ci_low = e.ci_high = 1;
    return e;
  }
  GridPtr grid = build_grid(Rect::square({0, 0}, R + 2 * eta), eta);
  ArmRegion region = annulus_region(grid, Annulus({0, 0}, r, R), pattern.half_plane, false);
  Rng rng(spec);
  std::vector<uint8_t> st(grid->size());
  StampSet drawn(grid->size());
  auto state = [&](int32_t s) {
    if (drawn.Insert(s)) st[s] = rng.uniform() <= p;
    return st[s] != 0;
  };
  int64_t hits = 0;
  for (int64_t k = 0; k < samples; ++k) {
    drawn.Clear();
    hits += arm_event(region, state, pattern);
  }
  return binomial_estimate(hits, samples);
}

Estimate estimate_arm_probability(double eta, double r, double R, const ArmPattern& pattern, int64_t samples,
                                  const RngSpec& rng) {
  return estimate_arm_probability_at(eta, r, R, pattern, 0.5, samples, rng);
}

std::string arm_csv_header() { return "eta,r,R,pattern,samples,estimate,ci_low,ci_high"; }

std::string arm_csv_row(double eta, double r, double R, const ArmPattern& pattern, const Estimate& e) {
  std::ostringstream os;
  os.precision(10);
  os << eta << ',' << r << ',' << R << ',' << pattern.name() << ',' << e.samples << ',' << e.value << ','
     << e.ci_low << ',' << e.ci_high;
  return os.str();
}

}  // namespace nearcrit
