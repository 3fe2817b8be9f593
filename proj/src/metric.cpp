#include "nearcrit/metric.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "nearcrit/error.hpp"

namespace nearcrit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool same_grid(const LatticeGrid& a, const LatticeGrid& b) {
  const Rect &da = a.domain(), &db = b.domain();
  return a.eta() == b.eta() && da.x0 == db.x0 && da.y0 == db.y0 && da.x1 == db.x1 && da.y1 == db.y1;
}

// Integer description of a candidate quad on the 2^-lev grid.
struct QuadSpec {
  int64_t x0, y0, x1, y1;
  int notch;        // -1 for a rectangle, else the notched corner 0..3 (BL, BR, TR, TL)
  int64_t w, h;     // notch size
  int marking;      // 0 or 1
};

bool odd_any(const QuadSpec& s) {
  auto odd = [](int64_t v) { return (v & 1) != 0; };
  if (odd(s.x0) || odd(s.y0) || odd(s.x1) || odd(s.y1)) return true;
  return s.notch >= 0 && (odd(s.w) || odd(s.h));
}

// Visits candidates whose coarsest level is exactly `lev`, in a fixed order.
void for_each_candidate(int lev, const Rect& d, const std::function<void(const QuadSpec&)>& fn) {
  const double scale = std::ldexp(1.0, lev);
  const auto i0 = static_cast<int64_t>(std::ceil(d.x0 * scale - 1e-9));
  const auto i1 = static_cast<int64_t>(std::floor(d.x1 * scale + 1e-9));
  const auto j0 = static_cast<int64_t>(std::ceil(d.y0 * scale - 1e-9));
  const auto j1 = static_cast<int64_t>(std::floor(d.y1 * scale + 1e-9));
  const bool finest_only = lev > 0;
  for (int64_t x0 = i0; x0 <= i1; ++x0)
    for (int64_t x1 = x0 + 1; x1 <= i1; ++x1)
      for (int64_t y0 = j0; y0 <= j1; ++y0)
        for (int64_t y1 = y0 + 1; y1 <= j1; ++y1) {
          QuadSpec s{x0, y0, x1, y1, -1, 0, 0, 0};
          const bool rect_new = !finest_only || odd_any(s);
          if (rect_new) {
            for (int m = 0; m < 2; ++m) {
              s.marking = m;
              fn(s);
            }
          }
          for (int c = 0; c < 4; ++c)
            for (int64_t w = 1; w < x1 - x0; ++w)
              for (int64_t h = 1; h < y1 - y0; ++h) {
                QuadSpec t{x0, y0, x1, y1, c, w, h, 0};
                if (finest_only && !odd_any(t)) continue;
                for (int m = 0; m < 2; ++m) {
                  t.marking = m;
                  fn(t);
                }
              }
        }
}

Quad build_quad(const QuadSpec& s, int lev, int level_tag) {
  const double u = std::ldexp(1.0, -lev);
  const double x0 = s.x0 * u, y0 = s.y0 * u, x1 = s.x1 * u, y1 = s.y1 * u;
  if (s.notch < 0) return Quad::rectangle({x0, y0, x1, y1}, s.marking == 0, level_tag);
  const double w = s.w * u, h = s.h * u;
  // Corners counter-clockwise from the bottom-left.
  const Point P[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  const int c = s.notch;
  const Point pc = P[c], prev = P[(c + 3) % 4], next = P[(c + 1) % 4];
  auto toward = [&](Point from, Point to) {
    const double dx = to.x - from.x, dy = to.y - from.y;
    const double len = std::abs(dx) + std::abs(dy);
    const double step = std::abs(dx) > 0 ? w : h;
    return Point{from.x + dx / len * step, from.y + dy / len * step};
  };
  const Point a = toward(pc, prev), e = toward(pc, next);
  const Point inner{a.x + e.x - pc.x, a.y + e.y - pc.y};
  std::vector<Point> v = {next, P[(c + 2) % 4], prev, a, inner, e};
  Quad q(v, {0, 1, 2, 3}, level_tag);
  return s.marking == 0 ? q : q.rotated();
}

// Sites of both regions, touching an arc only where both discretizations agree;
// a crossing of the result is a crossing of each input.
QuadRegion intersect_regions(const QuadRegion& a, const QuadRegion& b) {
  QuadRegion r;
  r.grid = a.grid;
  r.local.assign(a.local.size(), -1);
  for (size_t k = 0; k < a.sites.size(); ++k) {
    const int32_t s = a.sites[k];
    const int32_t j = b.local[s];
    if (j < 0) continue;
    r.local[s] = static_cast<int32_t>(r.sites.size());
    r.sites.push_back(s);
    r.touch.push_back(a.touch[k] & b.touch[j]);
  }
  return r;
}

}  // namespace

Quad outer_quad(const Quad& q, double delta, const Rect& domain) {
  const auto& v = q.vertices();
  const int n = static_cast<int>(v.size());
  const auto& c = q.corners();
  const double orient = polygon_signed_area(v) > 0 ? 1.0 : -1.0;
  auto arc_of_edge = [&](int k) {
    for (int m = 3; m >= 0; --m)
      if (k >= c[m]) return m;
    return 3;
  };
  // Each edge is a line x = const or y = const after shifting.
  std::vector<double> level(n);
  std::vector<uint8_t> vertical(n);
  for (int k = 0; k < n; ++k) {
    const Point a = v[k], b = v[(k + 1) % n];
    const double dx = b.x - a.x, dy = b.y - a.y;
    require(dx == 0 || dy == 0, "outer enlargement needs an axis-parallel quad");
    const double sign = arc_of_edge(k) % 2 == 0 ? 1.0 : -1.0;
    const double nx = orient * (dy > 0 ? 1 : dy < 0 ? -1 : 0), ny = orient * (dx > 0 ? -1 : dx < 0 ? 1 : 0);
    vertical[k] = dx == 0;
    if (vertical[k]) {
      level[k] = std::clamp(a.x + sign * delta * nx, domain.x0, domain.x1);
    } else {
      level[k] = std::clamp(a.y + sign * delta * ny, domain.y0, domain.y1);
    }
  }
  std::vector<Point> out(n);
  for (int k = 0; k < n; ++k) {
    const int p = (k + n - 1) % n;
    require(vertical[p] != vertical[k], "consecutive quad edges must be perpendicular");
    out[k] = vertical[k] ? Point{level[k], level[p]} : Point{level[p], level[k]};
  }
  return Quad(out, c, -1);
}

QuadFamily enumerate_quads(int k, const Rect& domain, int64_t budget) {
  require(k >= 1, "quad level must be at least 1");
  require(budget > 0, "quad budget must be positive");
  QuadFamily f;
  f.level = k;
  f.domain = domain;
  f.budget = budget;
  f.relax = std::ldexp(1.0, -k - 10);
  const double delta = std::ldexp(1.0, -k - 10);
  for (int lev = 0; lev <= k; ++lev) {
    int64_t count = 0;
    for_each_candidate(lev, domain, [&](const QuadSpec&) { ++count; });
    f.full_size += count;
    const int64_t room = budget - static_cast<int64_t>(f.quads.size());
    if (count == 0 || room <= 0) {
      f.truncated = f.truncated || count > 0;
      continue;
    }
    const int64_t take = std::min(room, count);
    f.truncated = f.truncated || take < count;
    int64_t idx = 0, next_pick = 0, picked = 0;
    for_each_candidate(lev, domain, [&](const QuadSpec& s) {
      if (picked < take && idx == next_pick) {
        const Quad q = build_quad(s, lev, k);
        f.quads.push_back(q);
        f.outer.push_back(outer_quad(q, delta, domain));
        ++picked;
        next_pick = picked * count / take;
      }
      ++idx;
    });
  }
  return f;
}

SignatureEvaluator::SignatureEvaluator(const GridPtr& grid, const QuadFamily& family)
    : grid_(grid), level_(family.level) {
  for (size_t q = 0; q < family.quads.size(); ++q) {
    inner_.emplace_back(discretize(grid, family.quads[q]));
    outer_.emplace_back(intersect_regions(discretize(grid, family.quads[q]), discretize(grid, family.outer[q])));
    almost_.emplace_back(discretize_relaxed(grid, family.quads[q], family.relax));
  }
}

CrossingSignature SignatureEvaluator::operator()(const SiteConfig& config) const {
  require(same_grid(config.grid(), *grid_), "configuration grid mismatch");
  CrossingSignature s;
  s.level = level_;
  const size_t n = inner_.size();
  s.crossed.resize(n);
  s.outer.resize(n);
  s.almost.resize(n);
  for (size_t q = 0; q < n; ++q) {
    s.crossed[q] = inner_[q].open_crossing(config);
    s.outer[q] = outer_[q].open_crossing(config);
    s.almost[q] = almost_[q].open_crossing(config);
  }
  return s;
}

bool in_neighborhood(const CrossingSignature& w, const CrossingSignature& wp) {
  require(w.crossed.size() == wp.crossed.size() && w.level == wp.level, "signatures of different families");
  for (size_t q = 0; q < w.crossed.size(); ++q) {
    if (!w.crossed[q] && wp.outer[q]) return false;
    if (w.crossed[q] && !wp.almost[q]) return false;
  }
  return true;
}

int k_agreement(const std::vector<CrossingSignature>& a, const std::vector<CrossingSignature>& b) {
  require(a.size() == b.size(), "signature lists differ in length");
  int K = 0;
  for (size_t k = 0; k < a.size(); ++k)
    if (in_neighborhood(a[k], b[k]) || in_neighborhood(b[k], a[k])) K = static_cast<int>(k) + 1;
  return K;
}

int k_agreement(const SiteConfig& a, const SiteConfig& b, const std::vector<SignatureEvaluator>& levels) {
  if (!same_grid(a.grid(), b.grid())) throw InvalidParameter("configurations live on different grids");
  std::vector<CrossingSignature> sa, sb;
  for (const auto& ev : levels) {
    sa.push_back(ev(a));
    sb.push_back(ev(b));
  }
  return k_agreement(sa, sb);
}

double surrogate_distance(int K, int k_max) { return K >= k_max ? 0.0 : std::ldexp(1.0, -K); }

double skorohod_search(const std::vector<double>& ta, const std::vector<double>& tb, double end,
                       const std::vector<std::vector<double>>& dist) {
  const int m = static_cast<int>(ta.size()) - 1, n = static_cast<int>(tb.size()) - 1;
  require(m >= 0 && n >= 0 && ta[0] == tb[0], "paths must share their start");
  std::vector<double> A = ta, B = tb;
  A.push_back(end);
  B.push_back(end);
  for (int i = 0; i <= m; ++i) require(A[i] < A[i + 1], "state times must increase strictly below the end");
  for (int j = 0; j <= n; ++j) require(B[j] < B[j + 1], "state times must increase strictly below the end");
  // Cost of mapping [A[i0], A[i1]] linearly onto [B[j0], B[j1]].
  auto segment = [&](int i0, int j0, int i1, int j1) {
    const double slope = (B[j1] - B[j0]) / (A[i1] - A[i0]);
    double cost = std::abs(std::log(slope));
    int i = i0, j = j0;
    while (i < i1 && j < j1) {
      cost = std::max(cost, dist[i][j]);
      const double ea = A[i + 1];
      const double eb = A[i0] + (B[j + 1] - B[j0]) / slope;
      if (std::abs(ea - eb) <= 1e-12 * std::max(1.0, std::abs(ea))) {
        ++i;
        ++j;
      } else if (ea < eb) {
        ++i;
      } else {
        ++j;
      }
    }
    return cost;
  };
  std::vector<std::vector<double>> best(m + 2, std::vector<double>(n + 2, kInf));
  best[0][0] = 0;
  for (int i1 = 1; i1 <= m + 1; ++i1)
    for (int j1 = 1; j1 <= n + 1; ++j1) {
      if ((i1 == m + 1) != (j1 == n + 1)) continue;
      double b = kInf;
      for (int i0 = 0; i0 < i1; ++i0)
        for (int j0 = 0; j0 < j1; ++j0) {
          if (best[i0][j0] >= b) continue;
          b = std::min(b, std::max(best[i0][j0], segment(i0, j0, i1, j1)));
        }
      best[i1][j1] = b;
    }
  return best[m + 1][n + 1];
}

namespace {

struct SignaturePath {
  std::vector<double> times;
  std::vector<std::vector<CrossingSignature>> states;
  std::vector<CrossingSignature> final_state;
};

SignaturePath signature_path(const Trajectory& tr, const std::vector<SignatureEvaluator>& levels) {
  auto sign = [&](const SiteConfig& c) {
    std::vector<CrossingSignature> s;
    for (const auto& ev : levels) s.push_back(ev(c));
    return s;
  };
  SignaturePath p;
  SiteConfig cur = tr.config_at(tr.start());
  p.times.push_back(tr.start());
  p.states.push_back(sign(cur));
  const auto& ev = tr.events();
  size_t k = 0;
  while (k < ev.size() && ev[k].time <= tr.start()) ++k;
  while (k < ev.size()) {
    const double t = ev[k].time;
    bool changed = false;
    for (; k < ev.size() && ev[k].time == t; ++k) {
      changed = changed || cur.open(ev[k].site) != (ev[k].state != 0);
      cur.set(ev[k].site, ev[k].state != 0);
    }
    if (!changed) continue;
    auto s = sign(cur);
    if (t >= tr.end()) {
      p.final_state = std::move(s);
      return p;
    }
    if (s == p.states.back()) continue;
    p.times.push_back(t);
    p.states.push_back(std::move(s));
  }
  p.final_state = p.states.back();
  return p;
}

}  // namespace

SkorohodResult trajectory_distance(const Trajectory& a, const Trajectory& b,
                                   const std::vector<SignatureEvaluator>& levels, int reparam_budget) {
  if (a.start() != b.start() || a.end() != b.end()) throw InvalidParameter("trajectories must share their horizon");
  require(!levels.empty(), "need at least one quad family");
  const int k_max = static_cast<int>(levels.size());
  const SignaturePath pa = signature_path(a, levels), pb = signature_path(b, levels);
  SkorohodResult r;
  r.anchors_first = static_cast<int>(pa.times.size()) - 1;
  r.anchors_second = static_cast<int>(pb.times.size()) - 1;
  auto d = [&](const std::vector<CrossingSignature>& x, const std::vector<CrossingSignature>& y) {
    return surrogate_distance(k_agreement(x, y), k_max);
  };
  const double at_end = d(pa.final_state, pb.final_state);
  if (a.end() == a.start()) {
    r.distance = std::max(at_end, d(pa.states[0], pb.states[0]));
    r.exact_search = true;
    return r;
  }
  r.exact_search = r.anchors_first <= reparam_budget && r.anchors_second <= reparam_budget;
  if (r.exact_search) {
    std::vector<std::vector<double>> dist(pa.states.size(), std::vector<double>(pb.states.size()));
    for (size_t i = 0; i < pa.states.size(); ++i)
      for (size_t j = 0; j < pb.states.size(); ++j) dist[i][j] = d(pa.states[i], pb.states[j]);
    r.distance = std::max(at_end, skorohod_search(pa.times, pb.times, a.end(), dist));
    return r;
  }
  // Identity time change: compare the two paths on the merged time grid.
  double sup = at_end;
  size_t i = 0, j = 0;
  while (true) {
    sup = std::max(sup, d(pa.states[i], pb.states[j]));
    const double ta = i + 1 < pa.times.size() ? pa.times[i + 1] : kInf;
    const double tb = j + 1 < pb.times.size() ? pb.times[j + 1] : kInf;
    if (ta == kInf && tb == kInf) break;
    if (ta <= tb) ++i;
    if (tb <= ta) ++j;
  }
  r.distance = sup;
  return r;
}

std::string family_to_json(const QuadFamily& family) {
  nlohmann::json j;
  j["level"] = family.level;
  j["domain"] = {family.domain.x0, family.domain.y0, family.domain.x1, family.domain.y1};
  j["budget"] = family.budget;
  j["full_size"] = family.full_size;
  j["truncated"] = family.truncated;
  j["selection"] = "rectangles and notched L-hexagons, grouped by coarsest level, even-stride thinning";
  j["quads"] = nlohmann::json::array();
  for (size_t q = 0; q < family.quads.size(); ++q) {
    nlohmann::json e;
    e["id"] = q;
    e["vertices"] = nlohmann::json::array();
    for (const Point& p : family.quads[q].vertices()) e["vertices"].push_back({p.x, p.y});
    const auto& c = family.quads[q].corners();
    e["corners"] = {c[0], c[1], c[2], c[3]};
    j["quads"].push_back(e);
  }
  return j.dump();
}

std::string signature_csv(const CrossingSignature& sig) {
  std::ostringstream os;
  os << "quad,crossed,outer,almost\n";
  for (size_t q = 0; q < sig.crossed.size(); ++q)
    os << q << ',' << int(sig.crossed[q]) << ',' << int(sig.outer[q]) << ',' << int(sig.almost[q]) << '\n';
  return os.str();
}

}  // namespace nearcrit
