#include "nearcrit/pivotal.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <json.hpp>

#include "nearcrit/arms.hpp"
#include "nearcrit/error.hpp"

namespace nearcrit {

PivotalSet epsilon_important(const SiteConfig& config, double eps, const std::optional<Rect>& within) {
  const LatticeGrid& g = config.grid();
  const double eta = g.eta();
  require(eps > 0, "eps must be positive");
  require(eta < eps, "eps must exceed the mesh");
  const auto& st = config.states();
  const double tol = g.tolerance();
  const Rect& d = g.domain();
  Rect scan = d;
  if (within) {
    scan = {std::max(d.x0, within->x0), std::max(d.y0, within->y0), std::min(d.x1, within->x1),
            std::min(d.y1, within->y1)};
  }
  PivotalSet out;
  out.grid = config.grid_ptr();
  out.eps = eps;
  if (scan.x0 > scan.x1 || scan.y0 > scan.y1 || g.size() == 0) return out;

  const int32_t n = g.size();
  std::vector<uint32_t> stamp(n, 0);
  std::vector<int32_t> loc(n, -1);
  std::vector<uint8_t> is_target;
  std::vector<int32_t> box, owned, targets, tin, low, tout, parent;
  std::vector<std::pair<int32_t, int>> stack;
  uint32_t gen = 0;

  const auto a0 = static_cast<int64_t>(std::floor(scan.x0 / eps));
  const auto a1 = static_cast<int64_t>(std::floor(scan.x1 / eps));
  const auto b0 = static_cast<int64_t>(std::floor(scan.y0 / eps));
  const auto b1 = static_cast<int64_t>(std::floor(scan.y1 / eps));
  for (int64_t b = b0; b <= b1; ++b) {
    for (int64_t a = a0; a <= a1; ++a) {
      const Rect sq{a * eps, b * eps, (a + 1) * eps, (b + 1) * eps};
      owned.clear();
      for (int32_t s : g.sites_in(sq)) {
        const Point p = g.position(s);
        if (static_cast<int64_t>(std::floor(p.x / eps)) != a || static_cast<int64_t>(std::floor(p.y / eps)) != b)
          continue;
        if (within && !within->contains(p, tol)) continue;
        owned.push_back(s);
      }
      if (owned.empty()) continue;

      const Rect outer{(a - 1) * eps, (b - 1) * eps, (a + 2) * eps, (b + 2) * eps};
      box = g.sites_in(outer);
      ++gen;
      for (int32_t s : box) stamp[s] = gen;
      auto exterior_dir = [&](int32_t s, int dir) {
        const int32_t nb = g.neighbors(s)[dir];
        if (nb >= 0) return stamp[nb] != gen;
        return !outer.contains(g.point_of(neighbor_of(g.axial(s), dir)), tol);
      };

      // Depth-first search over monochromatic edges from a virtual node joined to
      // every target site; low-links tell whether removing x cuts a neighbor off.
      const int32_t nbox = static_cast<int32_t>(box.size());
      const int32_t T = nbox;
      for (int32_t k = 0; k < nbox; ++k) loc[box[k]] = k;
      targets.clear();
      is_target.assign(nbox, 0);
      for (int32_t k = 0; k < nbox; ++k)
        for (int dir = 0; dir < 6; ++dir)
          if (exterior_dir(box[k], dir)) {
            is_target[k] = 1;
            targets.push_back(k);
            break;
          }
      tin.assign(nbox + 1, -1);
      low.assign(nbox + 1, 0);
      tout.assign(nbox + 1, 0);
      parent.assign(nbox + 1, -1);
      int32_t timer = 0;
      tin[T] = low[T] = timer++;
      stack.assign(1, {T, 0});
      while (!stack.empty()) {
        const int32_t u = stack.back().first;
        int& it = stack.back().second;
        int32_t w = -1;
        if (u == T) {
          if (it < static_cast<int>(targets.size())) w = targets[it++];
        } else {
          const int32_t su = box[u];
          while (it < 6 && w < 0) {
            const int32_t v = g.neighbors(su)[it++];
            if (v >= 0 && stamp[v] == gen && st[v] == st[su]) w = loc[v];
          }
          if (w < 0 && it == 6) {
            ++it;
            if (is_target[u]) w = T;
          }
        }
        if (w >= 0) {
          if (tin[w] < 0) {
            parent[w] = u;
            tin[w] = low[w] = timer++;
            stack.push_back({w, 0});
          } else if (w != parent[u]) {
            low[u] = std::min(low[u], tin[w]);
          }
          continue;
        }
        tout[u] = timer;
        stack.pop_back();
        if (parent[u] >= 0) low[parent[u]] = std::min(low[parent[u]], low[u]);
      }
      auto reaches_avoiding = [&](int32_t v, int32_t x) {
        if (tin[v] < 0) return false;
        if (tin[x] < 0 || tin[v] < tin[x] || tin[v] >= tout[x]) return true;
        for (int32_t c : g.neighbors(box[x])) {
          if (c < 0 || stamp[c] != gen) continue;
          const int32_t lc = loc[c];
          if (parent[lc] == x && tin[lc] <= tin[v] && tin[v] < tout[lc]) return low[lc] < tin[x];
        }
        return false;
      };

      for (int32_t x : owned) {
        bool important = false;
        std::array<uint8_t, 6> slots{};
        const auto& nb = g.neighbors(x);
        for (int dir = 0; dir < 6; ++dir) {
          if (exterior_dir(x, dir)) {
            important = true;
            break;
          }
          const int32_t v = nb[dir];
          if (v >= 0 && reaches_avoiding(loc[v], loc[x])) slots[dir] = st[v] ? 1 : 2;
        }
        important = important || cyclic_alternations(slots) >= 4;
        if (important) {
          out.sites.push_back(x);
          out.square.emplace_back(a, b);
        }
      }
    }
  }
  return out;
}

std::vector<int32_t> ball_important(const SiteConfig& config, double s, const std::optional<Rect>& within) {
  const LatticeGrid& g = config.grid();
  require(s > 0, "radius must be positive");
  const ArmPattern four = ArmPattern::alternating(4);
  std::vector<int32_t> out;
  for (int32_t x = 0; x < g.size(); ++x) {
    if (within && !within->contains(g.position(x), g.tolerance())) continue;
    if (arm_event(config, ArmRegion::ball(config.grid_ptr(), x, s, true), four)) out.push_back(x);
  }
  return out;
}

double AtomicMeasure::total() const {
  double t = 0;
  for (double w : weights) t += w;
  return t;
}

double AtomicMeasure::mass_in(const Rect& r) const {
  double t = 0;
  for (size_t k = 0; k < atoms.size(); ++k)
    if (r.contains(atoms[k])) t += weights[k];
  return t;
}

PivotalMeasure pivotal_measure(const PivotalSet& set, double eta, double alpha4) {
  if (!(alpha4 > 0)) throw InvalidParameter("alpha4 estimate must be positive");
  require(eta > 0, "mesh must be positive");
  PivotalMeasure m;
  m.set = set;
  m.eta = eta;
  m.alpha4 = alpha4;
  m.weight = eta * eta / alpha4;
  for (int32_t s : set.sites) {
    m.atoms.push_back(set.grid->position(s));
    m.weights.push_back(m.weight);
  }
  return m;
}

std::string pivotal_set_to_json(const PivotalSet& set) {
  nlohmann::json j;
  j["eps"] = set.eps;
  j["eta"] = set.grid ? set.grid->eta() : 0.0;
  j["sites"] = nlohmann::json::array();
  for (size_t k = 0; k < set.sites.size(); ++k) {
    const Point p = set.grid->position(set.sites[k]);
    j["sites"].push_back({{"site", set.sites[k]}, {"x", p.x}, {"y", p.y}, {"square", {set.square[k].first, set.square[k].second}}});
  }
  return j.dump();
}

}  // namespace nearcrit
