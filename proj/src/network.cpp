#include "nearcrit/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "nearcrit/error.hpp"
#include "nearcrit/union_find.hpp"

namespace nearcrit {

namespace {

bool has_edge(const std::vector<std::pair<int, int>>& edges, int a, int b) {
  if (a > b) std::swap(a, b);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(a, b));
}

void normalize(std::vector<std::pair<int, int>>& edges) {
  for (auto& e : edges)
    if (e.first > e.second) std::swap(e.first, e.second);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

// Whether vertex `to` is reachable from `from` along `edges`, passing only
// through point vertices with phi == want.
bool reach(const Network& net, const std::vector<std::pair<int, int>>& edges, const std::vector<uint8_t>& phi,
           uint8_t want, int from, int to) {
  const int n = net.p() + 4;
  std::vector<std::vector<int>> adj(n);
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<uint8_t> seen(n, 0);
  std::vector<int> q = {from};
  seen[from] = 1;
  for (size_t h = 0; h < q.size(); ++h) {
    for (int v : adj[q[h]]) {
      if (seen[v]) continue;
      if (v == to) return true;
      if (v >= net.p() || phi[v] != want) continue;
      seen[v] = 1;
      q.push_back(v);
    }
  }
  return false;
}

}  // namespace

bool Network::has_primal(int a, int b) const { return has_edge(primal, a, b); }
bool Network::has_dual(int a, int b) const { return has_edge(dual, a, b); }

void Network::validate() const {
  require(sites.size() == points.size(), "one site per point");
  const int n = p() + 4;
  for (const auto* edges : {&primal, &dual}) {
    for (size_t k = 0; k < edges->size(); ++k) {
      const auto [a, b] = (*edges)[k];
      require(0 <= a && a < b && b < n, "edge endpoints out of range");
      if (k > 0) require((*edges)[k - 1] < (*edges)[k], "repeated edge");
    }
  }
  for (const auto& [a, b] : primal)
    for (int v : {a, b}) require(v != boundary(1) && v != boundary(3), "primal edge at a dual boundary vertex");
  for (const auto& [a, b] : dual)
    for (int v : {a, b}) require(v != boundary(0) && v != boundary(2), "dual edge at a primal boundary vertex");
  if (gated) require(primal.empty() && dual.empty(), "gated network carries edges");
}

double r_star(const std::vector<Point>& X, const Quad& quad) {
  double m = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < X.size(); ++i) {
    m = std::min(m, quad.boundary_distance(X[i]));
    for (size_t j = i + 1; j < X.size(); ++j) m = std::min(m, dist(X[i], X[j]));
  }
  return m / 10;
}

bool is_dyadic(double r) {
  if (!(r > 0) || !std::isfinite(r)) return false;
  int e = 0;
  return std::frexp(r, &e) == 0.5;
}

Rect box_square(Point x, double r) {
  const double h = r / 2;
  const double a = std::floor(x.x / h), b = std::floor(x.y / h);
  return {a * h - r / 4, b * h - r / 4, a * h + 3 * r / 4, b * h + 3 * r / 4};
}

Network extract_network(const SiteConfig& config, const Quad& quad, const std::vector<Point>& X, double r) {
  require(is_dyadic(r), "scale must be a dyadic number");
  const LatticeGrid& g = config.grid();
  Network net;
  net.r = r;
  net.points = X;
  for (const Point& x : X) {
    require(quad.contains(x), "points must lie inside the quad");
    net.sites.push_back(g.nearest_site(x));
  }
  if (r >= r_star(X, quad)) {
    net.gated = true;
    return net;
  }
  const QuadRegion region = discretize(config.grid_ptr(), quad);
  const auto& st = config.states();
  const int p = net.p();
  std::vector<int> box_of(g.size(), -1);
  for (int i = 0; i < p; ++i) {
    const Rect b = box_square(X[i], r);
    for (int32_t s : g.sites_in(b)) {
      const Point q = g.position(s);
      if (q.x < b.x1 && q.y < b.y1 && region.contains(s)) box_of[s] = i;
    }
    if (region.contains(net.sites[i])) box_of[net.sites[i]] = i;
  }

  const int32_t m = static_cast<int32_t>(region.sites.size());
  UnionFind uf(m);
  for (int32_t k = 0; k < m; ++k) {
    const int32_t s = region.sites[k];
    if (box_of[s] >= 0) continue;
    for (int32_t v : g.neighbors(s))
      if (v >= 0 && region.contains(v) && box_of[v] < 0 && st[v] == st[s]) uf.Unite(k, region.local[v]);
  }
  std::vector<uint8_t> arcs(m, 0);
  std::vector<std::vector<int>> boxes(m);
  for (int32_t k = 0; k < m; ++k) {
    const int32_t s = region.sites[k];
    const int bs = box_of[s];
    if (bs >= 0) {
      for (int arc = 0; arc < 4; ++arc) {
        if (!(region.touch[k] >> arc & 1)) continue;
        (arc % 2 == 0 ? net.primal : net.dual).push_back({net.boundary(arc), bs});
      }
      for (int32_t v : g.neighbors(s)) {
        if (v < 0 || !region.contains(v)) continue;
        const int bv = box_of[v];
        if (bv >= 0 && bv != bs) {
          net.primal.push_back({bs, bv});
          net.dual.push_back({bs, bv});
        } else if (bv < 0) {
          boxes[uf.Find(region.local[v])].push_back(bs);
        }
      }
      continue;
    }
    arcs[uf.Find(k)] |= region.touch[k];
  }
  for (int32_t k = 0; k < m; ++k) {
    const int32_t s = region.sites[k];
    if (box_of[s] >= 0 || uf.Find(k) != k) continue;
    auto& bx = boxes[k];
    std::sort(bx.begin(), bx.end());
    bx.erase(std::unique(bx.begin(), bx.end()), bx.end());
    const bool open = st[s] != 0;
    auto& edges = open ? net.primal : net.dual;
    const int a0 = open ? 0 : 1, a1 = open ? 2 : 3;
    for (size_t u = 0; u < bx.size(); ++u)
      for (size_t w = u + 1; w < bx.size(); ++w) edges.push_back({bx[u], bx[w]});
    for (int arc : {a0, a1})
      if (arcs[k] >> arc & 1)
        for (int b : bx) edges.push_back({net.boundary(arc), b});
    if ((arcs[k] >> a0 & 1) && (arcs[k] >> a1 & 1)) edges.push_back({net.boundary(a0), net.boundary(a1)});
  }
  normalize(net.primal);
  normalize(net.dual);
  return net;
}

std::optional<bool> evaluate(const Network& net, const std::vector<uint8_t>& phi) {
  if (static_cast<int>(phi.size()) != net.p()) throw InvalidParameter("assignment size differs from the point count");
  const bool primal = reach(net, net.primal, phi, 1, net.boundary(0), net.boundary(2));
  const bool dual = reach(net, net.dual, phi, 0, net.boundary(1), net.boundary(3));
  if (primal == dual) return std::nullopt;
  return primal;
}

bool is_boolean(const Network& net) {
  if (net.p() > 20) throw CapabilityError("exhaustive Boolean check limited to 20 points");
  std::vector<uint8_t> phi(net.p());
  for (uint64_t mask = 0; mask < (1ull << net.p()); ++mask) {
    for (int i = 0; i < net.p(); ++i) phi[i] = static_cast<uint8_t>(mask >> i & 1);
    if (!evaluate(net, phi)) return false;
  }
  return true;
}

bool is_connected(const Network& net) {
  // Structural paths may use every point vertex.
  const std::vector<uint8_t> ones(net.p(), 1);
  return reach(net, net.primal, ones, 1, net.boundary(0), net.boundary(2)) ||
         reach(net, net.dual, ones, 1, net.boundary(1), net.boundary(3));
}

StabilizationReport stabilization_scale(const SiteConfig& config, const std::vector<Point>& X, const Quad& quad,
                                        const std::vector<double>& r_list) {
  require(!r_list.empty(), "scale list must be nonempty");
  for (size_t k = 1; k < r_list.size(); ++k) require(r_list[k] < r_list[k - 1], "scale list must be descending");
  StabilizationReport rep;
  rep.r = r_list;
  for (double r : r_list) rep.networks.push_back(extract_network(config, quad, X, r));
  const size_t n = r_list.size();
  rep.changed.assign(n > 0 ? n - 1 : 0, 0);
  for (size_t k = 0; k + 1 < n; ++k) rep.changed[k] = !rep.networks[k].same_edges(rep.networks[k + 1]);
  size_t k = n - 1;
  while (k > 0 && !rep.changed[k - 1]) --k;
  rep.scale = r_list[k];
  return rep;
}

OracleReport network_oracle_test(const SiteConfig& config, const Quad& quad, const std::vector<Point>& X, double r,
                                 int64_t trials, const RngSpec& spec) {
  OracleReport rep;
  const Network net = extract_network(config, quad, X, r);
  if (net.gated) {
    rep.skipped = true;
    return rep;
  }
  rep.boolean = net.p() <= 20 && is_boolean(net);
  const CrossingEvaluator ev(config.grid_ptr(), quad);
  SiteConfig work = config;
  std::vector<uint8_t> phi(net.p());
  Rng rng(spec);
  const bool exhaustive = net.p() < 62 && (int64_t{1} << net.p()) <= trials;
  const int64_t n = exhaustive ? (int64_t{1} << net.p()) : trials;
  for (int64_t t = 0; t < n; ++t) {
    for (int i = 0; i < net.p(); ++i) {
      phi[i] = exhaustive ? static_cast<uint8_t>(t >> i & 1) : static_cast<uint8_t>(rng.bits() >> 63);
      work.set(net.sites[i], phi[i] != 0);
    }
    const auto f = evaluate(net, phi);
    ++rep.trials;
    rep.agree += f.has_value() && *f == ev.open_crossing(work);
  }
  return rep;
}

namespace {

std::string vertex_label(const Network& net, int v) {
  if (v < net.p()) return "x" + std::to_string(v + 1);
  return "d" + std::to_string(v - net.p() + 1);
}

}  // namespace

std::string network_to_json(const Network& net) {
  nlohmann::json j;
  j["r"] = net.r;
  j["gated"] = net.gated;
  j["vertices"] = nlohmann::json::array();
  for (int v = 0; v < net.p() + 4; ++v) {
    nlohmann::json e = {{"label", vertex_label(net, v)}};
    if (v < net.p()) {
      e["x"] = net.points[v].x;
      e["y"] = net.points[v].y;
      e["site"] = net.sites[v];
    }
    j["vertices"].push_back(e);
  }
  for (const char* key : {"primal", "dual"}) {
    const auto& edges = std::string(key) == "primal" ? net.primal : net.dual;
    j[key] = nlohmann::json::array();
    for (const auto& [a, b] : edges) j[key].push_back({vertex_label(net, a), vertex_label(net, b)});
  }
  return j.dump();
}

std::string network_to_dot(const Network& net) {
  std::ostringstream os;
  os << "graph network {\n";
  for (int v = 0; v < net.p() + 4; ++v)
    os << "  " << vertex_label(net, v) << (v < net.p() ? " [shape=circle];\n" : " [shape=box];\n");
  for (const auto& [a, b] : net.primal) os << "  " << vertex_label(net, a) << " -- " << vertex_label(net, b) << ";\n";
  for (const auto& [a, b] : net.dual)
    os << "  " << vertex_label(net, a) << " -- " << vertex_label(net, b) << " [style=dashed];\n";
  os << "}\n";
  return os.str();
}

}  // namespace nearcrit
