#include "nearcrit/ppp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "nearcrit/error.hpp"
#include "nearcrit/maxflow.hpp"

namespace nearcrit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void sort_by_time(MarkedPPP& p) {
  std::sort(p.points.begin(), p.points.end(), [](const MarkedPoint& a, const MarkedPoint& b) {
    return a.t != b.t ? a.t < b.t : a.atom < b.atom;
  });
}

void check_measure(const AtomicMeasure& m) {
  require(m.atoms.size() == m.weights.size(), "atom and weight counts differ");
  for (double w : m.weights) require(w >= 0 && std::isfinite(w), "weights must be finite and nonnegative");
}

}  // namespace

size_t MarkedPPP::count(int sign) const {
  return static_cast<size_t>(std::count_if(points.begin(), points.end(), [sign](const MarkedPoint& p) { return p.sign == sign; }));
}

MarkedPPP sample_ppp(const AtomicMeasure& measure, double T, const RngSpec& spec) {
  require(T >= 0, "horizon must be nonnegative");
  check_measure(measure);
  Rng rng(spec);
  MarkedPPP out;
  out.horizon = T;
  for (size_t a = 0; a < measure.size(); ++a) {
    for (int sign : {1, -1}) {
      const uint64_t k = rng.poisson(T * measure.weights[a] / 2);
      for (uint64_t m = 0; m < k; ++m)
        out.points.push_back({measure.atoms[a], rng.uniform(0, T), sign, static_cast<int32_t>(a)});
    }
  }
  sort_by_time(out);
  return out;
}

PPPReport ppp_properties(const MarkedPPP& ppp, const Quad& quad) {
  PPPReport r;
  r.count = ppp.size();
  r.min_pair_distance = kInf;
  r.min_time_gap = kInf;
  r.min_boundary_distance = kInf;
  const auto& pts = ppp.points;
  for (size_t i = 0; i < pts.size(); ++i) {
    r.min_boundary_distance = std::min(r.min_boundary_distance, quad.boundary_distance(pts[i].x));
    if (i + 1 < pts.size()) r.min_time_gap = std::min(r.min_time_gap, pts[i + 1].t - pts[i].t);
    for (size_t j = i + 1; j < pts.size(); ++j) r.min_pair_distance = std::min(r.min_pair_distance, dist(pts[i].x, pts[j].x));
  }
  r.coincident = r.min_pair_distance == 0;
  return r;
}

double coupling_cell(double delta) {
  require(delta > 0, "delta must be positive");
  const double target = std::pow(4 * delta, 1.0 / 20);
  double r = 1;
  while (r / 2 >= target) r /= 2;
  while (r < target) r *= 2;
  return r;
}

PPPCoupling couple_ppp(const AtomicMeasure& mu, const AtomicMeasure& nu, double T, double delta, const RngSpec& spec) {
  require(T >= 0, "horizon must be nonnegative");
  check_measure(mu);
  check_measure(nu);
  PPPCoupling c;
  c.cell = coupling_cell(delta);
  c.first.horizon = c.second.horizon = T;
  const int side = std::max(1, static_cast<int>(std::lround(1 / c.cell)));
  const int cells = side * side;
  auto cell_of = [&](Point p) {
    require(p.x >= 0 && p.x <= 1 && p.y >= 0 && p.y <= 1, "coupled measures must live on the unit square");
    const int i = std::min(side - 1, static_cast<int>(std::floor(p.x / c.cell)));
    const int j = std::min(side - 1, static_cast<int>(std::floor(p.y / c.cell)));
    return j * side + i;
  };
  std::vector<std::vector<int32_t>> mu_atoms(cells), nu_atoms(cells);
  std::vector<double> mu_w(cells, 0), nu_w(cells, 0);
  for (size_t a = 0; a < mu.size(); ++a) {
    const int k = cell_of(mu.atoms[a]);
    mu_atoms[k].push_back(static_cast<int32_t>(a));
    mu_w[k] += mu.weights[a];
  }
  for (size_t a = 0; a < nu.size(); ++a) {
    const int k = cell_of(nu.atoms[a]);
    nu_atoms[k].push_back(static_cast<int32_t>(a));
    nu_w[k] += nu.weights[a];
  }
  Rng rng(spec);
  auto pick = [&rng](const AtomicMeasure& m, const std::vector<int32_t>& atoms, double total) {
    double u = rng.uniform() * total;
    for (int32_t a : atoms) {
      u -= m.weights[a];
      if (u <= 0) return a;
    }
    return atoms.back();
  };
  c.first_counts.assign(cells, 0);
  c.second_counts.assign(cells, 0);
  c.success = true;
  for (int k = 0; k < cells; ++k) {
    const uint64_t X = rng.poisson(T * mu_w[k]);
    const double keep = mu_w[k] > nu_w[k] ? nu_w[k] / mu_w[k] : 1.0;
    int64_t Y = 0;
    for (uint64_t m = 0; m < X; ++m) {
      const double t = rng.uniform(0, T);
      const int sign = (rng.bits() >> 63) ? 1 : -1;
      const int32_t a = pick(mu, mu_atoms[k], mu_w[k]);
      c.first.points.push_back({mu.atoms[a], t, sign, a});
      if (rng.uniform() <= keep) {
        const int32_t b = pick(nu, nu_atoms[k], nu_w[k]);
        c.second.points.push_back({nu.atoms[b], t, sign, b});
        ++Y;
      }
    }
    if (nu_w[k] > mu_w[k]) {
      const uint64_t extra = rng.poisson(T * (nu_w[k] - mu_w[k]));
      for (uint64_t m = 0; m < extra; ++m) {
        const double t = rng.uniform(0, T);
        const int sign = (rng.bits() >> 63) ? 1 : -1;
        const int32_t b = pick(nu, nu_atoms[k], nu_w[k]);
        c.second.points.push_back({nu.atoms[b], t, sign, b});
        ++Y;
      }
    }
    c.first_counts[k] = static_cast<int64_t>(X);
    c.second_counts[k] = Y;
    c.success = c.success && static_cast<int64_t>(X) == Y;
  }
  sort_by_time(c.first);
  sort_by_time(c.second);
  return c;
}

double prohorov_distance(const AtomicMeasure& mu, const AtomicMeasure& nu) {
  check_measure(mu);
  check_measure(nu);
  const int n = static_cast<int>(mu.size()), m = static_cast<int>(nu.size());
  const double mt = mu.total(), nt = nu.total();
  const double big = std::max(mt, nt);
  std::vector<double> dists = {0.0};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) dists.push_back(dist(mu.atoms[i], nu.atoms[j]));
  std::sort(dists.begin(), dists.end());
  dists.erase(std::unique(dists.begin(), dists.end()), dists.end());
  // Largest mass excess of one measure over the tau-neighborhood image of the other.
  auto excess = [&](double tau) {
    MaxFlow f(n + m + 2);
    const int S = n + m, T = n + m + 1;
    for (int i = 0; i < n; ++i) f.add_edge(S, i, mu.weights[i]);
    for (int j = 0; j < m; ++j) f.add_edge(n + j, T, nu.weights[j]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (dist(mu.atoms[i], nu.atoms[j]) <= tau) f.add_edge(i, n + j, kInf);
    return std::max(0.0, big - f.run(S, T, kInf, 1e-15 * std::max(1.0, big)));
  };
  // The answer is min_k max(d_k, excess(d_k)); excess is nonincreasing in d_k.
  size_t lo = 0, hi = dists.size() - 1;
  if (excess(dists[hi]) > dists[hi]) return excess(dists[hi]);
  while (lo < hi) {
    const size_t mid = (lo + hi) / 2;
    if (excess(dists[mid]) <= dists[mid]) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  double best = dists[lo];
  if (lo > 0) best = std::min(best, excess(dists[lo - 1]));
  return best;
}

std::string ppp_to_json(const MarkedPPP& ppp) {
  nlohmann::json j;
  j["horizon"] = ppp.horizon;
  j["points"] = nlohmann::json::array();
  for (const MarkedPoint& p : ppp.points)
    j["points"].push_back({{"x", p.x.x}, {"y", p.x.y}, {"t", p.t}, {"sign", p.sign}, {"atom", p.atom}});
  return j.dump();
}

std::string coupling_csv_header() { return "delta,T,M,trials,failures,rate,bound"; }

std::string coupling_csv_row(double delta, double T, double M, int64_t trials, int64_t failures, double bound) {
  std::ostringstream os;
  os.precision(10);
  os << delta << ',' << T << ',' << M << ',' << trials << ',' << failures << ','
     << (trials > 0 ? static_cast<double>(failures) / trials : 0.0) << ',' << bound;
  return os.str();
}

}  // namespace nearcrit
