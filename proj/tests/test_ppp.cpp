#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "nearcrit/error.hpp"
#include "nearcrit/ppp.hpp"

using namespace nearcrit;

namespace {

AtomicMeasure measure(std::vector<Point> atoms, std::vector<double> weights) {
  AtomicMeasure m;
  m.atoms = std::move(atoms);
  m.weights = std::move(weights);
  return m;
}

// Subset enumeration straight from the definition: the infimum is attained in the
// limit from above at some candidate value.
bool feasible(const AtomicMeasure& a, const AtomicMeasure& b, double e) {
  const size_t n = a.size();
  for (uint32_t S = 1; S < (1u << n); ++S) {
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i)
      if (S >> i & 1) ma += a.weights[i];
    for (size_t j = 0; j < b.size(); ++j) {
      bool near = false;
      for (size_t i = 0; i < n; ++i)
        if ((S >> i & 1) && dist(a.atoms[i], b.atoms[j]) < e) near = true;
      if (near) mb += b.weights[j];
    }
    if (ma > mb + e + 1e-12) return false;
  }
  return true;
}

double brute_prohorov(const AtomicMeasure& mu, const AtomicMeasure& nu) {
  std::vector<double> cand = {0};
  for (const Point& p : mu.atoms)
    for (const Point& q : nu.atoms) cand.push_back(dist(p, q));
  auto subset_excess = [&](const AtomicMeasure& a, const AtomicMeasure& b) {
    const std::vector<double> d = cand;
    for (double tau : d)
      for (uint32_t S = 0; S < (1u << a.size()); ++S) {
        double ma = 0, mb = 0;
        for (size_t i = 0; i < a.size(); ++i)
          if (S >> i & 1) ma += a.weights[i];
        for (size_t j = 0; j < b.size(); ++j) {
          bool near = false;
          for (size_t i = 0; i < a.size(); ++i)
            if ((S >> i & 1) && dist(a.atoms[i], b.atoms[j]) <= tau) near = true;
          if (near) mb += b.weights[j];
        }
        if (ma - mb > 0) cand.push_back(ma - mb);
      }
  };
  subset_excess(mu, nu);
  subset_excess(nu, mu);
  std::sort(cand.begin(), cand.end());
  for (double c : cand)
    if (feasible(mu, nu, c + 1e-9) && feasible(nu, mu, c + 1e-9)) return c;
  return std::numeric_limits<double>::infinity();
}

}  // namespace

TEST_CASE("PPP sampling") {
  auto m = measure({{0.25, 0.25}, {0.75, 0.5}}, {2.0, 6.0});
  const auto p = sample_ppp(m, 0, {1, 0});
  CHECK(p.size() == 0);
  int64_t total = 0, plus = 0, at1 = 0;
  const int runs = 400;
  const double T = 1.5;
  for (int k = 0; k < runs; ++k) {
    const auto q = sample_ppp(m, T, {1, static_cast<uint64_t>(k)});
    total += q.size();
    plus += q.count(1);
    for (const auto& pt : q.points) {
      at1 += pt.atom == 1;
      CHECK(pt.t >= 0);
      CHECK(pt.t <= T);
    }
    CHECK(std::is_sorted(q.points.begin(), q.points.end(), [](const MarkedPoint& a, const MarkedPoint& b) { return a.t < b.t; }));
  }
  const double mean = runs * T * m.total();
  CHECK(std::abs(total - mean) < 5 * std::sqrt(mean));
  CHECK(std::abs(plus - total / 2.0) < 5 * std::sqrt(total / 4.0));
  CHECK(std::abs(at1 - 0.75 * total) < 5 * std::sqrt(total * 0.75 * 0.25));
  CHECK_THROWS_AS(sample_ppp(measure({{0, 0}}, {-1}), 1, {1, 0}), InvalidParameter);
}

TEST_CASE("PPP report") {
  MarkedPPP p;
  const Quad q = Quad::rectangle({0, 0, 1, 1});
  auto empty = ppp_properties(p, q);
  CHECK(empty.count == 0);
  CHECK(std::isinf(empty.min_pair_distance));
  CHECK(std::isinf(empty.min_boundary_distance));
  p.points = {{{0.5, 0.5}, 0.1, 1, 0}, {{0.5, 0.8}, 0.4, -1, 1}, {{0.5, 0.8}, 0.45, 1, 1}};
  auto r = ppp_properties(p, q);
  CHECK(r.count == 3);
  CHECK(r.min_pair_distance == 0);
  CHECK(r.coincident);
  CHECK(r.min_time_gap == doctest::Approx(0.05));
  CHECK(r.min_boundary_distance == doctest::Approx(0.2));
  const auto j = nlohmann::json::parse(ppp_to_json(p));
  CHECK(j["points"].size() == 3);
}

TEST_CASE("Prohorov distance matches subset enumeration") {
  CHECK(prohorov_distance(measure({}, {}), measure({}, {})) == 0);
  auto a = measure({{0.1, 0.1}, {0.5, 0.5}}, {0.3, 0.2});
  CHECK(prohorov_distance(a, a) == 0);
  Rng rng({77, 0});
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(5)), m = 1 + static_cast<int>(rng.below(5));
    AtomicMeasure mu, nu;
    const double scale = trial % 3 == 0 ? 1.0 : 0.2;
    for (int i = 0; i < n; ++i) {
      mu.atoms.push_back({rng.uniform(), rng.uniform()});
      mu.weights.push_back(scale * rng.uniform());
    }
    for (int j = 0; j < m; ++j) {
      nu.atoms.push_back({rng.uniform(), rng.uniform()});
      nu.weights.push_back(scale * rng.uniform());
    }
    if (trial % 4 == 1) nu.atoms[0] = mu.atoms[0];
    const double d = prohorov_distance(mu, nu);
    CHECK(d == doctest::Approx(brute_prohorov(mu, nu)).epsilon(1e-9));
    CHECK(d == doctest::Approx(prohorov_distance(nu, mu)).epsilon(1e-12));
  }
}

TEST_CASE("coupling cell size") {
  CHECK(coupling_cell(1e-6) == 1.0);
  CHECK(coupling_cell(1e-12) == 0.5);
  const double r = coupling_cell(1e-30);
  CHECK(r >= std::pow(4e-30, 0.05));
  CHECK(r / 2 < std::pow(4e-30, 0.05));
}

TEST_CASE("coupling of identical measures always succeeds") {
  auto mu = measure({{0.1, 0.2}, {0.6, 0.7}, {0.9, 0.1}, {1.0, 1.0}}, {0.3, 0.5, 0.2, 0.4});
  for (uint64_t k = 0; k < 50; ++k) {
    const auto c = couple_ppp(mu, mu, 2, 1e-20, {3, k});
    CHECK(c.success);
    REQUIRE(c.first.size() == c.second.size());
    for (size_t i = 0; i < c.first.size(); ++i) {
      CHECK(c.first.points[i].t == c.second.points[i].t);
      CHECK(c.first.points[i].sign == c.second.points[i].sign);
    }
  }
}

TEST_CASE("coupling marginals and failure detection") {
  auto mu = measure({{0.1, 0.1}}, {1.0});
  auto nu = measure({{0.1, 0.1}}, {0.5});
  int64_t xs = 0, ys = 0, fails = 0;
  const int runs = 2000;
  for (int k = 0; k < runs; ++k) {
    const auto c = couple_ppp(mu, nu, 2, 1e-20, {5, static_cast<uint64_t>(k)});
    xs += c.first.size();
    ys += c.second.size();
    CHECK(c.second.size() <= c.first.size());
    CHECK(c.success == (c.first.size() == c.second.size()));
    fails += !c.success;
  }
  CHECK(std::abs(xs - 2.0 * runs) < 5 * std::sqrt(2.0 * runs));
  CHECK(std::abs(ys - 1.0 * runs) < 5 * std::sqrt(1.0 * runs));
  const double pfail = 1 - std::exp(-1.0);
  CHECK(std::abs(fails - pfail * runs) < 5 * std::sqrt(runs * pfail * (1 - pfail)));
  CHECK_THROWS_AS(couple_ppp(measure({{2, 0}}, {1}), nu, 1, 1e-9, {1, 0}), InvalidParameter);
}
