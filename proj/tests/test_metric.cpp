#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "nearcrit/error.hpp"
#include "nearcrit/metric.hpp"

using namespace nearcrit;

namespace {

const Rect kUnit{0, 0, 1, 1};

bool same_quad(const Quad& a, const Quad& b) { return a.vertices() == b.vertices() && a.corners() == b.corners(); }

// Cost of one anchored time change, evaluated by sampling every elementary interval.
double anchored_cost(const std::vector<double>& A, const std::vector<double>& B,
                     const std::vector<std::pair<int, int>>& pairs, const std::vector<std::vector<double>>& dist) {
  // pairs include (0,0) and the end anchors; A and B include the end time.
  double cost = 0;
  std::vector<double> cuts;
  for (size_t s = 0; s + 1 < pairs.size(); ++s) {
    const double a0 = A[pairs[s].first], a1 = A[pairs[s + 1].first];
    const double b0 = B[pairs[s].second], b1 = B[pairs[s + 1].second];
    cost = std::max(cost, std::abs(std::log((b1 - b0) / (a1 - a0))));
    cuts.push_back(a0);
    for (double a : A)
      if (a > a0 && a < a1) cuts.push_back(a);
    for (double b : B)
      if (b > b0 && b < b1) cuts.push_back(a0 + (b - b0) * (a1 - a0) / (b1 - b0));
  }
  cuts.push_back(A.back());
  std::sort(cuts.begin(), cuts.end());
  auto lambda = [&](double u) {
    for (size_t s = 0; s + 1 < pairs.size(); ++s) {
      const double a0 = A[pairs[s].first], a1 = A[pairs[s + 1].first];
      if (u <= a1) {
        const double b0 = B[pairs[s].second], b1 = B[pairs[s + 1].second];
        return b0 + (u - a0) * (b1 - b0) / (a1 - a0);
      }
    }
    return B.back();
  };
  auto state = [](const std::vector<double>& T, double t) {
    int i = 0;
    while (i + 2 < static_cast<int>(T.size()) && T[i + 1] <= t) ++i;
    return i;
  };
  for (size_t c = 0; c + 1 < cuts.size(); ++c) {
    if (cuts[c + 1] - cuts[c] < 1e-12) continue;
    const double u = 0.5 * (cuts[c] + cuts[c + 1]);
    cost = std::max(cost, dist[state(A, u)][state(B, lambda(u))]);
  }
  return cost;
}

double brute_anchored(const std::vector<double>& ta, const std::vector<double>& tb, double end,
                      const std::vector<std::vector<double>>& dist) {
  std::vector<double> A = ta, B = tb;
  A.push_back(end);
  B.push_back(end);
  const int m = static_cast<int>(ta.size()) - 1, n = static_cast<int>(tb.size()) - 1;
  double best = std::numeric_limits<double>::infinity();
  for (int sa = 0; sa < (1 << m); ++sa)
    for (int sb = 0; sb < (1 << n); ++sb) {
      if (__builtin_popcount(sa) != __builtin_popcount(sb)) continue;
      std::vector<std::pair<int, int>> pairs = {{0, 0}};
      std::vector<int> ia, ib;
      for (int i = 0; i < m; ++i)
        if (sa >> i & 1) ia.push_back(i + 1);
      for (int j = 0; j < n; ++j)
        if (sb >> j & 1) ib.push_back(j + 1);
      for (size_t k = 0; k < ia.size(); ++k) pairs.push_back({ia[k], ib[k]});
      pairs.push_back({m + 1, n + 1});
      best = std::min(best, anchored_cost(A, B, pairs, dist));
    }
  return best;
}

Trajectory step_path(const GridPtr& g, double t_jump) {
  std::vector<FlipEvent> ev;
  for (int32_t s = 0; s < g->size(); ++s) ev.push_back({t_jump, s, 1});
  return Trajectory(SiteConfig(g, 0), 0, 1, ev);
}

}  // namespace

TEST_CASE("quad families") {
  const auto f1 = enumerate_quads(1, kUnit, 100000);
  CHECK(!f1.truncated);
  for (const Rect& r : {Rect{0, 0, 0.5, 0.5}, Rect{0.5, 0, 1, 0.5}, Rect{0, 0.5, 0.5, 1}, Rect{0.5, 0.5, 1, 1}}) {
    for (bool h : {true, false}) {
      const Quad want = Quad::rectangle(r, h);
      CHECK(std::any_of(f1.quads.begin(), f1.quads.end(), [&](const Quad& q) { return same_quad(q, want); }));
    }
  }
  size_t prev = 0;
  for (int k = 1; k <= 3; ++k) {
    const auto fk = enumerate_quads(k, kUnit, 3000);
    CHECK(fk.quads.size() >= prev);
    CHECK(fk.quads.size() == fk.outer.size());
    CHECK(static_cast<int64_t>(fk.quads.size()) <= fk.budget);
    const auto fn = enumerate_quads(k + 1, kUnit, 3000);
    for (size_t q = 0; q < fk.quads.size(); ++q) CHECK(same_quad(fk.quads[q], fn.quads[q]));
    prev = fk.quads.size();
    for (size_t q = 0; q < fk.quads.size(); ++q) {
      const Rect bb = fk.quads[q].bounding_box();
      CHECK(kUnit.contains(bb, 1e-12));
      const Rect ob = fk.outer[q].bounding_box();
      CHECK(kUnit.contains(ob, 1e-12));
      const double delta = std::ldexp(1.0, -k - 10);
      double far = 0;
      const auto& a = fk.quads[q].vertices();
      const auto& b = fk.outer[q].vertices();
      for (size_t v = 0; v < a.size(); ++v) far = std::max(far, dist(a[v], b[v]));
      CHECK(far >= delta * (1 - 1e-9));
      CHECK(far <= 32 * delta);
    }
  }
  CHECK(enumerate_quads(3, kUnit, 3000).truncated);
  const auto j = nlohmann::json::parse(family_to_json(f1));
  CHECK(j["quads"].size() == f1.quads.size());
  CHECK_THROWS_AS(enumerate_quads(0, kUnit), InvalidParameter);
}

TEST_CASE("outer enlargement and relaxations are ordered") {
  auto g = build_grid(kUnit, 1.0 / 32);
  const auto fam = enumerate_quads(2, kUnit, 400);
  const SignatureEvaluator ev(g, fam);
  for (uint64_t k = 0; k < 20; ++k) {
    const auto c = sample_critical(g, {61, k});
    const auto s = ev(c);
    for (size_t q = 0; q < fam.quads.size(); ++q) {
      if (s.outer[q]) CHECK(s.crossed[q]);
      if (s.crossed[q]) CHECK(s.almost[q]);
    }
  }
  const auto sig = ev(SiteConfig(g, 1));
  CHECK(signature_csv(sig).rfind("quad,crossed,outer,almost\n", 0) == 0);
}

TEST_CASE("crossing is hereditary for nested rectangles") {
  auto g = build_grid(kUnit, 1.0 / 32);
  Rng rng({62, 0});
  for (int t = 0; t < 200; ++t) {
    const double x0 = 0.25 * rng.uniform(), x1 = 0.75 + 0.25 * rng.uniform();
    const double y0 = 0.25 * rng.uniform(), y1 = 0.75 + 0.25 * rng.uniform();
    const Quad wide = Quad::rectangle({x0, y0, x1, y1});
    const Quad harder = Quad::rectangle({x0 * rng.uniform(), y0 + 0.2 * rng.uniform(), x1 + (1 - x1) * rng.uniform(),
                                         y1 - 0.2 * rng.uniform()});
    const auto c = sample_critical(g, {62, static_cast<uint64_t>(t + 1)});
    if (crosses(c, harder)) CHECK(crosses(c, wide));
  }
}

TEST_CASE("agreement index") {
  auto g = build_grid(kUnit, 1.0 / 16);
  std::vector<SignatureEvaluator> levels;
  for (int k = 1; k <= 3; ++k) levels.emplace_back(g, enumerate_quads(k, kUnit, 300));
  const SiteConfig open(g, 1), closed(g, 0);
  CHECK(k_agreement(open, closed, levels) == 0);
  CHECK(k_agreement(open, open, levels) == 3);
  std::vector<SiteConfig> cs;
  for (uint64_t k = 0; k < 12; ++k) cs.push_back(sample_critical(g, {63, k}));
  for (size_t a = 0; a < cs.size(); ++a) {
    CHECK(k_agreement(cs[a], cs[a], levels) == 3);
    for (size_t b = 0; b < cs.size(); ++b) {
      const int kab = k_agreement(cs[a], cs[b], levels);
      CHECK(kab == k_agreement(cs[b], cs[a], levels));
      for (size_t c = 0; c < cs.size(); c += 3)
        CHECK(k_agreement(cs[a], cs[c], levels) >= std::min(kab, k_agreement(cs[b], cs[c], levels)) - 20);
    }
  }
  auto other = build_grid(kUnit, 1.0 / 8);
  CHECK_THROWS_AS(k_agreement(open, SiteConfig(other, 1), levels), InvalidParameter);
  CHECK(surrogate_distance(3, 3) == 0);
  CHECK(surrogate_distance(1, 3) == 0.5);
}

TEST_CASE("refining the family lowers the agreement index by at most one level") {
  auto g = build_grid(kUnit, 1.0 / 16);
  std::vector<SignatureEvaluator> coarse, fine;
  for (int k = 1; k <= 2; ++k) coarse.emplace_back(g, enumerate_quads(k, kUnit, 300));
  for (int k = 2; k <= 3; ++k) fine.emplace_back(g, enumerate_quads(k, kUnit, 300));
  for (uint64_t t = 0; t < 20; ++t) {
    const auto a = sample_critical(g, {64, t}), b = sample_critical(g, {64, t + 100});
    std::vector<CrossingSignature> sa, sb;
    const int kc = k_agreement(a, b, coarse);
    // Fine family at level k+1 against the coarse family at level k.
    for (const auto& ev : fine) {
      sa.push_back(ev(a));
      sb.push_back(ev(b));
    }
    const int kf = k_agreement(sa, sb);
    CHECK(kf <= kc + 1);
  }
}

TEST_CASE("Skorohod search agrees with enumeration of anchored time changes") {
  Rng rng({65, 0});
  const double vals[] = {0, 0.125, 0.25, 0.5, 1};
  for (int t = 0; t < 300; ++t) {
    const int m = static_cast<int>(rng.below(3)), n = static_cast<int>(rng.below(3));
    std::vector<double> ta = {0}, tb = {0};
    for (int i = 0; i < m; ++i) ta.push_back(rng.uniform(0.05, 0.95));
    for (int j = 0; j < n; ++j) tb.push_back(rng.uniform(0.05, 0.95));
    std::sort(ta.begin(), ta.end());
    std::sort(tb.begin(), tb.end());
    std::vector<std::vector<double>> d(m + 1, std::vector<double>(n + 1));
    for (auto& row : d)
      for (double& x : row) x = vals[rng.below(5)];
    const double got = skorohod_search(ta, tb, 1, d);
    CHECK(got == doctest::Approx(brute_anchored(ta, tb, 1, d)).epsilon(1e-9));
  }
}

TEST_CASE("trajectory distance") {
  auto g = build_grid(kUnit, 1.0 / 16);
  std::vector<SignatureEvaluator> levels;
  for (int k = 1; k <= 2; ++k) levels.emplace_back(g, enumerate_quads(k, kUnit, 100));
  const auto base = step_path(g, 0.5);
  CHECK(trajectory_distance(base, base, levels).distance == 0);
  double prev = 1;
  for (double s : {0.2, 0.1, 0.01, 0.001}) {
    const auto r = trajectory_distance(base, step_path(g, 0.5 + s), levels);
    CHECK(r.exact_search);
    CHECK(r.distance == doctest::Approx(std::min(1.0, -std::log(1 - 2 * s))));
    CHECK(r.distance <= prev);
    prev = r.distance;
  }
  CHECK(prev < 0.01);
  const Trajectory short_path(SiteConfig(g, 0), 0, 0.5, {});
  CHECK_THROWS_AS(trajectory_distance(base, short_path, levels), InvalidParameter);
  const auto dyn = run_dynamical(sample_critical(g, {66, 0}), 1, [] {
    RateSpec r;
    r.rate = 0.05;
    return r;
  }(), {66, 1});
  const auto self = trajectory_distance(dyn, dyn, levels, 2);
  CHECK(self.distance == 0);
}
