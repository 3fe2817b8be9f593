#include <doctest.h>

#include <cmath>

#include "nearcrit/error.hpp"
#include "nearcrit/loewner.hpp"

using namespace nearcrit;

namespace {

std::vector<Point> absorbed(const DrivingFunction& d) {
  std::vector<Point> out;
  for (int64_t k : d.tip) out.push_back(d.gamma[k]);
  return out;
}

double diameter(const std::vector<Point>& pts) {
  double m = 0;
  for (const Point& p : pts)
    for (const Point& q : pts) m = std::max(m, dist(p, q));
  return m;
}

}  // namespace

TEST_CASE("vertical slit has zero driving function") {
  std::vector<Point> slit;
  for (int k = 0; k <= 20; ++k) slit.push_back({2.0, 0.1 * k});
  const DrivingFunction d = loewner_drive(slit, 0);
  CHECK_FALSE(d.truncated);
  for (double w : d.W) CHECK(std::abs(w) < 1e-12);
  CHECK(d.t.back() == doctest::Approx(1.0));
  CHECK(drift_sum(d, d.t, 0.75, 1.0) == 0);
  CHECK(d.value_at(0.5) == 0);
  CHECK(d.tip_at(d.t.back()).y == doctest::Approx(2.0));
  CHECK(d.tip_at(d.t.back()).x == 0);
}

TEST_CASE("capacity step thins the chain") {
  std::vector<Point> slit;
  for (int k = 0; k <= 40; ++k) slit.push_back({0, 0.05 * k});
  const DrivingFunction full = loewner_drive(slit, 0);
  const DrivingFunction coarse = loewner_drive(slit, 0.05);
  CHECK(coarse.t.size() < full.t.size());
  CHECK(coarse.t.back() == doctest::Approx(full.t.back()));
  CHECK(loewner_drive(slit, 0, 0.3).t.back() >= 0.3);
  CHECK(loewner_drive(slit, 0, 0.3).t.back() < 0.4);
}

TEST_CASE("curve returning to the real line is truncated") {
  const DrivingFunction d = loewner_drive({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, 0);
  CHECK(d.truncated);
  CHECK(!d.warning.empty());
  CHECK(d.t.size() == 2);
  CHECK_THROWS_AS(loewner_drive({{0, 1}, {0, 2}}, 0), InvalidParameter);
}

TEST_CASE("zipper round trip reproduces a critical interface") {
  GridPtr g = build_grid({-40, 0.5, 40, 40}, 1.0);
  const Interface it = trace_interface(sample_critical(g, {5, 1}));
  REQUIRE(it.reached_top);
  const DrivingFunction d = loewner_drive(it.path, 0);
  REQUIRE(d.t.size() > 50);
  const auto used = absorbed(d);
  CHECK(hausdorff_distance(loewner_trace(d), used) < 0.01 * diameter(used));
}

TEST_CASE("interfaces of uniform configurations follow the walls") {
  GridPtr g = build_grid({-10, 0.5, 10, 10}, 1.0);
  const Interface open = trace_interface(SiteConfig(g, 1));
  REQUIRE(open.reached_top);
  CHECK(open.path.back().x > 8);
  for (const Point& p : open.path) CHECK(p.y >= 0);
  const Interface closed = trace_interface(SiteConfig(g, 0));
  REQUIRE(closed.reached_top);
  CHECK(closed.path.back().x < -8);
  CHECK(open.path.front().x == doctest::Approx(-0.5));
}

TEST_CASE("interface vertices are triangle centers") {
  GridPtr g = build_grid({-12, 0.5, 12, 12}, 1.0);
  const Interface it = trace_interface(sample_critical(g, {2, 3}));
  for (size_t k = 1; k < it.path.size(); ++k) CHECK(dist(it.path[k], it.path[k - 1]) < 0.6);
}

TEST_CASE("exponent pair identities") {
  const ExponentPair a{3, 4, 4};
  CHECK(a.quadratic_identity());
  CHECK(a.linear_identity());
  const ExponentPair b{7, 0, 4};
  CHECK(b.quadratic_identity());
  CHECK(b.linear_identity());
  const ExponentPair c{1, 1, 1};
  CHECK_FALSE(c.quadratic_identity());
  CHECK_FALSE(c.linear_identity());
}

TEST_CASE("drift ensemble statistics") {
  const DriftEnsemble e = drift_ensemble(0, 0.01, 30, 40, 0, 8, 40, {3, 1}, 1);
  CHECK(e.samples == 40);
  CHECK(e.t.size() == 8);
  CHECK(e.second.back() > 0);
  CHECK(e.variance_slope > 0);
  CHECK(e.refinement.size() == 3);
  const DriftReport r = drift_conjecture_test(2, 0.01, 30, 40, 0, 8, 40, {3, 1}, 1);
  CHECK(r.control.lambda == 0);
  CHECK(r.c_hat == doctest::Approx(r.perturbed.drift / 2));
}
