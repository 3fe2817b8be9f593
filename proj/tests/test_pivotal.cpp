#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "nearcrit/error.hpp"
#include "nearcrit/pivotal.hpp"
#include "oracle.hpp"

using namespace nearcrit;

TEST_CASE("all-open configuration has no important points") {
  auto g = build_grid({0, 0, 1, 1}, 1.0 / 32);
  SiteConfig open(g, 1), closed(g, 0);
  CHECK(epsilon_important(open, 0.25).size() == 0);
  CHECK(epsilon_important(closed, 0.25).size() == 0);
  CHECK_THROWS_AS(epsilon_important(open, 1.0 / 64), InvalidParameter);
}

TEST_CASE("epsilon-important points match exhaustive search") {
  auto g = build_grid({0, 0, 3, 2.6}, 1.0);
  const int32_t n = g->size();
  REQUIRE(n <= 20);
  for (double eps : {1.2, 1.7}) {
    int64_t mismatches = 0, total = 0;
    for (uint64_t mask = 0; mask < (1ull << n); ++mask) {
      const auto st = oracle::bits_of(mask, n);
      auto got = epsilon_important(SiteConfig(g, st), eps).sites;
      std::sort(got.begin(), got.end());
      const auto want = oracle::eps_important(*g, eps, st);
      mismatches += got != want;
      total += static_cast<int64_t>(want.size());
    }
    CHECK(mismatches == 0);
    CHECK(total > 0);
  }
}

TEST_CASE("epsilon-important set lies between ball-importance sets") {
  auto g = build_grid({0, 0, 1.5, 1.5}, 1.0 / 16);
  const double eps = 0.25;
  for (uint64_t k = 0; k < 6; ++k) {
    auto c = sample_critical(g, {31, k});
    auto mid = epsilon_important(c, eps).sites;
    auto outer = ball_important(c, eps);
    auto inner = ball_important(c, 2 * std::sqrt(2.0) * eps);
    std::sort(mid.begin(), mid.end());
    CHECK(std::includes(mid.begin(), mid.end(), inner.begin(), inner.end()));
    CHECK(std::includes(outer.begin(), outer.end(), mid.begin(), mid.end()));
  }
}

TEST_CASE("center of a long plus pattern is epsilon-important") {
  auto g = build_grid({-1, -1, 1, 1}, 1.0 / 32);
  const double eps = 0.2;
  const int32_t center = g->nearest_site({0.1, 0});
  // Closed column through the chosen site, open elsewhere.
  SiteConfig d(g, 1);
  const Point pc = g->position(center);
  for (int32_t s = 0; s < g->size(); ++s) {
    const Point p = g->position(s);
    if (std::abs(p.x - pc.x) <= g->eta() / 2 + g->tolerance() && std::abs(p.y - pc.y) > g->tolerance()) d.set(s, false);
  }
  auto set = epsilon_important(d, eps);
  CHECK(std::find(set.sites.begin(), set.sites.end(), center) != set.sites.end());
  auto restricted = epsilon_important(d, eps, Rect{0.0, -0.2, 0.2, 0.2});
  CHECK(std::find(restricted.sites.begin(), restricted.sites.end(), center) != restricted.sites.end());
  for (int32_t s : restricted.sites) CHECK(Rect{0.0, -0.2, 0.2, 0.2}.contains(g->position(s), 1e-12));
}

TEST_CASE("pivotal measure weights") {
  auto g = build_grid({0, 0, 1, 1}, 1.0 / 64);
  PivotalSet empty{g, 0.25, {}, {}};
  CHECK(pivotal_measure(empty, 1.0 / 64, 0.1).total() == 0);
  CHECK_THROWS_AS(pivotal_measure(empty, 1.0 / 64, 0), InvalidParameter);
  auto c = sample_critical(g, {2, 2});
  auto set = epsilon_important(c, 0.25);
  REQUIRE(set.size() > 0);
  auto m = pivotal_measure(set, 1.0 / 64, 0.05);
  CHECK(m.total() == doctest::Approx(set.size() * (1.0 / 4096) / 0.05));
  CHECK(m.mass_in({0, 0, 1, 1}) == doctest::Approx(m.total()));
  CHECK(m.mass_in({0, 0, 0.5, 1}) + m.mass_in({0.5 + 1e-9, 0, 1, 1}) == doctest::Approx(m.total()));
  auto js = nlohmann::json::parse(pivotal_set_to_json(set));
  CHECK(js["sites"].size() == set.size());
  CHECK(js["eps"].get<double>() == 0.25);
}
