#include <doctest.h>

#include "nearcrit/error.hpp"
#include "nearcrit/quad.hpp"
#include "oracle.hpp"

using namespace nearcrit;

namespace {

std::vector<Quad> small_quads() {
  std::vector<Quad> qs;
  qs.push_back(Quad::rectangle({0, 0, 3, 2.6}, true));
  qs.push_back(Quad::rectangle({0, 0, 3, 2.6}, false));
  qs.push_back(Quad::rectangle({0.4, 0.2, 2.6, 2.2}, true));
  qs.push_back(Quad({{0, 0}, {3, 0}, {3, 1}, {1, 1}, {1, 2}, {0, 2}}, {0, 1, 3, 5}, 0));
  qs.push_back(Quad({{0, 0}, {3, 0}, {3, 1}, {1, 1}, {1, 2}, {0, 2}}, {0, 2, 4, 5}, 0));
  return qs;
}

}  // namespace

TEST_CASE("quad validation") {
  CHECK_THROWS_AS(Quad({{0, 0}, {1, 0}, {1, 1}}, {0, 1, 2, 2}), InvalidParameter);
  CHECK_THROWS_AS(Quad({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {0, 2, 1, 3}), InvalidParameter);
  CHECK_THROWS_AS(Quad({{0, 0}, {1, 1}, {1, 0}, {0, 1}}, {0, 1, 2, 3}), InvalidParameter);
  CHECK_THROWS_AS(Quad({{0, 0}, {0.3, 0}, {0.3, 1}, {0, 1}}, {0, 1, 2, 3}, 1), InvalidParameter);
  CHECK_NOTHROW(Quad({{0, 0}, {0.5, 0}, {0.5, 1}, {0, 1}}, {0, 1, 2, 3}, 1));
}

TEST_CASE("rectangle arcs and rotation") {
  Quad h = Quad::rectangle({0, 0, 2, 1}, true);
  CHECK(h.arc(0).front().x == 0);
  CHECK(h.arc(0).back().x == 0);
  CHECK(h.arc(2).front().x == 2);
  Quad v = Quad::rectangle({0, 0, 2, 1}, false);
  CHECK(v.arc(0).front().y == 0);
  CHECK(v.arc(2).front().y == 1);
  Quad r = h.rotated();
  for (int m = 0; m < 4; ++m) CHECK(r.arc(m) == h.arc((m + 1) % 4));
}

TEST_CASE("quad outside domain is rejected") {
  auto g = build_grid({0, 0, 1, 1}, 0.1);
  SiteConfig c(g, 1);
  CHECK_THROWS_AS(crosses(c, Quad::rectangle({0.5, 0.5, 1.5, 1}, true)), InvalidParameter);
}

TEST_CASE("extreme configurations") {
  auto g = build_grid({0, 0, 1, 1}, 1.0 / 32);
  SiteConfig open(g, 1), closed(g, 0);
  for (const Rect& r : {Rect{0, 0, 1, 1}, Rect{0.1, 0.2, 0.7, 0.4}, Rect{0.2, 0.1, 0.3, 0.9}}) {
    for (bool horiz : {true, false}) {
      Quad q = Quad::rectangle(r, horiz);
      CHECK(crosses(open, q));
      CHECK_FALSE(crosses(closed, q));
      CHECK(dual_crosses(closed, q));
      CHECK_FALSE(dual_crosses(open, q));
    }
  }
}

TEST_CASE("crossing parity with exhaustive path search") {
  auto g = build_grid({0, 0, 3, 2.6}, 1.0);
  REQUIRE(g->size() <= 20);
  const int32_t n = g->size();
  for (const Quad& q : small_quads()) {
    CrossingEvaluator ev(g, q);
    int64_t mismatches = 0;
    for (uint64_t mask = 0; mask < (1ull << n); ++mask) {
      SiteConfig c(g, oracle::bits_of(mask, n));
      mismatches += ev.open_crossing(c) != oracle::crosses(*g, q, c.states());
      mismatches += ev.closed_crossing(c) != oracle::dual_crosses(*g, q, c.states());
      // Exactly one of an open 0-2 crossing and a closed 1-3 crossing.
      mismatches += ev.open_crossing(c) == ev.closed_crossing(c);
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("duality on sampled critical configurations") {
  auto g = build_grid({0, 0, 1, 1}, 1.0 / 24);
  Quad sq = Quad::rectangle({0.1, 0.1, 0.9, 0.9}, true);
  Quad lshape({{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.5}, {0.5, 0.5}, {0.5, 0.75}, {0.25, 0.75}}, {0, 1, 3, 5}, 2);
  for (uint64_t k = 0; k < 300; ++k) {
    auto c = sample_critical(g, {21, k});
    CHECK(crosses(c, sq) != dual_crosses(c, sq));
    CHECK(crosses(c, lshape) != dual_crosses(c, lshape));
    // Rotating the quad and swapping colors exchanges the two events.
    SiteConfig swapped = c;
    for (auto& s : swapped.states()) s = 1 - s;
    CHECK(crosses(c, sq.rotated()) == dual_crosses(swapped, sq));
  }
}

TEST_CASE("adding open sites preserves crossings") {
  auto g = build_grid({0, 0, 1, 1}, 1.0 / 20);
  Quad q = Quad::rectangle({0, 0, 1, 1}, true);
  auto labels = sample_labels(g, {4, 4});
  bool prev = false;
  for (double p = 0; p <= 1.0001; p += 0.02) {
    bool now = crosses(threshold(labels, std::min(p, 1.0)), q);
    CHECK((!prev || now));
    prev = now;
  }
}

TEST_CASE("witness cluster joins arcs 0 and 2") {
  auto g = build_grid({0, 0, 1, 1}, 1.0 / 16);
  Quad q = Quad::rectangle({0, 0, 1, 1}, true);
  for (uint64_t k = 0; k < 50; ++k) {
    auto c = sample_critical(g, {8, k});
    CrossingEvaluator ev(g, q);
    auto w = ev.witness(c);
    CHECK(w.empty() != ev.open_crossing(c));
    bool left = false, right = false;
    for (int32_t s : w) {
      CHECK(c.open(s));
      const auto l = ev.region().local[s];
      left = left || (ev.region().touch[l] & 1);
      right = right || (ev.region().touch[l] & 4);
    }
    if (!w.empty()) CHECK((left && right));
  }
}
