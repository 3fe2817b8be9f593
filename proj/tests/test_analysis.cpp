#include <doctest.h>

#include <cmath>

#include "nearcrit/analysis.hpp"
#include "nearcrit/dynamics.hpp"
#include "nearcrit/error.hpp"
#include "nearcrit/quad.hpp"

using namespace nearcrit;

TEST_CASE("log-log fit recovers an exact power law") {
  std::vector<double> x{1, 2, 4, 8, 16}, y;
  for (double v : x) y.push_back(3 * std::pow(v, -1.25));
  const ExponentFit f = loglog_fit(x, y);
  REQUIRE(f.valid);
  CHECK(f.slope == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3).epsilon(1e-12));
  CHECK(f.predict(32) == doctest::Approx(3 * std::pow(32.0, -1.25)).epsilon(1e-12));
  for (double r : f.residuals) CHECK(std::abs(r) < 1e-12);
  CHECK(f.slope_se < 1e-9);

  const ExponentFit g = loglog_fit({1, 2, 4}, {1, 0, 4});
  CHECK(g.x.size() == 2);
  CHECK(g.slope == doctest::Approx(1));
  CHECK_FALSE(loglog_fit({1}, {1}).valid);
}

TEST_CASE("binomial fit interval covers the generating slope") {
  std::vector<double> x{1, 2, 4, 8};
  std::vector<Estimate> est;
  for (double v : x) {
    const int64_t n = 200000;
    est.push_back(binomial_estimate(static_cast<int64_t>(std::llround(0.5 * std::pow(v, -0.5) * n)), n));
  }
  const ExponentFit f = binomial_fit(x, est, 300, {3, 1});
  REQUIRE(f.valid);
  CHECK(f.resamples >= 10);
  CHECK(f.ci_low < -0.5);
  CHECK(f.ci_high > -0.5);
  CHECK(f.ci_high - f.ci_low < 0.05);
  CHECK(f.slope == doctest::Approx(-0.5).epsilon(0.01));
}

TEST_CASE("replica fit and mean estimate") {
  const MeanEstimate m = mean_estimate({1, 2, 3, 4});
  CHECK(m.mean == doctest::Approx(2.5));
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3 / 4)));
  CHECK(m.samples == 4);
  std::vector<std::vector<double>> reps{{1, 1, 1}, {4, 4, 4}, {16, 16, 16}};
  const ExponentFit f = replica_fit({1, 2, 4}, reps, 50, {1, 2});
  CHECK(f.slope == doctest::Approx(2));
}

TEST_CASE("parallel results do not depend on the worker count") {
  auto run = [](int threads) {
    std::vector<double> out(64);
    parallel_for(64, threads, [&](int64_t k) {
      Rng r(RngSpec{9, 0}.substream(k));
      out[k] = r.uniform();
    });
    return out;
  };
  CHECK(run(1) == run(3));
}

TEST_CASE("bottleneck threshold matches thresholded crossings") {
  auto g = build_grid({0, 0, 1, 1}, 1.0 / 24);
  const QuadRegion region = discretize(g, Quad::rectangle({0, 0, 1, 1}));
  for (uint64_t k = 0; k < 20; ++k) {
    const MonotoneLabels labels = sample_labels(g, {17, k});
    const double u = crossing_threshold(region, labels.labels());
    for (double p : {0.3, 0.45, 0.5, 0.55, 0.7, u}) {
      CHECK((u <= p) == crosses(threshold(labels, p), Quad::rectangle({0, 0, 1, 1})));
    }
  }
  Rng rng({5, 5});
  const double lazy = crossing_threshold(region, rng);
  CHECK(lazy > 0);
  CHECK(lazy < 1);
}

TEST_CASE("singularity statistic of uniform configurations") {
  auto g = build_grid({0, 0, 1, 1}, 1.0 / 32);
  const SingularityStat open = singularity_statistic(SiteConfig(g, 1), 4);
  CHECK(open.crossed == 16);
  CHECK(open.statistic == doctest::Approx(8 / std::pow(4.0, 1.25)));
  CHECK(singularity_statistic(SiteConfig(g, 0), 4).crossed == 0);
}

TEST_CASE("noise covariance at time zero is the variance") {
  const NoiseCurve c = noise_covariance(1.0 / 16, 0.05, Quad::rectangle({0, 0, 1, 1}), {0, 1, 1e9}, 400, {8, 1}, 1);
  const double p = c.probability;
  CHECK(c.covariance[0].mean == doctest::Approx(p * (1 - p) * 400 / 399).epsilon(1e-12));
  CHECK(std::abs(c.covariance[2].mean) < 4 * c.covariance[2].se + 1e-12);
  CHECK(c.covariance[1].mean < c.covariance[0].mean);
}

TEST_CASE("frozen dynamics gives indicator arm times") {
  const ExceptionalMoments e = exceptional_moments(0.5, 0.3, {2, 4}, 30, {4, 2}, 1, 0.0);
  for (size_t r = 0; r < e.R.size(); ++r) {
    CHECK(e.first[r].mean == doctest::Approx(e.second[r].mean));
    CHECK(e.first[r].mean == doctest::Approx(e.one_arm[r].value));
    if (e.first[r].mean > 0) CHECK(e.ratio()[r] == doctest::Approx(1 / e.first[r].mean));
  }
  CHECK(e.first[1].mean <= e.first[0].mean);
  CHECK_THROWS_AS(exceptional_moments(0.5, 0.3, {1}, 2, {1, 1}), InvalidParameter);
}

TEST_CASE("split configuration has a front of unit width") {
  const double eta = 1.0 / 64;
  auto g = build_grid({0, -0.25, 1, 0.25}, eta);
  SiteConfig c(g, 0);
  for (int32_t s = 0; s < g->size(); ++s) c.set(s, g->position(s).y > 0);
  const auto hull = front_hull(c);
  REQUIRE(!hull.empty());
  CHECK(hull_width(c, hull) < 1.5);

  const FrontWidth f = front_width({16, 32}, 10, {6, 1}, 1);
  CHECK(f.width[1].mean > f.width[0].mean);
}

TEST_CASE("scaling check at unit scale compares equal laws") {
  const ScalingCheck s = scaling_covariance_check(1.0 / 16, 0.05, Quad::rectangle({0, 0, 1, 1}), 1.0, 1.0, 2000,
                                                  {2, 9}, 1);
  CHECK(std::abs(s.z) < 4);
  CHECK(s.difference == doctest::Approx(s.scaled.value - s.original.value));
}

TEST_CASE("square bias vanishes at the critical point") {
  const SquareBias b = square_bias(1.0 / 32, 0.05, 0.0, {0.25, 0.5}, 200, {3, 3}, 1);
  for (const auto& m : b.bias) CHECK(m.mean == 0);
  const SquareBias c = square_bias(1.0 / 32, 0.05, 4.0, {0.25, 0.5}, 200, {3, 3}, 1);
  CHECK(c.bias[1].mean > 0);
}

TEST_CASE("correlation length saturates for large lambda") {
  const CorrelationReport r = correlation_length({1e9}, 1.0 / 16, 0.05, 0.01, 2.0 / 16, 1.0, 50, {1, 7}, 1);
  REQUIRE(r.lengths.size() == 1);
  CHECK_FALSE(r.lengths[0].censored);
  CHECK(r.lengths[0].L <= 2.0 / 16 + 1e-12);
}

TEST_CASE("pivotal first moment scales with the atom weight") {
  const auto a = pivotal_first_moment(1.0 / 32, 0.1, {0.25}, 3, {4, 4}, 1);
  const auto b = pivotal_first_moment(1.0 / 32, 0.2, {0.25}, 3, {4, 4}, 1);
  CHECK(a.moment[0].mean > 0);
  CHECK(a.moment[0].mean == doctest::Approx(2 * b.moment[0].mean));
  CHECK_THROWS_AS(pivotal_second_moment(1.0 / 32, 0.1, 0.25, {0.5}, 2, {1, 1}), InvalidParameter);
}

TEST_CASE("stability profile without time has no disagreement") {
  const StabilityProfile s = stability_profile(1.0 / 16, 0.05, {0.25, 0.5}, 0.0, 1, 5, {2, 2}, 1, 16);
  for (const auto& p : s.points) CHECK(p.disagreement.successes == 0);
  CHECK(s.worst_reversal() == 0);
  CHECK(s.points[0].mean_important >= s.points[1].mean_important);
}

TEST_CASE("arm profile at full density") {
  const ArmProfile a = arm_profile(1.0, 0, {4, 8}, ArmPattern::monochromatic(1, true), 20, {1, 1}, 1, 1.0);
  for (const auto& e : a.estimates) CHECK(e.value == 1);
}

TEST_CASE("alpha4 table JSON round trip") {
  const Alpha4Table t = estimate_alpha4({4, 8, 16}, 2000, {12, 0}, 1);
  const Alpha4Table u = alpha4_from_json(alpha4_to_json(t));
  REQUIRE(u.n == t.n);
  for (size_t k = 0; k < t.n.size(); ++k) {
    CHECK(u.estimates[k].value == t.estimates[k].value);
    CHECK(u.estimates[k].successes == t.estimates[k].successes);
  }
  CHECK(u.samples == t.samples);
  CHECK(u.seed == t.seed);
  CHECK(u.at(1.0 / 8) == t.estimates[1].value);
  CHECK(t.estimates[0].value >= t.estimates[2].value);
  CHECK(kesten_length(0.6, t) <= kesten_length(0.55, t));
  CHECK_THROWS_AS(alpha4_from_json("{\"format\": \"other\"}"), InvalidParameter);
}
