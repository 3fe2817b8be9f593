// Acceptance run: one PASS/FAIL line per criterion. Arguments select criteria by
// number; none runs all. Exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "nearcrit/analysis.hpp"
#include "nearcrit/arms.hpp"
#include "nearcrit/dynamics.hpp"
#include "nearcrit/loewner.hpp"
#include "nearcrit/network.hpp"
#include "nearcrit/pivotal.hpp"
#include "nearcrit/ppp.hpp"
#include "nearcrit/quad.hpp"
#include "oracle.hpp"

using namespace nearcrit;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string ci(const ExponentFit& f) { return "[" + fmt("%.3f", f.ci_low) + ", " + fmt("%.3f", f.ci_high) + "]"; }

const Alpha4Table& alpha4() {
  static const Alpha4Table t = estimate_alpha4({8, 16, 32, 64, 128, 256, 512}, 50000, {1001, 0}, 1);
  return t;
}

Verdict crossing_symmetry() {
  const Estimate e = crossing_probability(1.0 / 256, Quad::rectangle({0, 0, 1, 1}), 0.5, 10000, {1, 1}, 1);
  return {std::abs(e.value - 0.5) <= 0.02,
          "P = " + fmt("%.4f", e.value) + " [" + fmt("%.4f", e.ci_low) + ", " + fmt("%.4f", e.ci_high) +
              "], target 0.50 +- 0.02"};
}

Verdict one_arm() {
  const ArmProfile a =
      arm_profile(1.0, 0, {8, 16, 32, 64, 128, 256}, ArmPattern::monochromatic(1), 10000, {2, 1}, 1);
  return {std::abs(a.exponent() - 5.0 / 48) <= 0.03,
          "exponent " + fmt("%.4f", a.exponent()) + " slope CI " + ci(a.fit) + ", target 0.104 +- 0.03"};
}

Verdict four_arm() {
  // Site-started profile; alpha4(r, R) ~ alpha4(1, R) / alpha4(1, r) for r = 8 lattice units.
  const double r = 8;
  const std::vector<double> ratio{2, 4, 8, 16, 32};
  std::vector<double> R;
  for (double q : ratio) R.push_back(q * r);
  const ArmProfile a = arm_profile(1.0, 0, R, ArmPattern::alternating(4), 100000, {3, 1}, 1);
  return {std::abs(a.exponent() - 1.25) <= 0.15,
          "exponent " + fmt("%.4f", a.exponent()) + " slope CI " + ci(a.fit) + " over R/r in {2..32}, r = 8" +
              ", target 1.25 +- 0.15"};
}

Verdict first_moment() {
  const double eta = 1.0 / 256;
  const PivotalMoments m = pivotal_first_moment(eta, alpha4().at(eta), {1.0 / 4, 1.0 / 8, 1.0 / 16, 1.0 / 32}, 40,
                                                {4, 1}, 1);
  return {std::abs(m.fit.slope + 1.25) <= 0.2,
          "slope " + fmt("%.4f", m.fit.slope) + " CI " + ci(m.fit) + ", target -1.25 +- 0.2"};
}

Verdict second_moment() {
  const double eta = 1.0 / 128;
  const PivotalMoments m =
      pivotal_second_moment(eta, alpha4().at(eta), 1.0, {1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0}, 2000, {5, 1}, 1);
  return {std::abs(m.fit.slope - 2.75) <= 0.3,
          "slope " + fmt("%.4f", m.fit.slope) + " CI " + ci(m.fit) + ", target 2.75 +- 0.3"};
}

Verdict network_oracle() {
  auto g = build_grid({0, 0, 1, 1}, 1.0 / 32);
  const std::vector<Quad> quads{Quad::rectangle({0.1, 0.1, 0.9, 0.7}), Quad::rectangle({0.2, 0.1, 0.8, 0.9}, false),
                                Quad({{0.1, 0.1}, {0.9, 0.1}, {0.9, 0.5}, {0.5, 0.5}, {0.5, 0.9}, {0.1, 0.9}},
                                     {0, 1, 3, 5})};
  Rng rng({6, 0});
  int64_t instances = 0, exact = 0, boolean = 0, assignments = 0;
  for (uint64_t k = 0; instances < 1000; ++k) {
    const Quad& q = quads[k % quads.size()];
    const SiteConfig c = sample_critical(g, {6, k + 1});
    const int want = 1 + static_cast<int>(rng.below(5));
    std::vector<Point> X;
    while (static_cast<int>(X.size()) < want) {
      const Point p = g->position(static_cast<int32_t>(rng.below(g->size())));
      if (!q.contains(p) || q.boundary_distance(p) < 2 * g->eta()) continue;
      bool ok = true;
      for (const Point& x : X) ok = ok && dist(x, p) > 2.5 * g->eta();
      if (ok) X.push_back(p);
    }
    const OracleReport rep = network_oracle_test(c, q, X, 1.0 / 1024, 32, {6, k});
    if (rep.skipped) continue;
    ++instances;
    exact += rep.agree == rep.trials;
    boolean += rep.boolean;
    assignments += rep.trials;
  }
  return {exact == instances && boolean == instances,
          std::to_string(exact) + "/" + std::to_string(instances) + " instances exact (" +
              std::to_string(assignments) + " assignments), " + std::to_string(boolean) + "/" +
              std::to_string(instances) + " Boolean"};
}

Verdict ppp_coupling() {
  Rng rng({7, 0});
  int64_t runs = 0, successes = 0, mismatched = 0;
  bool bound_ok = true;
  double worst = 0;
  for (double delta : {1e-30, 1e-45, 1e-60})
    for (double T : {0.5, 1.0, 2.0})
      for (double M : {0.5, 1.0}) {
        AtomicMeasure mu, nu;
        const int n = 8;
        double total = 0;
        for (int i = 0; i < n; ++i) {
          mu.atoms.push_back({0.05 + 0.9 * rng.uniform(), 0.05 + 0.9 * rng.uniform()});
          mu.weights.push_back(0.5 + rng.uniform());
          total += mu.weights.back();
        }
        for (double& w : mu.weights) w *= M / total;
        for (int i = 0; i < n; ++i) {
          const double a = 2 * M_PI * rng.uniform();
          nu.atoms.push_back({mu.atoms[i].x + 0.25 * delta * std::cos(a), mu.atoms[i].y + 0.25 * delta * std::sin(a)});
          nu.weights.push_back(mu.weights[i] * (1 + 0.25 * delta));
        }
        // Distances below double resolution are not representable.
        if (prohorov_distance(mu, nu) > delta + 1e-12) return {false, "perturbed measure is not delta-close"};
        const int trials = 60;
        int64_t failures = 0;
        for (int t = 0; t < trials; ++t) {
          const PPPCoupling c = couple_ppp(mu, nu, T, delta, {7, static_cast<uint64_t>(++runs)});
          if (!c.success) {
            ++failures;
            continue;
          }
          ++successes;
          bool same = c.first_counts == c.second_counts && c.first.size() == c.second.size();
          for (size_t i = 0; same && i < c.first.size(); ++i)
            same = c.first.points[i].t == c.second.points[i].t && c.first.points[i].sign == c.second.points[i].sign;
          mismatched += !same;
        }
        const double rate = static_cast<double>(failures) / trials;
        const double bound = 12 * (T + M) * std::pow(delta, 1.0 / 20);
        worst = std::max(worst, rate / bound);
        bound_ok = bound_ok && rate <= bound;
      }
  return {bound_ok && mismatched == 0,
          std::to_string(runs) + " couplings over 18 (delta, T, M) cells, " + std::to_string(successes) +
              " successes, " + std::to_string(mismatched) + " mismatched; max failure rate / bound " +
              fmt("%.3f", worst)};
}

Verdict stability() {
  const double eta = 1.0 / 128;
  const StabilityProfile s =
      stability_profile(eta, alpha4().at(eta), {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}, 1.0, 3, 200, {8, 1}, 1, 16);
  std::string pts;
  for (const auto& p : s.points) pts += fmt(" %.3f", p.disagreement.value);
  const bool monotone = s.worst_reversal() <= 1.96;
  return {monotone && std::abs(s.fit.slope - 0.75) <= 0.3,
          "frequencies (eps 1/8..1/64)" + pts + ", worst reversal " + fmt("%.2f", s.worst_reversal()) +
              " SE, slope " + fmt("%.4f", s.fit.slope) + " CI " + ci(s.fit) + " with " + std::to_string(s.quads) +
              " quads, target 0.75 +- 0.3"};
}

Verdict correlation() {
  const double eta = 1.0 / 32;
  const CorrelationReport c =
      correlation_length({0.5, 1, 2, 4}, eta, alpha4().at(eta), 0.01, 2 * eta, 20, 400, {9, 1}, 1);
  bool censored = false;
  std::string ls;
  for (const auto& l : c.lengths) {
    censored = censored || l.censored;
    ls += fmt(" %.3f", l.L);
  }
  return {!censored && std::abs(c.fit.slope + 4.0 / 3) <= 0.2,
          "L =" + ls + ", slope " + fmt("%.4f", c.fit.slope) + ", target -1.333 +- 0.2"};
}

Verdict square_bias_check() {
  const double eta = 1.0 / 256;
  const SquareBias b =
      square_bias(eta, alpha4().at(eta), 1.0, {1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2}, 10000, {10, 1}, 1);
  return {std::abs(b.fit.slope - 0.75) <= 0.2 && b.coefficient() > 0,
          "exponent " + fmt("%.4f", b.fit.slope) + " CI " + ci(b.fit) + ", coefficient " +
              fmt("%.4f", b.coefficient()) + ", target 0.75 +- 0.2"};
}

Verdict noise() {
  const double eta = 1.0 / 64;
  const NoiseCurve c = noise_covariance(eta, alpha4().at(eta), Quad::rectangle({0, 0, 1, 1}),
                                        {0, 0.5, 1, 2, 4, 8, 16}, 20000, {11, 1}, 1, 1, 16);
  return {std::abs(-c.fit.slope - 2.0 / 3) <= 0.2,
          "decay exponent " + fmt("%.4f", -c.fit.slope) + " slope CI " + ci(c.fit) +
              " over t in [1, 16], target 0.667 +- 0.2"};
}

Verdict gradient() {
  const FrontWidth f = front_width({64, 128, 256, 512}, 400, {12, 1}, 1);
  return {std::abs(f.fit.slope - 4.0 / 7) <= 0.08,
          "exponent " + fmt("%.4f", f.fit.slope) + " CI " + ci(f.fit) + ", target 0.571 +- 0.08"};
}

Verdict loewner() {
  const DriftEnsemble e = drift_ensemble(0, 0, 100, 200, 0, 16, 1600, {13, 1}, 1);
  const bool ids = ExponentPair{3, 4, 4}.quadratic_identity() && ExponentPair{3, 4, 4}.linear_identity() &&
                   ExponentPair{7, 0, 4}.quadratic_identity() && ExponentPair{7, 0, 4}.linear_identity();
  return {std::abs(e.variance_slope - 6) <= 0.9 && ids,
          "E[W_t^2]/t slope " + fmt("%.4f", e.variance_slope) + " (" + std::to_string(e.censored) +
              " censored of 1600), exponent-pair identities " + (ids ? "exact" : "violated") + ", target 6 +- 0.9"};
}

Verdict exhaustive() {
  int64_t checks = 0, mismatches = 0;
  auto g = build_grid({0, 0, 3, 2.6}, 1.0);
  const int32_t n = g->size();
  if (n > 20) return {false, "instance too large"};
  const std::vector<Quad> quads{Quad::rectangle({0, 0, 3, 2.6}, true), Quad::rectangle({0, 0, 3, 2.6}, false),
                                Quad::rectangle({0.4, 0.2, 2.6, 2.2}, true),
                                Quad({{0, 0}, {3, 0}, {3, 1}, {1, 1}, {1, 2}, {0, 2}}, {0, 1, 3, 5}, 0)};
  std::vector<CrossingEvaluator> evs;
  for (const Quad& q : quads) evs.emplace_back(g, q);
  for (uint64_t mask = 0; mask < (1ull << n); ++mask) {
    const auto st = oracle::bits_of(mask, n);
    const SiteConfig c(g, st);
    for (size_t k = 0; k < quads.size(); ++k) {
      mismatches += evs[k].open_crossing(c) != oracle::crosses(*g, quads[k], st);
      ++checks;
    }
    for (int32_t s = 0; s < n; ++s) {
      mismatches += std::abs(importance(c, s) - oracle::importance(*g, s, st)) > 1e-12;
      ++checks;
    }
    for (double eps : {1.2, 1.7}) {
      auto got = epsilon_important(c, eps).sites;
      std::sort(got.begin(), got.end());
      mismatches += got != oracle::eps_important(*g, eps, st);
      ++checks;
    }
  }
  auto ga = build_grid({-1.6, -1.8, 1.6, 1.8}, 1.0);
  const Annulus ann({0, 0}, 0.5, 1.5);
  const ArmRegion region = annulus_region(ga, ann, false);
  const auto inner = annulus_inner_sites(*ga, ann);
  const double tol = ga->tolerance();
  const auto ref =
      oracle::make_region(*ga, inner, [&](Point p) { return Rect::square({0, 0}, 1.5).contains(p, tol); });
  std::vector<int32_t> free;
  for (int32_t s = 0; s < ga->size(); ++s)
    if (ref.member[s]) free.push_back(s);
  if (free.size() > 20) return {false, "annulus instance too large"};
  std::vector<uint8_t> st(ga->size(), 0);
  for (uint64_t mask = 0; mask < (1ull << free.size()); ++mask) {
    for (size_t k = 0; k < free.size(); ++k) st[free[k]] = (mask >> k) & 1u;
    const SiteConfig c(ga, st);
    const int o = oracle::max_disjoint(oracle::all_paths(*ga, ref, st, true), 6);
    const int k = oracle::max_disjoint(oracle::all_paths(*ga, ref, st, false), 6);
    for (int j = 1; j <= 3; ++j) {
      mismatches += arm_event(c, region, ArmPattern::monochromatic(j)) != (o >= j);
      mismatches += arm_event(c, region, ArmPattern::monochromatic(j, false)) != (k >= j);
    }
    mismatches += arm_event(c, region, ArmPattern::alternating(2)) != (o >= 1 && k >= 1);
    mismatches += arm_event(c, region, ArmPattern::alternating(4)) != oracle::four_arms_single(*ga, ref, st);
    checks += 8;
  }
  return {mismatches == 0, std::to_string(checks) + " comparisons on all configurations of " + std::to_string(n) +
                               "- and " + std::to_string(free.size()) + "-site instances, " +
                               std::to_string(mismatches) + " mismatches"};
}

Verdict invariants() {
  auto g = build_grid({0, 0, 1, 1}, 1.0 / 16);
  const std::vector<Quad> quads{Quad::rectangle({0, 0, 1, 1}),
                                Quad({{0.1, 0.1}, {0.9, 0.1}, {0.9, 0.5}, {0.5, 0.5}, {0.5, 0.9}, {0.1, 0.9}},
                                     {0, 1, 3, 5})};
  const RateSpec rate = RateSpec::make(1.0 / 16, 1.0 / 256);
  int64_t bad = 0;
  const int64_t instances = 10000;
  for (int64_t k = 0; k < instances; ++k) {
    const uint64_t id = static_cast<uint64_t>(k);
    const MonotoneLabels labels = sample_labels(g, {15, 2 * id});
    Rng rng({15, 2 * id + 1});
    double p1 = rng.uniform(), p2 = rng.uniform();
    if (p1 > p2) std::swap(p1, p2);
    const SiteConfig lo = threshold(labels, p1), hi = threshold(labels, p2);
    bool ok = true;
    for (int32_t s = 0; s < g->size(); ++s) ok = ok && (!lo.open(s) || hi.open(s));
    for (const Quad& q : quads) {
      ok = ok && (crosses(lo, q) != dual_crosses(lo, q));
      ok = ok && (!crosses(lo, q) || crosses(hi, q));
    }
    const SiteConfig init = threshold(labels, 0.5);
    const PivotalSet piv = epsilon_important(init, 0.25);
    std::vector<uint8_t> member(g->size(), 0);
    for (int32_t s : piv.sites) member[s] = 1;
    const Trajectory cut = run_cutoff(init, 0.25, 1.0, rate, {15, 1000000 + id});
    for (const FlipEvent& e : cut.events()) ok = ok && member[e.site];
    bad += !ok;
  }
  return {bad == 0, std::to_string(instances - bad) + "/" + std::to_string(instances) +
                        " instances satisfy ordering, duality and cut-off support"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"critical square-crossing symmetry", crossing_symmetry},
      {"one-arm exponent", one_arm},
      {"four-arm exponent", four_arm},
      {"pivotal first moment", first_moment},
      {"pivotal second moment", second_moment},
      {"network oracle equivalence", network_oracle},
      {"PPP coupling", ppp_coupling},
      {"cut-off stability", stability},
      {"correlation-length exponent", correlation},
      {"near-critical square bias", square_bias_check},
      {"noise-sensitivity decay", noise},
      {"gradient front width", gradient},
      {"Loewner sanity", loewner},
      {"exhaustive-oracle parity", exhaustive},
      {"coupling and cut-off invariants", invariants},
  };
  std::set<int> only;
  for (int a = 1; a < argc; ++a) only.insert(std::atoi(argv[a]));
  int failed = 0;
  for (size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const Verdict v = criteria[k].second();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::printf("%s %2d %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(), v.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
