#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "nearcrit/geometry.hpp"
#include "nearcrit/lattice.hpp"
#include "nearcrit/rng.hpp"

namespace nearcrit {

// Exploration path on the hexagonal dual with open sites on its left and closed
// sites on its right. Lattice points of rows j <= 0 form the boundary: open when
// i < 0, closed otherwise, so the path starts at (-eta/2, 0). Points of rows
// j >= 1 take their state from the configuration; outside the grid they are open
// left of the root and closed right of it, except above the domain top, where
// the path stops. Vertices are the centers of the triangles it crosses.
struct Interface {
  std::vector<Point> path;
  bool reached_top = false;  // false: stopped by the step limit
};

Interface trace_interface(const SiteConfig& config, int64_t max_steps = 50'000'000);

// Discrete Loewner chain of a curve in the upper half-plane by the vertical
// slit zipper. Step k maps the next curve point w_k = a_k + i b_k (in the image
// of the previous maps) by g(z) = a_k + sqrt((z - a_k)^2 + b_k^2), so the
// driving value on (t_{k-1}, t_k] is a_k and t_k - t_{k-1} = b_k^2 / 4.
struct DrivingFunction {
  std::vector<double> t;       // t[0] = 0, strictly increasing
  std::vector<double> W;       // W[0] = 0; W[k] = a_k
  std::vector<Point> gamma;    // source curve, translated so that gamma[0] = 0
  std::vector<int64_t> tip;    // index in gamma of the point absorbed at step k (tip[0] = 0)
  bool truncated = false;
  std::string warning;

  // Step index in effect at time s (last k with t[k] <= s).
  size_t index_at(double s) const;
  double value_at(double s) const { return W[index_at(s)]; }
  Point tip_at(double s) const { return gamma[tip[index_at(s)]]; }
};

// Curve points are absorbed in order; with step > 0 a point is absorbed only once
// its capacity increment reaches `step` (later points are skipped until then).
// The chain stops at capacity t_max, or with a warning when a curve point lies on
// the real line or is mapped onto it.
DrivingFunction loewner_drive(const std::vector<Point>& gamma, double step, double t_max = 1e300);

// Tips z_k = h_1(h_2(...h_(k-1)(a_k + i b_k))) rebuilt from the driving data
// with the inverse slit maps h(z) = a + sqrt((z - a)^2 - b^2).
std::vector<Point> loewner_trace(const DrivingFunction& drive);

// Sum over consecutive partition times of |gamma(t_{i+1}) - gamma(t_i)|^d1 |W(t_{i+1}) - W(t_i)|^d2,
// reading gamma and W at the step in effect.
double drift_sum(const DrivingFunction& drive, const std::vector<double>& partition, double d1, double d2);

// Exponent pair (d1, d2) = (n1 / den, n2 / den) checked in exact integer arithmetic.
struct ExponentPair {
  int64_t n1 = 0, n2 = 0, den = 1;
  // 14 + (2 d1 + d2)^2 = 15 d1 + 9 d2
  bool quadratic_identity() const;
  // d1 + d2 = 7/4
  bool linear_identity() const;
};

double hausdorff_distance(const std::vector<Point>& a, const std::vector<Point>& b);

struct DriftEnsemble {
  double lambda = 0;
  int64_t samples = 0;
  int64_t censored = 0;            // chains that stopped before t_max
  std::vector<double> t;           // time grid
  std::vector<double> second;      // E[W(t)^2]
  double variance_slope = 0;       // E[W(t)^2] ~ slope * t through the origin
  double quadratic_variation = 0;  // mean sum of squared grid increments / t_max
  double drift = 0;                // least squares d in W(t_max) ~ d * A(t_max)
  double drift_se = 0;
  double mean_W = 0;
  double mean_A = 0;
  double excess_kurtosis = 0;  // of normalized grid increments
  std::vector<double> refinement;  // mean (3/4, 1) drift sums at dyadic partition levels
};

struct DriftReport {
  DriftEnsemble perturbed;
  DriftEnsemble control;  // lambda = 0
  double c_hat = 0;       // perturbed drift / lambda
};

// Interfaces in the box [-L, L] x [0, L] (lattice units, mesh 1) at
// p = nearcritical_p(lambda, rate). Diagnostics only: the drift is the (3/4, 1)
// sum A(t), and the fitted coefficient compares W(t_max) against lambda A(t_max).
DriftEnsemble drift_ensemble(double lambda, double rate, double L, double t_max, double step, int grid_points,
                             int64_t samples, const RngSpec& rng, int threads = 0);

DriftReport drift_conjecture_test(double lambda, double rate, double L, double t_max, double step, int grid_points,
                                  int64_t samples, const RngSpec& rng, int threads = 0);

}  // namespace nearcrit
