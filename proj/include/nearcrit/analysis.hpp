#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nearcrit/arms.hpp"
#include "nearcrit/geometry.hpp"
#include "nearcrit/lattice.hpp"
#include "nearcrit/quad.hpp"
#include "nearcrit/rng.hpp"

namespace nearcrit {

// Worker count used when a call passes threads = 0; defaults to the hardware count.
void set_default_threads(int threads);
int default_threads();

// Runs fn(0..n-1) on `threads` workers (0 = default). Work items must write to
// disjoint outputs; the caller reduces in index order, so results do not depend
// on the worker count.
void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn);

// Weighted least squares of log y on log x. Points with y <= 0 are dropped.
struct ExponentFit {
  std::vector<double> x, y, weights;
  double slope = 0;
  double intercept = 0;
  double slope_se = 0;
  std::vector<double> residuals;  // log y - fitted, per kept point
  double ci_low = 0;              // 95% interval for the slope
  double ci_high = 0;
  int resamples = 0;  // bootstrap resamples behind the interval; 0 = normal approximation
  bool valid = false;
  double predict(double at) const;
};

ExponentFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& weights = {});

// Fit of binomial estimates with weights n p / (1 - p); the interval comes from
// redrawing every point as Binomial(n_i, p_i) / n_i.
ExponentFit binomial_fit(const std::vector<double>& x, const std::vector<Estimate>& est, int resamples,
                         const RngSpec& rng);

// Fit of replica means (replicas[i] holds the observations at x[i]); the interval
// comes from resampling replicas within each point.
ExponentFit replica_fit(const std::vector<double>& x, const std::vector<std::vector<double>>& replicas,
                        int resamples, const RngSpec& rng, bool weighted = true);

std::string fit_to_json(const ExponentFit& fit);

// Mean and standard error of a sample.
struct MeanEstimate {
  double mean = 0;
  double se = 0;
  int64_t samples = 0;
};
MeanEstimate mean_estimate(const std::vector<double>& values);

// ---------------------------------------------------------------------------
// Arm probabilities

struct ArmProfile {
  ArmPattern pattern;
  double eta = 0;
  double r = 0;
  std::vector<double> R;
  std::vector<Estimate> estimates;
  ExponentFit fit;  // probability against R / r
  double exponent() const { return -fit.slope; }
};

// Arm probabilities from half-side r to every R of the sorted list at mesh eta,
// open probability p. All radii share one sample per replica: the events are
// nested in R, so each replica is examined outward until the first failure.
ArmProfile arm_profile(double eta, double r, const std::vector<double>& R_list, const ArmPattern& pattern,
                       int64_t samples, const RngSpec& rng, int threads = 0, double p = 0.5);

// Table of alpha4(eta, 1) estimates: four alternating arms from a site to
// distance 1 at mesh eta, i.e. to n = 1/eta lattice units.
struct Alpha4Table {
  std::vector<double> n;  // lattice radii
  std::vector<Estimate> estimates;
  ExponentFit fit;
  int64_t samples = 0;
  uint64_t seed = 0;

  // Estimate at mesh eta: tabulated value when 1/eta is listed, else the fitted power law.
  double at(double eta) const;
  // Four-arm probability from a site to R lattice units (power-law interpolation).
  double lattice(double R) const;
};

Alpha4Table estimate_alpha4(const std::vector<double>& n_list, int64_t samples, const RngSpec& rng,
                            int threads = 0);
std::string alpha4_to_json(const Alpha4Table& table);
Alpha4Table alpha4_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Crossing probabilities

// Bottleneck value of a crossing under label coupling: the smallest u such that
// sites with label <= u contain a path from arc a to arc b of the region.
// Labels are drawn lazily from `rng` (in exploration order) unless given.
double crossing_threshold(const QuadRegion& region, Rng& rng, int a = 0, int b = 2);
double crossing_threshold(const QuadRegion& region, const std::vector<double>& labels, int a = 0, int b = 2);

Estimate crossing_probability(double eta, const Quad& quad, double p, int64_t samples, const RngSpec& rng,
                              int threads = 0);

// Per-replica bottleneck values for a quad at mesh eta; the crossing
// probability at p is the fraction of values <= p.
std::vector<double> crossing_thresholds(double eta, const Quad& quad, int64_t samples, const RngSpec& rng,
                                        int threads = 0);

// ---------------------------------------------------------------------------
// Near-critical experiments. The near-critical rate is r(eta) = eta^2 / alpha4.

struct CorrelationLength {
  double lambda = 0;
  double L = 0;           // interpolated crossing scale
  bool censored = false;  // threshold not reached on the search grid
  std::vector<double> r;  // search grid
  std::vector<double> probability;
};

struct CorrelationReport {
  double eta = 0;
  double alpha4 = 0;
  double threshold = 0;
  std::vector<CorrelationLength> lengths;
  ExponentFit fit;  // L against lambda
};

// Smallest r with P[the near-critical configuration crosses [0,2r] x [0,r]
// lengthwise] > 1 - eps_threshold. Searched on a quarter-octave dyadic grid
// r = r_min 2^(j/4) <= r_max, then log-linearly interpolated between the last
// grid point below and the first above. One set of replicas serves every lambda.
CorrelationReport correlation_length(const std::vector<double>& lambdas, double eta, double alpha4,
                                     double eps_threshold, double r_min, double r_max, int64_t samples,
                                     const RngSpec& rng, int threads = 0);

// Kesten's scale inf{R : R^2 alpha4(R) >= 1/|p - 1/2|} in lattice units.
double kesten_length(double p, const Alpha4Table& table);

struct SquareBias {
  double eta = 0;
  double lambda = 0;
  std::vector<double> u;
  std::vector<MeanEstimate> bias;  // (P_p[cross] - P_(1-p)[cross]) / 2
  ExponentFit fit;                 // bias against u
  double coefficient() const { return std::exp(fit.intercept); }
};

// Bias of the crossing of a u-square above 1/2 at parameter lambda. The
// symmetrized difference cancels the lattice asymmetry of the critical value,
// and label coupling makes both terms share replicas.
SquareBias square_bias(double eta, double alpha4, double lambda, const std::vector<double>& u_list,
                       int64_t samples, const RngSpec& rng, int threads = 0);

struct SingularityStat {
  int n = 0;
  int64_t crossed = 0;
  double statistic = 0;  // (crossed - n^2/2) / n^(5/4)
};

// Left-right crossings of the n x n subsquares of side 1/n of the unit square
// [0,1]^2, which must lie in the grid domain.
SingularityStat singularity_statistic(const SiteConfig& config, int n);

struct SingularityTest {
  int n = 0;
  MeanEstimate critical;
  MeanEstimate perturbed;
  double z = 0;  // difference of means in combined standard errors
};

SingularityTest singularity_test(double eta, double alpha4, double lambda, int n, int64_t samples,
                                 const RngSpec& rng, int threads = 0);

struct ScalingCheck {
  Estimate scaled;    // lambda' = alpha^(-3/4) lambda on alpha Q
  Estimate original;  // lambda on Q
  double difference = 0;
  double z = 0;
};

// Compares P[omega(alpha^(-3/4) lambda) crosses alpha Q] with P[omega(lambda) crosses Q]
// at a common mesh; rates use alpha4 = alpha4(eta, 1).
ScalingCheck scaling_covariance_check(double eta, double alpha4, const Quad& quad, double alpha, double lambda,
                                      int64_t samples, const RngSpec& rng, int threads = 0);

// ---------------------------------------------------------------------------
// Pivotal measure moments on the unit square [0,1]^2 at mesh eta

struct PivotalMoments {
  std::vector<double> scale;  // eps for the first moment, r for the second
  std::vector<MeanEstimate> moment;
  ExponentFit fit;
};

// E[mu^eps([0,1]^2)] for every eps of the list; the grid extends eps_max beyond
// the square so that no 3eps box is clipped.
PivotalMoments pivotal_first_moment(double eta, double alpha4, const std::vector<double>& eps_list,
                                    int64_t samples, const RngSpec& rng, int threads = 0);

// E[mu^eps(S_r)^2] for the squares S_r = [0,r)^2, r <= eps, inside the eps-square
// [0,eps)^2; the grid covers its 3eps box [-eps, 2eps]^2.
PivotalMoments pivotal_second_moment(double eta, double alpha4, double eps, const std::vector<double>& r_list,
                                     int64_t samples, const RngSpec& rng, int threads = 0);

// ---------------------------------------------------------------------------
// Dynamical experiments

struct NoiseCurve {
  double eta = 0;
  double rate = 0;
  std::vector<double> t;
  std::vector<MeanEstimate> covariance;  // Cov[f(omega(0)), f(omega(t))]
  double probability = 0;                // P[f = 1]
  ExponentFit fit;                       // covariance against t over the listed fit range
};

// Paired sampling: every site keeps its state until an Exp(rate) time and is
// then redrawn, which is the law of the dynamics observed at two times.
// `fit_from` / `fit_to` select the t range of the fit (inclusive).
NoiseCurve noise_covariance(double eta, double alpha4, const Quad& quad, const std::vector<double>& t_list,
                            int64_t samples, const RngSpec& rng, int threads = 0, double fit_from = 0,
                            double fit_to = 1e300);

struct StabilityPoint {
  double eps = 0;
  Estimate disagreement;
  double mean_important = 0;  // mean size of the frozen eps-important set
};

struct StabilityProfile {
  double eta = 0;
  double T = 0;
  int level = 0;
  int64_t quads = 0;
  std::vector<StabilityPoint> points;
  ExponentFit fit;  // disagreement against eps
  // Largest upward step between consecutive eps (sorted ascending) measured in
  // combined standard errors; monotone within CI when this is small.
  double worst_reversal() const;
};

// Fraction of shared-clock (full, cut-off) trajectory pairs on the unit square
// that disagree on some crossing of the level-k quad family at some t in [0, T].
StabilityProfile stability_profile(double eta, double alpha4, const std::vector<double>& eps_list, double T,
                                   int k, int64_t trials, const RngSpec& rng, int threads = 0,
                                   int64_t budget = 512);

struct ExceptionalMoments {
  double eta = 0;
  double rate = 0;
  std::vector<double> R;
  std::vector<MeanEstimate> first;   // E[X_R]
  std::vector<MeanEstimate> second;  // E[X_R^2]
  std::vector<Estimate> one_arm;     // P[f_R(omega(0))]
  std::vector<double> ratio() const;  // E[X^2] / E[X]^2
};

// X_R = integral over [0, 1] of the indicator that an open path joins the box
// [-1,1]^2 to sup-distance R > 1, under the dynamics at rate
// `rate_scale` * eta^2 / alpha4.
ExceptionalMoments exceptional_moments(double eta, double alpha4, const std::vector<double>& R_list,
                                       int64_t samples, const RngSpec& rng, int threads = 0,
                                       double rate_scale = 1);

// ---------------------------------------------------------------------------
// Gradient percolation

struct FrontWidth {
  std::vector<double> n;
  std::vector<MeanEstimate> width;  // lattice units
  ExponentFit fit;
};

// Gradient model on [0,1] x [-h,h] at mesh 1/n with p = 1/2 + y; the width is the
// RMS height of the front hull in lattice units, averaged over replicas.
FrontWidth front_width(const std::vector<double>& n_list, int64_t samples, const RngSpec& rng, int threads = 0,
                       double h = 0.25);

// RMS of y over hull sites, in units of the mesh.
double hull_width(const SiteConfig& config, const std::vector<int32_t>& hull);

}  // namespace nearcrit
