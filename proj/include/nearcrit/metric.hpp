#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nearcrit/dynamics.hpp"
#include "nearcrit/geometry.hpp"
#include "nearcrit/lattice.hpp"
#include "nearcrit/quad.hpp"

namespace nearcrit {

// Quads of QUAD^k: axis-parallel rectangles with both markings and L-shaped
// hexagons (a rectangle minus a corner notch, two markings each), all with
// vertices on 2^-k Z^2 inside the domain. Quads are grouped by the coarsest
// level on which they live, so QUAD^k is a prefix of QUAD^(k+1). A level block
// that does not fit the remaining budget is thinned by an even stride.
struct QuadFamily {
  int level = 0;
  Rect domain;
  int64_t budget = 0;
  int64_t full_size = 0;  // size without the budget
  bool truncated = false;
  double relax = 0;        // 2^(-k-10): radius of the inner perturbation
  std::vector<Quad> quads;
  std::vector<Quad> outer;  // outer enlargement per quad
};

QuadFamily enumerate_quads(int k, const Rect& domain, int64_t budget = 4096);

// Arcs 0 and 2 pushed outward and arcs 1 and 3 pushed inward by delta, edges
// kept inside `domain`; every crossing of the result contains one of q.
// Requires an axis-parallel polygon.
Quad outer_quad(const Quad& q, double delta, const Rect& domain);

// Per quad: crossed, outer enlargement crossed, and r-almost crossed with r = relax
// (an open path within distance r of the quad that comes within r of arcs 0 and 2).
// The outer crossing is evaluated on the sites common to both discretizations with
// arc contacts present in both, so it always implies the plain crossing.
struct CrossingSignature {
  int level = 0;
  std::vector<uint8_t> crossed;
  std::vector<uint8_t> outer;
  std::vector<uint8_t> almost;
  bool operator==(const CrossingSignature& o) const {
    return level == o.level && crossed == o.crossed && outer == o.outer && almost == o.almost;
  }
};

// Precomputed lattice regions of a family; memory is O(|family| * sites).
class SignatureEvaluator {
 public:
  SignatureEvaluator(const GridPtr& grid, const QuadFamily& family);
  CrossingSignature operator()(const SiteConfig& config) const;
  const GridPtr& grid() const { return grid_; }
  int level() const { return level_; }

 private:
  GridPtr grid_;
  int level_;
  std::vector<CrossingEvaluator> inner_, outer_, almost_;
};

// omega' lies in O_k(omega): every quad not crossed by omega has its outer
// enlargement uncrossed by omega', and every quad crossed by omega is r-almost
// crossed by omega'.
bool in_neighborhood(const CrossingSignature& omega, const CrossingSignature& omega_prime);

// Largest k <= k_max with omega' in O_k(omega) or omega in O_k(omega');
// signatures are given per level 1..k_max.
int k_agreement(const std::vector<CrossingSignature>& a, const std::vector<CrossingSignature>& b);
int k_agreement(const SiteConfig& a, const SiteConfig& b, const std::vector<SignatureEvaluator>& levels);

// Surrogate configuration distance 2^-K, taken as 0 when K reaches k_max.
double surrogate_distance(int K, int k_max);

struct SkorohodResult {
  double distance = 0;
  bool exact_search = false;  // false: only the identity time change was tried
  int anchors_first = 0;
  int anchors_second = 0;
};

// Skorohod distance with the surrogate metric in place of d_H. Time changes are
// piecewise linear with knots at matched jump times (jumps of the crossing
// signatures); all monotone matchings are searched by dynamic programming when
// the anchor counts are at most reparam_budget, otherwise the identity is used.
// The value is an upper bound on the surrogate distance.
SkorohodResult trajectory_distance(const Trajectory& a, const Trajectory& b,
                                   const std::vector<SignatureEvaluator>& levels, int reparam_budget = 40);

// Same search on abstract piecewise-constant paths: states[i] holds on
// [times[i], times[i+1]) with times[0] = start and a final time `end`.
// dist(i, j) is the distance between state i of the first and state j of the second.
double skorohod_search(const std::vector<double>& ta, const std::vector<double>& tb, double end,
                       const std::vector<std::vector<double>>& dist);

std::string family_to_json(const QuadFamily& family);
std::string signature_csv(const CrossingSignature& sig);

}  // namespace nearcrit
