#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nearcrit/geometry.hpp"
#include "nearcrit/pivotal.hpp"
#include "nearcrit/quad.hpp"
#include "nearcrit/rng.hpp"

namespace nearcrit {

struct MarkedPoint {
  Point x;
  double t = 0;
  int sign = 1;      // +1 or -1
  int32_t atom = -1; // index of the atom of the intensity measure
};

struct MarkedPPP {
  double horizon = 0;
  std::vector<MarkedPoint> points;  // sorted by time

  size_t size() const { return points.size(); }
  size_t count(int sign) const;
};

// Each atom of weight w receives Poisson(T w / 2) points of each sign with
// independent uniform times on [0, T].
MarkedPPP sample_ppp(const AtomicMeasure& measure, double T, const RngSpec& rng);

struct PPPReport {
  size_t count = 0;
  double min_pair_distance = 0;      // +inf with fewer than two points
  double min_time_gap = 0;           // +inf with fewer than two points
  double min_boundary_distance = 0;  // +inf with no points
  bool coincident = false;           // two points share a location
};

PPPReport ppp_properties(const MarkedPPP& ppp, const Quad& quad);

struct PPPCoupling {
  MarkedPPP first;
  MarkedPPP second;
  bool success = false;
  double cell = 0;                       // side of the grid squares
  std::vector<int64_t> first_counts;     // per cell, row-major over [0,1]^2
  std::vector<int64_t> second_counts;
};

// Dyadic cell side used by the coupling: the smallest 2^-k >= (4 delta)^(1/20).
double coupling_cell(double delta);

// Cell-wise coupling of PPP_T(mu) and PPP_T(nu) on [0,1]^2. Counts X_i ~
// Poisson(T mu_i); Y_i is a Binomial(X_i, nu_i/mu_i) thinning when nu_i < mu_i
// and X_i plus independent Poisson(T (nu_i - mu_i)) otherwise. Matched points
// share times and signs; locations are drawn from each measure within the cell.
// success means X_i = Y_i in every cell.
PPPCoupling couple_ppp(const AtomicMeasure& mu, const AtomicMeasure& nu, double T, double delta, const RngSpec& rng);

// Prohorov distance inf{e > 0 : mu(A) <= nu(A^e) + e and nu(A) <= mu(A^e) + e
// for all closed A}, A^e the open e-neighborhood, computed exactly for atomic
// measures through bipartite max-flow.
double prohorov_distance(const AtomicMeasure& mu, const AtomicMeasure& nu);

std::string ppp_to_json(const MarkedPPP& ppp);
std::string coupling_csv_header();
std::string coupling_csv_row(double delta, double T, double M, int64_t trials, int64_t failures, double bound);

}  // namespace nearcrit
