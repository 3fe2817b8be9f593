#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nearcrit/geometry.hpp"
#include "nearcrit/lattice.hpp"

namespace nearcrit {

struct PivotalSet {
  GridPtr grid;
  double eps = 0;
  std::vector<int32_t> sites;
  std::vector<std::pair<int64_t, int64_t>> square;  // (a,b): site lies in [a*eps,(a+1)*eps) x [b*eps,(b+1)*eps)
  size_t size() const { return sites.size(); }
};

// For every eps-square of the grid eps*Z^2 the concentric square of side 3*eps is
// formed; a site of the eps-square is a member when four alternating arms run from
// it to the boundary of that square. Grid edges are walls. When `within` is given,
// only eps-squares meeting it are examined and only sites inside it are reported.
PivotalSet epsilon_important(const SiteConfig& config, double eps, const std::optional<Rect>& within = std::nullopt);

// Sites x with four alternating arms from x to the boundary of the Euclidean ball
// of radius s around x.
std::vector<int32_t> ball_important(const SiteConfig& config, double s, const std::optional<Rect>& within = std::nullopt);

// Finite atomic measure on the plane.
struct AtomicMeasure {
  std::vector<Point> atoms;
  std::vector<double> weights;

  size_t size() const { return atoms.size(); }
  double total() const;
  double mass_in(const Rect& r) const;
};

struct PivotalMeasure : AtomicMeasure {
  PivotalSet set;
  double eta = 0;
  double alpha4 = 0;
  double weight = 0;  // eta^2 / alpha4
};

PivotalMeasure pivotal_measure(const PivotalSet& set, double eta, double alpha4);

std::string pivotal_set_to_json(const PivotalSet& set);

}  // namespace nearcrit
