#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nearcrit/geometry.hpp"
#include "nearcrit/lattice.hpp"
#include "nearcrit/quad.hpp"
#include "nearcrit/rng.hpp"

namespace nearcrit {

// Vertices 0..p-1 are the marked points; p+k is the boundary vertex of arc k
// (k = 0..3, so p is the first boundary vertex and p+2 the third).
struct Network {
  double r = 0;
  std::vector<Point> points;
  std::vector<int32_t> sites;  // lattice site carrying each point
  bool gated = false;          // r >= r_star: edge structure empty by convention
  std::vector<std::pair<int, int>> primal;  // sorted pairs a < b, no repeats
  std::vector<std::pair<int, int>> dual;

  int p() const { return static_cast<int>(points.size()); }
  int boundary(int arc) const { return p() + arc; }
  bool has_primal(int a, int b) const;
  bool has_dual(int a, int b) const;
  bool same_edges(const Network& o) const { return primal == o.primal && dual == o.dual; }
  // Throws InvalidParameter when the structural constraints fail.
  void validate() const;
};

// min(min pairwise distance, min distance to the quad boundary) / 10; +inf for empty X.
double r_star(const std::vector<Point>& X, const Quad& quad);

bool is_dyadic(double r);

// r-square centered on the r/2-cell of the grid (r/2)Z^2 containing x, as the
// half-open rectangle [x0, x1) x [y0, y1).
Rect box_square(Point x, double r);

// Mesoscopic network at scale r. Points are carried by their nearest sites;
// the box of x_i is the set of quad sites with center in box_square(x_i, r).
// An open path of sites outside every box joining two boxes gives a primal edge,
// a closed one a dual edge; boundary edges come from sites touching the arcs.
// Throws InvalidParameter for non-dyadic r or points outside the quad.
Network extract_network(const SiteConfig& config, const Quad& quad, const std::vector<Point>& X, double r);

// f_N(phi): true when an open primal path joins the boundary vertices of arcs 0
// and 2 and no closed dual path joins those of arcs 1 and 3, false in the mirrored
// case, nullopt when the assignment violates the Boolean dichotomy.
std::optional<bool> evaluate(const Network& net, const std::vector<uint8_t>& phi);

// Exhaustive over all 2^p assignments; CapabilityError for p > 20.
bool is_boolean(const Network& net);
// A primal path between the boundary vertices of arcs 0 and 2 or a dual path between those of arcs 1 and 3.
bool is_connected(const Network& net);

struct StabilizationReport {
  double scale = 0;  // largest tested r after which the network no longer changes
  std::vector<double> r;
  std::vector<Network> networks;
  std::vector<uint8_t> changed;  // changed[k]: networks at r[k] and r[k+1] differ
};

StabilizationReport stabilization_scale(const SiteConfig& config, const std::vector<Point>& X, const Quad& quad,
                                        const std::vector<double>& r_list);

struct OracleReport {
  bool skipped = false;  // r >= r_star
  bool boolean = false;
  int64_t trials = 0;
  int64_t agree = 0;
  double rate() const { return trials > 0 ? static_cast<double>(agree) / trials : 1.0; }
};

// Compares evaluate(N, phi) with a direct crossing computation on the
// configuration whose point sites are set to phi. All assignments are tried
// when 2^p <= trials, otherwise `trials` random ones.
OracleReport network_oracle_test(const SiteConfig& config, const Quad& quad, const std::vector<Point>& X, double r,
                                 int64_t trials, const RngSpec& rng);

std::string network_to_json(const Network& net);
std::string network_to_dot(const Network& net);

}  // namespace nearcrit
