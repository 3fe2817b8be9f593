#pragma once

#include <cmath>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nearcrit/geometry.hpp"
#include "nearcrit/lattice.hpp"
#include "nearcrit/rng.hpp"
#include "nearcrit/union_find.hpp"

namespace nearcrit {

// Concentric axis-aligned squares with half-sides r < R.
struct Annulus {
  Point center;
  double r = 0;
  double R = 0;
  Annulus(Point c, double inner, double outer);
};

struct ArmPattern {
  // Colors in cyclic order (true = open); for half-plane patterns the order runs
  // from one side of the base line to the other.
  std::vector<bool> colors;
  bool half_plane = false;
  double sector = M_PI;  // opening angle of the boundary sector; only pi is supported

  int count() const { return static_cast<int>(colors.size()); }
  std::string name() const;

  static ArmPattern monochromatic(int j, bool open = true);
  // Alternating open/closed, starting with open.
  static ArmPattern alternating(int j);
  static ArmPattern half_plane_alternating(int j);
};

// How a pattern is decided; patterns outside these families are rejected.
struct ArmPlan {
  enum Kind { kMono, kAlternating, kOneMinority, kHalfAlternating } kind;
  bool color = true;  // mono color, majority color, or end color of a half-plane run
  int need = 0;       // disjoint paths (mono/majority) or crossing clusters
};

ArmPlan plan_for(const ArmPattern& pattern);

// Discrete annulus: region sites, arm start sites (adjacent to the inner set)
// and arm target sites (adjacent to a lattice point outside the outer shape).
// Grid points missing from a clipped grid act as walls. `degenerate` is set when
// the inner set itself touches the exterior; arm events then hold by convention.
class ArmRegion {
 public:
  static constexpr uint8_t kStart = 1;
  static constexpr uint8_t kTarget = 2;

  // Outer shape given by a bounding rectangle and a membership predicate.
  ArmRegion(const GridPtr& grid, const std::vector<int32_t>& inner, const Rect& bounds,
            const std::function<bool(Point)>& inside, bool clip, std::optional<double> base = std::nullopt);

  static ArmRegion square(const GridPtr& grid, const std::vector<int32_t>& inner, const Rect& outer, bool clip,
                          std::optional<double> base = std::nullopt);
  static ArmRegion ball(const GridPtr& grid, int32_t site, double radius, bool clip);

  const GridPtr& grid() const { return grid_; }
  const std::vector<int32_t>& sites() const { return sites_; }
  const std::vector<uint8_t>& flags() const { return flags_; }
  // Local indices of start sites.
  const std::vector<int32_t>& starts() const { return starts_; }
  bool degenerate() const { return degenerate_; }
  // The inner site when the inner set is a single site, else -1.
  int32_t center() const { return center_; }
  // Index of a grid site within the region, or -1.
  int32_t local(int32_t site) const;

 private:
  GridPtr grid_;
  std::vector<int32_t> sites_;
  std::vector<uint8_t> flags_;
  std::vector<int32_t> starts_;
  bool degenerate_ = false;
  int32_t center_ = -1;
  int i0_ = 0, j0_ = 0, wi_ = 0, wj_ = 0;
  std::vector<int32_t> window_;
};

// Inner set of an annulus: sites whose hexagon lies in the closed inner square
// (restricted to y >= base in half-plane mode); the site nearest the center when
// no hexagon fits.
std::vector<int32_t> annulus_inner_sites(const LatticeGrid& grid, const Annulus& annulus,
                                         std::optional<double> base = std::nullopt);

ArmRegion annulus_region(const GridPtr& grid, const Annulus& annulus, bool half_plane, bool clip = false);

using StateFn = std::function<bool(int32_t)>;

// Number of distinct `open`-colored clusters (connectivity inside the region)
// containing both a start and a target site, counted up to `need`.
int crossing_clusters(const ArmRegion& region, const StateFn& state, bool open, int need);
// Number of color changes around the single inner site, reading its six neighbor
// slots in cyclic order and keeping only neighbors whose cluster (either color)
// reaches a target. Alternating arms of length j exist iff this is >= j.
int alternations_around_center(const ArmRegion& region, const StateFn& state);
// Same count from per-slot marks: 1 = open arm start, 2 = closed arm start, 0 = none.
int cyclic_alternations(const std::array<uint8_t, 6>& slots);
// Maximum number of site-disjoint `open`-colored start-to-target paths, up to `need`.
int disjoint_crossings(const ArmRegion& region, const StateFn& state, bool open, int need);

bool arm_event(const ArmRegion& region, const StateFn& state, const ArmPattern& pattern);
bool arm_event(const SiteConfig& config, const ArmRegion& region, const ArmPattern& pattern);
bool arm_event(const SiteConfig& config, const Annulus& annulus, const ArmPattern& pattern);

// Largest R = k*eta (k >= 1) such that four alternating arms run from the site to
// the boundary of the square of half-side R centered at it (grid edges are walls);
// 0 when none.
double importance(const SiteConfig& config, int32_t site);

struct Estimate {
  double value = 0;
  double ci_low = 0;
  double ci_high = 0;
  int64_t successes = 0;
  int64_t samples = 0;
};

// Wilson score interval at the given normal quantile.
Estimate binomial_estimate(int64_t successes, int64_t samples, double z = 1.96);

// Monte Carlo estimate of the arm probability between half-sides r and R (lattice
// mesh eta, critical parameter), states sampled lazily per replica.
Estimate estimate_arm_probability(double eta, double r, double R, const ArmPattern& pattern, int64_t samples,
                                  const RngSpec& rng);

// Same, for an arbitrary site-open probability p.
Estimate estimate_arm_probability_at(double eta, double r, double R, const ArmPattern& pattern, double p,
                                     int64_t samples, const RngSpec& rng);

std::string arm_csv_header();
std::string arm_csv_row(double eta, double r, double R, const ArmPattern& pattern, const Estimate& e);

}  // namespace nearcrit
