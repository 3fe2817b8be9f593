#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "nearcrit/geometry.hpp"
#include "nearcrit/rng.hpp"

namespace nearcrit {

// Axial coordinates of a point of the triangular lattice; the embedding is
// eta * (i + j/2, j*sqrt(3)/2).
struct Axial {
  int i = 0;
  int j = 0;
};

inline bool operator==(Axial a, Axial b) { return a.i == b.i && a.j == b.j; }

inline constexpr double kSqrt3 = 1.7320508075688772;

// Neighbor offsets in counter-clockwise order starting at angle 0.
inline constexpr std::array<Axial, 6> kNeighborOffsets = {{{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}};

inline Axial neighbor_of(Axial a, int k) { return {a.i + kNeighborOffsets[k].i, a.j + kNeighborOffsets[k].j}; }

class LatticeGrid {
 public:
  LatticeGrid(const Rect& domain, double eta);

  const Rect& domain() const { return domain_; }
  double eta() const { return eta_; }
  int32_t size() const { return static_cast<int32_t>(axial_.size()); }

  Axial axial(int32_t site) const { return axial_[site]; }
  Point position(int32_t site) const { return point_of(axial_[site]); }
  Point point_of(Axial a) const { return {eta_ * (a.i + 0.5 * a.j), eta_ * (kSqrt3 / 2) * a.j}; }

  // Site index of a lattice point, or -1 when it is not a site of this grid.
  int32_t index_of(Axial a) const;

  // Neighbor sites in counter-clockwise order; -1 where the lattice neighbor is absent.
  const std::array<int32_t, 6>& neighbors(int32_t site) const { return neighbors_[site]; }
  int degree(int32_t site) const;

  // Lattice point closest to p (Voronoi cell lookup).
  Axial nearest_lattice_point(Point p) const;
  // Site closest to p among grid sites, or -1 for an empty grid.
  int32_t nearest_site(Point p) const;

  // Sites whose centers lie in the closed rectangle r (tolerance 1e-9*eta).
  std::vector<int32_t> sites_in(const Rect& r) const;

  // Range of occupied rows j.
  int row_min() const { return jmin_; }
  int row_max() const { return jmin_ + static_cast<int>(row_offset_.size()) - 1; }

  double tolerance() const { return 1e-9 * eta_; }

 private:
  Rect domain_;
  double eta_;
  int jmin_ = 0;
  std::vector<int> row_imin_;
  std::vector<int> row_count_;
  std::vector<int32_t> row_offset_;
  std::vector<Axial> axial_;
  std::vector<std::array<int32_t, 6>> neighbors_;
};

using GridPtr = std::shared_ptr<const LatticeGrid>;

GridPtr build_grid(const Rect& domain, double eta);

// Open/closed state per site; 1 = open.
class SiteConfig {
 public:
  SiteConfig() = default;
  explicit SiteConfig(GridPtr grid, uint8_t fill = 0);
  SiteConfig(GridPtr grid, std::vector<uint8_t> states);

  const LatticeGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  int32_t size() const { return static_cast<int32_t>(states_.size()); }

  bool open(int32_t site) const { return states_[site] != 0; }
  void set(int32_t site, bool open) { states_[site] = open ? 1 : 0; }
  const std::vector<uint8_t>& states() const { return states_; }
  std::vector<uint8_t>& states() { return states_; }
  int64_t open_count() const;

  bool operator==(const SiteConfig& o) const { return grid_ == o.grid_ && states_ == o.states_; }

 private:
  GridPtr grid_;
  std::vector<uint8_t> states_;
};

class MonotoneLabels {
 public:
  MonotoneLabels(GridPtr grid, std::vector<double> labels);

  const LatticeGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const std::vector<double>& labels() const { return labels_; }
  double label(int32_t site) const { return labels_[site]; }

 private:
  GridPtr grid_;
  std::vector<double> labels_;
};

SiteConfig sample_critical(const GridPtr& grid, const RngSpec& rng);
SiteConfig sample_bernoulli(const GridPtr& grid, double p, const RngSpec& rng);
MonotoneLabels sample_labels(const GridPtr& grid, const RngSpec& rng);
SiteConfig threshold(const MonotoneLabels& labels, double p);

// Binary layout, all integers and doubles little-endian:
//   magic "NCCF", uint32 version = 1,
//   float64 x0, y0, x1, y1, eta, uint64 site count,
//   ceil(count/8) bytes of packed states, site k at bit (k % 8) of byte k/8.
void write_config(std::ostream& out, const SiteConfig& config);
SiteConfig read_config(std::istream& in);
std::string config_to_json(const SiteConfig& config);
SiteConfig config_from_json(const std::string& text);

namespace detail {
void put_u32(std::ostream& out, uint32_t v);
void put_u64(std::ostream& out, uint64_t v);
void put_f64(std::ostream& out, double v);
uint32_t get_u32(std::istream& in);
uint64_t get_u64(std::istream& in);
double get_f64(std::istream& in);
}  // namespace detail

}  // namespace nearcrit
