#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nearcrit/lattice.hpp"
#include "nearcrit/pivotal.hpp"
#include "nearcrit/quad.hpp"
#include "nearcrit/rng.hpp"

namespace nearcrit {

struct RateSpec {
  double eta = 0;
  double alpha4 = 0;
  double rate = 0;  // eta^2 / alpha4
  // Spatial modulation phi(z); unset means phi = 1.
  std::function<double(Point)> phi;

  static RateSpec make(double eta, double alpha4);
  // Local rate r(eta) * phi(z).
  double at(Point z) const { return phi ? rate * phi(z) : rate; }
};

// One clock ring: at `time` the site's state is redrawn and becomes `state`.
struct ClockRing {
  double time = 0;
  int32_t site = 0;
  uint8_t state = 0;
};

// Materialized clock rings on [0, horizon], sorted by time.
struct ClockStream {
  double horizon = 0;
  std::vector<ClockRing> rings;
};

// Independent Poisson clocks of intensity rate.at(site) per site, fair coins.
ClockStream sample_clocks(const LatticeGrid& grid, double T, const RateSpec& rate, const RngSpec& rng);

struct FlipEvent {
  double time = 0;
  int32_t site = 0;
  uint8_t state = 0;
};

// Piecewise-constant, right-continuous path of configurations on [start, end].
class Trajectory {
 public:
  Trajectory(SiteConfig initial, double start, double end, std::vector<FlipEvent> events, double rate = 0,
             uint64_t seed = 0);

  const SiteConfig& initial() const { return initial_; }
  double start() const { return start_; }
  double end() const { return end_; }
  double rate() const { return rate_; }
  uint64_t seed() const { return seed_; }
  const std::vector<FlipEvent>& events() const { return events_; }

  // Configuration after applying every event with time <= t.
  SiteConfig config_at(double t) const;
  // Number of events that change the current state.
  int64_t flips() const;
  // Times at which the configuration changes.
  std::vector<double> change_times() const;

 private:
  SiteConfig initial_;
  double start_, end_, rate_;
  uint64_t seed_;
  std::vector<FlipEvent> events_;
};

// Replays a clock stream from `initial`, keeping only rings accepted by `keep`.
Trajectory replay(const SiteConfig& initial, const ClockStream& clocks, const std::function<bool(int32_t)>& keep,
                  double rate = 0, uint64_t seed = 0);

Trajectory run_dynamical(const SiteConfig& initial, double T, const RateSpec& rate, const RngSpec& rng);
Trajectory run_dynamical(const SiteConfig& initial, const ClockStream& clocks);

// Open probability at parameter lambda of the near-critical coupling:
// 1 - e^{-lambda r}/2 for lambda >= 0 and e^{lambda r}/2 below.
double nearcritical_p(double lambda, double rate);
// Parameter at which the site with label u switches from closed to open.
double switching_lambda(double u, double rate);

// Monotone path lambda -> omega(lambda) on [lambda_min, lambda_max]: a site is
// open at lambda iff its switching parameter is <= lambda, so the slice at
// lambda equals threshold(labels, nearcritical_p(lambda)). The spatially
// modulated rate of `rate` is honored.
Trajectory run_nearcritical(const MonotoneLabels& labels, double lambda_min, double lambda_max, const RateSpec& rate);
// Slice at a single lambda without materializing the path.
SiteConfig nearcritical_config(const MonotoneLabels& labels, double lambda, const RateSpec& rate);

// Dynamics driven only at the eps-important points of `initial` (set frozen at t = 0).
Trajectory run_cutoff(const SiteConfig& initial, double eps, const ClockStream& clocks);
Trajectory run_cutoff(const SiteConfig& initial, double eps, double T, const RateSpec& rate, const RngSpec& rng);

// Independent sites with p(z) = 1/2 + clamp(phi(z) r, -1/2, 1/2), phi = Im z by default.
SiteConfig gradient_config(const GridPtr& grid, const RateSpec& rate, const RngSpec& rng);

// Sites carrying one open and one closed arm from the site to distance R
// (square annulus of half-sides eta and R).
std::vector<int32_t> extract_front(const SiteConfig& config, double r, double R);

// Open sites connected to the top row that touch a closed site connected to the bottom row.
std::vector<int32_t> front_hull(const SiteConfig& config);

// Binary layout, little-endian: magic "NCTR", uint32 version = 1, float64 start,
// end, rate, uint64 seed, the initial configuration in "NCCF" form, uint64 event
// count, then per event float64 time, int32 site, uint8 state.
void write_trajectory(std::ostream& out, const Trajectory& tr);
Trajectory read_trajectory(std::istream& in);

// CSV "time,<quad ids...>" with one row per change time (plus the start) giving
// crossing indicators of the listed quads.
std::string crossing_csv(const Trajectory& tr, const std::vector<Quad>& quads);

}  // namespace nearcrit
