#include "nearcrit/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "nearcrit/arms.hpp"
#include "nearcrit/error.hpp"

namespace nearcrit {

RateSpec RateSpec::make(double eta, double alpha4) {
  require(eta > 0, "mesh must be positive");
  if (!(alpha4 > 0)) throw InvalidParameter("alpha4 estimate must be positive");
  RateSpec r;
  r.eta = eta;
  r.alpha4 = alpha4;
  r.rate = eta * eta / alpha4;
  return r;
}

ClockStream sample_clocks(const LatticeGrid& grid, double T, const RateSpec& rate, const RngSpec& spec) {
  require(T >= 0, "horizon must be nonnegative");
  ClockStream cs;
  cs.horizon = T;
  Rng rng(spec);
  for (int32_t s = 0; s < grid.size(); ++s) {
    const double lam = rate.at(grid.position(s));
    require(lam >= 0, "local rate must be nonnegative");
    const uint64_t k = rng.poisson(T * lam);
    for (uint64_t m = 0; m < k; ++m) {
      const double t = rng.uniform(0, T);
      cs.rings.push_back({t, s, static_cast<uint8_t>(rng.bits() >> 63)});
    }
  }
  std::sort(cs.rings.begin(), cs.rings.end(), [](const ClockRing& a, const ClockRing& b) {
    return a.time != b.time ? a.time < b.time : a.site < b.site;
  });
  return cs;
}

Trajectory::Trajectory(SiteConfig initial, double start, double end, std::vector<FlipEvent> events, double rate,
                       uint64_t seed)
    : initial_(std::move(initial)), start_(start), end_(end), rate_(rate), seed_(seed), events_(std::move(events)) {
  require(end >= start, "trajectory end precedes its start");
  for (size_t k = 0; k < events_.size(); ++k) {
    require(events_[k].time >= start && events_[k].time <= end, "event time outside the trajectory range");
    require(events_[k].site >= 0 && events_[k].site < initial_.size(), "event site outside grid");
    if (k > 0) require(events_[k - 1].time <= events_[k].time, "events must be ordered in time");
  }
}

SiteConfig Trajectory::config_at(double t) const {
  SiteConfig c = initial_;
  auto& st = c.states();
  for (const FlipEvent& e : events_) {
    if (e.time > t) break;
    st[e.site] = e.state;
  }
  return c;
}

int64_t Trajectory::flips() const {
  std::vector<uint8_t> st = initial_.states();
  int64_t n = 0;
  for (const FlipEvent& e : events_) {
    n += st[e.site] != e.state;
    st[e.site] = e.state;
  }
  return n;
}

std::vector<double> Trajectory::change_times() const {
  std::vector<uint8_t> st = initial_.states();
  std::vector<double> out;
  for (const FlipEvent& e : events_) {
    if (st[e.site] != e.state && (out.empty() || out.back() != e.time)) out.push_back(e.time);
    st[e.site] = e.state;
  }
  return out;
}

Trajectory replay(const SiteConfig& initial, const ClockStream& clocks, const std::function<bool(int32_t)>& keep,
                  double rate, uint64_t seed) {
  std::vector<FlipEvent> ev;
  for (const ClockRing& r : clocks.rings) {
    require(r.site >= 0 && r.site < initial.size(), "clock site outside grid");
    if (!keep || keep(r.site)) ev.push_back({r.time, r.site, r.state});
  }
  return Trajectory(initial, 0, clocks.horizon, std::move(ev), rate, seed);
}

Trajectory run_dynamical(const SiteConfig& initial, double T, const RateSpec& rate, const RngSpec& rng) {
  return replay(initial, sample_clocks(initial.grid(), T, rate, rng), nullptr, rate.rate, rng.seed);
}

Trajectory run_dynamical(const SiteConfig& initial, const ClockStream& clocks) {
  return replay(initial, clocks, nullptr);
}

double nearcritical_p(double lambda, double rate) {
  require(rate >= 0, "rate must be nonnegative");
  if (lambda >= 0) return 1 - 0.5 * std::exp(-lambda * rate);
  return 0.5 * std::exp(lambda * rate);
}

double switching_lambda(double u, double rate) {
  require(u >= 0 && u <= 1, "label must lie in [0,1]");
  require(rate > 0, "rate must be positive");
  if (u > 0.5) return -std::log(2 * (1 - u)) / rate;
  return std::log(2 * u) / rate;
}

Trajectory run_nearcritical(const MonotoneLabels& labels, double lambda_min, double lambda_max, const RateSpec& rate) {
  require(lambda_min <= 0 && 0 <= lambda_max, "need lambda_min <= 0 <= lambda_max");
  const LatticeGrid& g = labels.grid();
  SiteConfig init(labels.grid_ptr(), 0);
  std::vector<FlipEvent> ev;
  for (int32_t s = 0; s < g.size(); ++s) {
    const double lam = switching_lambda(labels.label(s), rate.at(g.position(s)));
    if (lam <= lambda_min) {
      init.set(s, true);
    } else if (lam <= lambda_max) {
      ev.push_back({lam, s, 1});
    }
  }
  std::sort(ev.begin(), ev.end(), [](const FlipEvent& a, const FlipEvent& b) {
    return a.time != b.time ? a.time < b.time : a.site < b.site;
  });
  return Trajectory(std::move(init), lambda_min, lambda_max, std::move(ev), rate.rate);
}

SiteConfig nearcritical_config(const MonotoneLabels& labels, double lambda, const RateSpec& rate) {
  const LatticeGrid& g = labels.grid();
  SiteConfig c(labels.grid_ptr(), 0);
  for (int32_t s = 0; s < g.size(); ++s)
    c.set(s, labels.label(s) <= nearcritical_p(lambda, rate.at(g.position(s))));
  return c;
}

Trajectory run_cutoff(const SiteConfig& initial, double eps, const ClockStream& clocks) {
  const PivotalSet set = epsilon_important(initial, eps);
  std::vector<uint8_t> member(initial.size(), 0);
  for (int32_t s : set.sites) member[s] = 1;
  return replay(initial, clocks, [&member](int32_t s) { return member[s] != 0; });
}

Trajectory run_cutoff(const SiteConfig& initial, double eps, double T, const RateSpec& rate, const RngSpec& rng) {
  Trajectory t = run_cutoff(initial, eps, sample_clocks(initial.grid(), T, rate, rng));
  return Trajectory(t.initial(), t.start(), t.end(), t.events(), rate.rate, rng.seed);
}

SiteConfig gradient_config(const GridPtr& grid, const RateSpec& rate, const RngSpec& spec) {
  Rng rng(spec);
  SiteConfig c(grid, 0);
  for (int32_t s = 0; s < grid->size(); ++s) {
    const Point z = grid->position(s);
    const double phi = rate.phi ? rate.phi(z) : z.y;
    const double p = 0.5 + std::clamp(phi * rate.rate, -0.5, 0.5);
    c.set(s, rng.uniform() <= p);
  }
  return c;
}

std::vector<int32_t> extract_front(const SiteConfig& config, double r, double R) {
  const LatticeGrid& g = config.grid();
  require(r >= 0 && r < R, "front radii need 0 <= r < R");
  const auto& st = config.states();
  const ArmPattern two = ArmPattern::alternating(2);
  std::vector<int32_t> out;
  for (int32_t s = 0; s < g.size(); ++s) {
    bool open = false, closed = false;
    for (int32_t n : g.neighbors(s)) {
      if (n < 0) continue;
      open = open || st[n];
      closed = closed || !st[n];
    }
    if (!open || !closed) continue;
    const Point p = g.position(s);
    const auto inner = annulus_inner_sites(g, Annulus(p, std::max(r, g.eta()), R));
    ArmRegion region = ArmRegion::square(config.grid_ptr(), inner, Rect::square(p, R), true);
    if (arm_event(config, region, two)) out.push_back(s);
  }
  return out;
}

namespace {

// Marks sites of the given color connected to a seed set.
std::vector<uint8_t> flood(const SiteConfig& config, const std::vector<int32_t>& seeds, bool open) {
  const LatticeGrid& g = config.grid();
  const auto& st = config.states();
  std::vector<uint8_t> mark(g.size(), 0);
  std::vector<int32_t> q;
  for (int32_t s : seeds)
    if ((st[s] != 0) == open && !mark[s]) {
      mark[s] = 1;
      q.push_back(s);
    }
  for (size_t h = 0; h < q.size(); ++h)
    for (int32_t n : g.neighbors(q[h]))
      if (n >= 0 && !mark[n] && (st[n] != 0) == open) {
        mark[n] = 1;
        q.push_back(n);
      }
  return mark;
}

}  // namespace

std::vector<int32_t> front_hull(const SiteConfig& config) {
  const LatticeGrid& g = config.grid();
  std::vector<int32_t> top, bottom;
  for (int32_t s = 0; s < g.size(); ++s) {
    const int j = g.axial(s).j;
    if (j == g.row_max()) top.push_back(s);
    if (j == g.row_min()) bottom.push_back(s);
  }
  const auto up = flood(config, top, true);
  const auto down = flood(config, bottom, false);
  std::vector<int32_t> out;
  for (int32_t s = 0; s < g.size(); ++s) {
    if (!up[s]) continue;
    for (int32_t n : g.neighbors(s))
      if (n >= 0 && down[n]) {
        out.push_back(s);
        break;
      }
  }
  return out;
}

void write_trajectory(std::ostream& out, const Trajectory& tr) {
  out.write("NCTR", 4);
  detail::put_u32(out, 1);
  detail::put_f64(out, tr.start());
  detail::put_f64(out, tr.end());
  detail::put_f64(out, tr.rate());
  detail::put_u64(out, tr.seed());
  write_config(out, tr.initial());
  detail::put_u64(out, tr.events().size());
  for (const FlipEvent& e : tr.events()) {
    detail::put_f64(out, e.time);
    detail::put_u32(out, static_cast<uint32_t>(e.site));
    out.put(static_cast<char>(e.state));
  }
}

Trajectory read_trajectory(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "NCTR") throw InvalidParameter("not a trajectory file");
  if (detail::get_u32(in) != 1) throw InvalidParameter("unsupported trajectory version");
  const double start = detail::get_f64(in);
  const double end = detail::get_f64(in);
  const double rate = detail::get_f64(in);
  const uint64_t seed = detail::get_u64(in);
  SiteConfig init = read_config(in);
  const uint64_t n = detail::get_u64(in);
  std::vector<FlipEvent> ev;
  ev.reserve(std::min<uint64_t>(n, 1u << 24));
  for (uint64_t k = 0; k < n; ++k) {
    FlipEvent e;
    e.time = detail::get_f64(in);
    e.site = static_cast<int32_t>(detail::get_u32(in));
    const int c = in.get();
    if (c == EOF) throw InvalidParameter("truncated trajectory file");
    e.state = static_cast<uint8_t>(c ? 1 : 0);
    ev.push_back(e);
  }
  return Trajectory(std::move(init), start, end, std::move(ev), rate, seed);
}

std::string crossing_csv(const Trajectory& tr, const std::vector<Quad>& quads) {
  std::ostringstream os;
  os.precision(12);
  os << "time";
  for (size_t q = 0; q < quads.size(); ++q) os << ",q" << q;
  os << '\n';
  std::vector<CrossingEvaluator> ev;
  for (const Quad& q : quads) ev.emplace_back(tr.initial().grid_ptr(), q);
  SiteConfig cur = tr.initial();
  auto row = [&](double t) {
    os << t;
    for (const auto& e : ev) os << ',' << (e.open_crossing(cur) ? 1 : 0);
    os << '\n';
  };
  row(tr.start());
  const auto& events = tr.events();
  for (size_t k = 0; k < events.size();) {
    const double t = events[k].time;
    bool changed = false;
    for (; k < events.size() && events[k].time == t; ++k) {
      changed = changed || cur.open(events[k].site) != (events[k].state != 0);
      cur.set(events[k].site, events[k].state != 0);
    }
    if (changed) row(t);
  }
  return os.str();
}

}  // namespace nearcrit
