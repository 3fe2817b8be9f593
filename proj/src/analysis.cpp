#include "nearcrit/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <queue>
#include <thread>
#include <utility>

#include <json.hpp>

#include "nearcrit/dynamics.hpp"
#include "nearcrit/error.hpp"
#include "nearcrit/metric.hpp"
#include "nearcrit/pivotal.hpp"

namespace nearcrit {

namespace {

std::atomic<int> g_threads{0};

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

// Slope and intercept of weighted least squares on already-logged data.
std::pair<double, double> wls(const std::vector<double>& X, const std::vector<double>& Y,
                              const std::vector<double>& W) {
  double sw = 0, sx = 0, sy = 0;
  for (size_t k = 0; k < X.size(); ++k) {
    sw += W[k];
    sx += W[k] * X[k];
    sy += W[k] * Y[k];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (size_t k = 0; k < X.size(); ++k) {
    sxx += W[k] * (X[k] - mx) * (X[k] - mx);
    sxy += W[k] * (X[k] - mx) * (Y[k] - my);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0;
  return {slope, my - slope * mx};
}

// Slope of a refit on resampled y with fixed x and weights; NaN when a point is nonpositive.
double refit_slope(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
  std::vector<double> X, Y;
  for (size_t k = 0; k < x.size(); ++k) {
    if (!(y[k] > 0)) return std::nan("");
    X.push_back(std::log(x[k]));
    Y.push_back(std::log(y[k]));
  }
  return wls(X, Y, w).first;
}

void bootstrap_interval(ExponentFit& fit, std::vector<double> slopes) {
  slopes.erase(std::remove_if(slopes.begin(), slopes.end(), [](double s) { return std::isnan(s); }), slopes.end());
  fit.resamples = static_cast<int>(slopes.size());
  if (slopes.size() < 10) return;
  fit.ci_low = quantile(slopes, 0.025);
  fit.ci_high = quantile(slopes, 0.975);
}

// Open connection inside a quad region from a site touching arc a to one touching arc b.
bool region_connected(const QuadRegion& region, const std::vector<uint8_t>& st, bool open, int a, int b) {
  thread_local StampSet seen;
  thread_local std::vector<int32_t> queue;
  const LatticeGrid& g = *region.grid;
  seen.Resize(g.size());
  seen.Clear();
  queue.clear();
  for (size_t k = 0; k < region.sites.size(); ++k) {
    const int32_t s = region.sites[k];
    if (((region.touch[k] >> a) & 1) && (st[s] != 0) == open && seen.Insert(s)) queue.push_back(s);
  }
  for (size_t h = 0; h < queue.size(); ++h) {
    const int32_t s = queue[h];
    if ((region.touch[region.local[s]] >> b) & 1) return true;
    for (int32_t n : g.neighbors(s))
      if (n >= 0 && region.local[n] >= 0 && (st[n] != 0) == open && seen.Insert(n)) queue.push_back(n);
  }
  return false;
}

double near_rate(double eta, double alpha4) {
  require(alpha4 > 0, "alpha4 estimate must be positive");
  return eta * eta / alpha4;
}

}  // namespace

void set_default_threads(int threads) { g_threads = std::max(0, threads); }

int default_threads() {
  const int t = g_threads.load();
  if (t > 0) return t;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn) {
  if (threads <= 0) threads = default_threads();
  const int workers = static_cast<int>(std::min<int64_t>(threads, n));
  if (workers <= 1) {
    for (int64_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<int64_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto run = [&] {
    try {
      for (int64_t k = next++; k < n; k = next++) fn(k);
    } catch (...) {
      std::lock_guard<std::mutex> lock(m);
      if (!failure) failure = std::current_exception();
      next = n;
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------

double ExponentFit::predict(double at) const { return std::exp(intercept + slope * std::log(at)); }

ExponentFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& weights) {
  require(x.size() == y.size(), "fit needs matching x and y");
  require(weights.empty() || weights.size() == x.size(), "fit weights must match the data");
  ExponentFit fit;
  std::vector<double> X, Y, W;
  for (size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0) || !(y[k] > 0)) continue;
    fit.x.push_back(x[k]);
    fit.y.push_back(y[k]);
    fit.weights.push_back(weights.empty() ? 1.0 : weights[k]);
    X.push_back(std::log(x[k]));
    Y.push_back(std::log(y[k]));
    W.push_back(fit.weights.back());
  }
  if (X.size() < 2) return fit;
  std::tie(fit.slope, fit.intercept) = wls(X, Y, W);
  double sw = 0, mx = 0;
  for (size_t k = 0; k < X.size(); ++k) {
    sw += W[k];
    mx += W[k] * X[k];
  }
  mx /= sw;
  double sxx = 0, rss = 0;
  for (size_t k = 0; k < X.size(); ++k) {
    const double r = Y[k] - (fit.intercept + fit.slope * X[k]);
    fit.residuals.push_back(r);
    rss += W[k] * r * r;
    sxx += W[k] * (X[k] - mx) * (X[k] - mx);
  }
  const size_t m = X.size();
  fit.slope_se = (m > 2 && sxx > 0) ? std::sqrt(rss / (m - 2) / sxx) : 0;
  fit.ci_low = fit.slope - 1.96 * fit.slope_se;
  fit.ci_high = fit.slope + 1.96 * fit.slope_se;
  fit.valid = sxx > 0;
  return fit;
}

ExponentFit binomial_fit(const std::vector<double>& x, const std::vector<Estimate>& est, int resamples,
                         const RngSpec& spec) {
  require(x.size() == est.size(), "fit needs one estimate per point");
  std::vector<double> y, w;
  for (const Estimate& e : est) {
    y.push_back(e.value);
    const double p = e.value;
    w.push_back(p > 0 ? e.samples * p / std::max(1 - p, 1.0 / std::max<int64_t>(e.samples, 1)) : 0);
  }
  ExponentFit fit = loglog_fit(x, y, w);
  if (!fit.valid || resamples <= 0) return fit;
  Rng rng(spec);
  std::vector<double> xs, ws, slopes;
  std::vector<const Estimate*> kept;
  for (size_t k = 0; k < x.size(); ++k)
    if (x[k] > 0 && y[k] > 0) {
      xs.push_back(x[k]);
      ws.push_back(w[k]);
      kept.push_back(&est[k]);
    }
  std::vector<double> ys(xs.size());
  for (int b = 0; b < resamples; ++b) {
    for (size_t k = 0; k < xs.size(); ++k)
      ys[k] = static_cast<double>(rng.binomial(kept[k]->samples, kept[k]->value)) / kept[k]->samples;
    slopes.push_back(refit_slope(xs, ys, ws));
  }
  bootstrap_interval(fit, std::move(slopes));
  return fit;
}

MeanEstimate mean_estimate(const std::vector<double>& values) {
  MeanEstimate m;
  m.samples = static_cast<int64_t>(values.size());
  if (values.empty()) return m;
  double s = 0;
  for (double v : values) s += v;
  m.mean = s / values.size();
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.se = std::sqrt(ss / (values.size() - 1) / values.size());
  }
  return m;
}

ExponentFit replica_fit(const std::vector<double>& x, const std::vector<std::vector<double>>& replicas,
                        int resamples, const RngSpec& spec, bool weighted) {
  require(x.size() == replicas.size(), "fit needs one replica set per point");
  std::vector<double> y, w;
  for (const auto& r : replicas) {
    const MeanEstimate m = mean_estimate(r);
    y.push_back(m.mean);
    w.push_back(weighted && m.se > 0 && m.mean > 0 ? (m.mean * m.mean) / (m.se * m.se) : 1.0);
  }
  ExponentFit fit = loglog_fit(x, y, w);
  if (!fit.valid || resamples <= 0) return fit;
  Rng rng(spec);
  std::vector<double> xs, ws, slopes;
  std::vector<const std::vector<double>*> kept;
  for (size_t k = 0; k < x.size(); ++k)
    if (x[k] > 0 && y[k] > 0) {
      xs.push_back(x[k]);
      ws.push_back(w[k]);
      kept.push_back(&replicas[k]);
    }
  std::vector<double> ys(xs.size());
  for (int b = 0; b < resamples; ++b) {
    for (size_t k = 0; k < xs.size(); ++k) {
      const auto& r = *kept[k];
      double s = 0;
      for (size_t m = 0; m < r.size(); ++m) s += r[rng.below(r.size())];
      ys[k] = s / r.size();
    }
    slopes.push_back(refit_slope(xs, ys, ws));
  }
  bootstrap_interval(fit, std::move(slopes));
  return fit;
}

std::string fit_to_json(const ExponentFit& fit) {
  nlohmann::json j = {{"x", fit.x},
                      {"y", fit.y},
                      {"weights", fit.weights},
                      {"slope", fit.slope},
                      {"intercept", fit.intercept},
                      {"slope_se", fit.slope_se},
                      {"residuals", fit.residuals},
                      {"ci", {fit.ci_low, fit.ci_high}},
                      {"resamples", fit.resamples},
                      {"valid", fit.valid}};
  return j.dump();
}

// ---------------------------------------------------------------------------

ArmProfile arm_profile(double eta, double r, const std::vector<double>& R_list, const ArmPattern& pattern,
                       int64_t samples, const RngSpec& spec, int threads, double p) {
  require(eta > 0, "mesh must be positive");
  require(!R_list.empty(), "need at least one outer radius");
  require(samples >= 1, "need at least one sample");
  require(p >= 0 && p <= 1, "p must lie in [0,1]");
  require(std::is_sorted(R_list.begin(), R_list.end()) && R_list.front() > r, "outer radii must increase above r");
  plan_for(pattern);
  ArmProfile prof;
  prof.pattern = pattern;
  prof.eta = eta;
  prof.r = r;
  prof.R = R_list;
  GridPtr grid = build_grid(Rect::square({0, 0}, R_list.back() + 2 * eta), eta);
  std::vector<ArmRegion> regions;
  for (double R : R_list) regions.push_back(annulus_region(grid, Annulus({0, 0}, r, R), pattern.half_plane, false));
  std::vector<int16_t> reached(samples, 0);
  parallel_for(samples, threads, [&](int64_t k) {
    thread_local std::vector<uint8_t> st;
    thread_local StampSet drawn;
    st.resize(std::max<size_t>(st.size(), grid->size()));
    drawn.Resize(grid->size());
    drawn.Clear();
    Rng rng(spec.substream(k));
    auto state = [&](int32_t s) {
      if (drawn.Insert(s)) st[s] = rng.uniform() <= p;
      return st[s] != 0;
    };
    int16_t m = 0;
    while (m < static_cast<int16_t>(regions.size()) && arm_event(regions[m], state, pattern)) ++m;
    reached[k] = m;
  });
  std::vector<double> ratio;
  for (size_t m = 0; m < R_list.size(); ++m) {
    int64_t hits = 0;
    for (int16_t v : reached) hits += v > static_cast<int16_t>(m);
    prof.estimates.push_back(binomial_estimate(hits, samples));
    ratio.push_back(r > 0 ? R_list[m] / r : R_list[m] / eta);
  }
  prof.fit = binomial_fit(ratio, prof.estimates, 400, spec.substream(samples + 1));
  return prof;
}

double Alpha4Table::lattice(double R) const {
  for (size_t k = 0; k < n.size(); ++k)
    if (std::abs(n[k] - R) <= 1e-9 * R && estimates[k].value > 0) return estimates[k].value;
  require(fit.valid, "alpha4 table has no usable fit");
  return fit.predict(R);
}

double Alpha4Table::at(double eta) const {
  require(eta > 0, "mesh must be positive");
  return lattice(1 / eta);
}

Alpha4Table estimate_alpha4(const std::vector<double>& n_list, int64_t samples, const RngSpec& rng, int threads) {
  Alpha4Table t;
  const ArmProfile prof = arm_profile(1.0, 0.0, n_list, ArmPattern::alternating(4), samples, rng, threads);
  t.n = n_list;
  t.estimates = prof.estimates;
  t.fit = prof.fit;
  t.samples = samples;
  t.seed = rng.seed;
  return t;
}

std::string alpha4_to_json(const Alpha4Table& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (size_t k = 0; k < t.n.size(); ++k) {
    const Estimate& e = t.estimates[k];
    rows.push_back({{"n", t.n[k]},
                    {"estimate", e.value},
                    {"ci_low", e.ci_low},
                    {"ci_high", e.ci_high},
                    {"successes", e.successes},
                    {"samples", e.samples}});
  }
  nlohmann::json j = {{"format", "nearcrit-alpha4"},
                      {"rows", rows},
                      {"slope", t.fit.slope},
                      {"intercept", t.fit.intercept},
                      {"samples", t.samples},
                      {"seed", t.seed}};
  return j.dump(2);
}

Alpha4Table alpha4_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "nearcrit-alpha4") throw InvalidParameter("not an alpha4 table");
  Alpha4Table t;
  std::vector<double> x, y;
  for (const auto& row : j.at("rows")) {
    Estimate e;
    e.value = row.at("estimate").get<double>();
    e.ci_low = row.value("ci_low", e.value);
    e.ci_high = row.value("ci_high", e.value);
    e.successes = row.value("successes", int64_t{0});
    e.samples = row.value("samples", int64_t{0});
    t.n.push_back(row.at("n").get<double>());
    t.estimates.push_back(e);
  }
  t.samples = j.value("samples", int64_t{0});
  t.seed = j.value("seed", uint64_t{0});
  for (size_t k = 0; k < t.n.size(); ++k) y.push_back(t.estimates[k].value);
  t.fit = loglog_fit(t.n, y);
  if (j.contains("slope") && j.contains("intercept")) {
    t.fit.slope = j["slope"].get<double>();
    t.fit.intercept = j["intercept"].get<double>();
  }
  return t;
}

// ---------------------------------------------------------------------------

namespace {

template <class Label>
double bottleneck(const QuadRegion& region, int a, int b, Label&& label) {
  thread_local StampSet seen;
  const LatticeGrid& g = *region.grid;
  seen.Resize(g.size());
  seen.Clear();
  using Item = std::pair<double, int32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  for (size_t k = 0; k < region.sites.size(); ++k) {
    const int32_t s = region.sites[k];
    if ((region.touch[k] >> a) & 1) {
      seen.Insert(s);
      heap.push({label(s), s});
    }
  }
  while (!heap.empty()) {
    const auto [key, s] = heap.top();
    heap.pop();
    if ((region.touch[region.local[s]] >> b) & 1) return key;
    for (int32_t n : g.neighbors(s))
      if (n >= 0 && region.local[n] >= 0 && seen.Insert(n)) heap.push({std::max(key, label(n)), n});
  }
  return 2.0;  // no path at any threshold
}

}  // namespace

double crossing_threshold(const QuadRegion& region, Rng& rng, int a, int b) {
  return bottleneck(region, a, b, [&rng](int32_t) { return rng.uniform(); });
}

double crossing_threshold(const QuadRegion& region, const std::vector<double>& labels, int a, int b) {
  require(labels.size() == static_cast<size_t>(region.grid->size()), "one label per site needed");
  return bottleneck(region, a, b, [&labels](int32_t s) { return labels[s]; });
}

std::vector<double> crossing_thresholds(double eta, const Quad& quad, int64_t samples, const RngSpec& spec,
                                        int threads) {
  require(samples >= 1, "need at least one sample");
  GridPtr grid = build_grid(quad.bounding_box(), eta);
  const QuadRegion region = discretize(grid, quad);
  std::vector<double> out(samples);
  parallel_for(samples, threads, [&](int64_t k) {
    Rng rng(spec.substream(k));
    out[k] = crossing_threshold(region, rng);
  });
  return out;
}

Estimate crossing_probability(double eta, const Quad& quad, double p, int64_t samples, const RngSpec& spec,
                              int threads) {
  require(samples >= 1, "need at least one sample");
  require(p >= 0 && p <= 1, "p must lie in [0,1]");
  GridPtr grid = build_grid(quad.bounding_box(), eta);
  const QuadRegion region = discretize(grid, quad);
  std::vector<uint8_t> hit(samples, 0);
  parallel_for(samples, threads, [&](int64_t k) {
    thread_local std::vector<uint8_t> st;
    st.resize(grid->size());
    Rng rng(spec.substream(k));
    for (int32_t s = 0; s < grid->size(); ++s) st[s] = rng.uniform() <= p;
    hit[k] = region_connected(region, st, true, 0, 2);
  });
  int64_t hits = 0;
  for (uint8_t h : hit) hits += h;
  return binomial_estimate(hits, samples);
}

// ---------------------------------------------------------------------------

CorrelationReport correlation_length(const std::vector<double>& lambdas, double eta, double alpha4,
                                     double eps_threshold, double r_min, double r_max, int64_t samples,
                                     const RngSpec& spec, int threads) {
  require(!lambdas.empty(), "need at least one lambda");
  for (double l : lambdas) require(l > 0, "correlation length needs lambda > 0");
  require(eps_threshold > 0 && eps_threshold < 1, "threshold must lie in (0,1)");
  require(r_min > 0 && r_max >= r_min, "search range must be positive");
  CorrelationReport rep;
  rep.eta = eta;
  rep.alpha4 = alpha4;
  rep.threshold = eps_threshold;
  const double rate = near_rate(eta, alpha4);
  const double target = 1 - eps_threshold;
  rep.lengths.resize(lambdas.size());
  for (size_t m = 0; m < lambdas.size(); ++m) rep.lengths[m].lambda = lambdas[m];
  std::vector<int> done_at(lambdas.size(), -1);
  for (int j = 0;; ++j) {
    const double r = r_min * std::pow(2.0, j / 4.0);
    if (r > r_max * (1 + 1e-12)) break;
    const Quad q = Quad::rectangle({0, 0, 2 * r, r}, true);
    const auto u = crossing_thresholds(eta, q, samples, spec.substream(j), threads);
    bool all = true;
    for (size_t m = 0; m < lambdas.size(); ++m) {
      const double p = nearcritical_p(lambdas[m], rate);
      const double prob =
          static_cast<double>(std::count_if(u.begin(), u.end(), [p](double v) { return v <= p; })) / samples;
      auto& L = rep.lengths[m];
      L.r.push_back(r);
      L.probability.push_back(prob);
      if (done_at[m] < 0 && prob > target) done_at[m] = j;
      // Keep one more grid point past the crossing so the interpolation is bracketed.
      all = all && done_at[m] >= 0 && j > done_at[m];
    }
    if (all) break;
  }
  std::vector<double> xs, ys;
  for (size_t m = 0; m < lambdas.size(); ++m) {
    auto& L = rep.lengths[m];
    const int j = done_at[m];
    if (j < 0) {
      L.censored = true;
      L.L = L.r.back();
      continue;
    }
    if (j == 0) {
      L.L = L.r[0];
    } else {
      const double p0 = L.probability[j - 1], p1 = L.probability[j];
      const double f = p1 > p0 ? (target - p0) / (p1 - p0) : 1;
      L.L = std::exp(std::log(L.r[j - 1]) + std::clamp(f, 0.0, 1.0) * (std::log(L.r[j]) - std::log(L.r[j - 1])));
    }
    xs.push_back(L.lambda);
    ys.push_back(L.L);
  }
  rep.fit = loglog_fit(xs, ys);
  return rep;
}

double kesten_length(double p, const Alpha4Table& table) {
  const double d = std::abs(p - 0.5);
  require(d > 0, "Kesten's scale needs p != 1/2");
  require(table.fit.valid, "alpha4 table has no usable fit");
  const double A = std::exp(table.fit.intercept), s = table.fit.slope;
  require(2 + s > 0, "alpha4 fit decays too fast");
  return std::pow(1 / (A * d), 1 / (2 + s));
}

SquareBias square_bias(double eta, double alpha4, double lambda, const std::vector<double>& u_list, int64_t samples,
                       const RngSpec& spec, int threads) {
  require(!u_list.empty(), "need at least one square size");
  SquareBias out;
  out.eta = eta;
  out.lambda = lambda;
  out.u = u_list;
  const double rate = near_rate(eta, alpha4);
  const double p = nearcritical_p(lambda, rate), q = nearcritical_p(-lambda, rate);
  std::vector<std::vector<double>> reps;
  for (size_t m = 0; m < u_list.size(); ++m) {
    const auto u = crossing_thresholds(eta, Quad::rectangle({0, 0, u_list[m], u_list[m]}), samples,
                                       spec.substream(m), threads);
    std::vector<double> v(samples);
    for (int64_t k = 0; k < samples; ++k) v[k] = 0.5 * ((u[k] <= p) - (u[k] <= q));
    out.bias.push_back(mean_estimate(v));
    reps.push_back(std::move(v));
  }
  out.fit = replica_fit(u_list, reps, 400, spec.substream(u_list.size() + 1));
  return out;
}

SingularityStat singularity_statistic(const SiteConfig& config, int n) {
  require(n >= 2, "need n >= 2");
  const LatticeGrid& g = config.grid();
  require(g.domain().contains(Rect{0, 0, 1, 1}, g.tolerance()), "grid must contain the unit square");
  SingularityStat s;
  s.n = n;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const Rect r{static_cast<double>(a) / n, static_cast<double>(b) / n, static_cast<double>(a + 1) / n,
                   static_cast<double>(b + 1) / n};
      const QuadRegion region = discretize(config.grid_ptr(), Quad::rectangle(r));
      s.crossed += region_connected(region, config.states(), true, 0, 2);
    }
  s.statistic = (s.crossed - 0.5 * n * n) / std::pow(n, 1.25);
  return s;
}

SingularityTest singularity_test(double eta, double alpha4, double lambda, int n, int64_t samples,
                                 const RngSpec& spec, int threads) {
  require(samples >= 2, "need at least two samples");
  GridPtr grid = build_grid({0, 0, 1, 1}, eta);
  const RateSpec rate = RateSpec::make(eta, alpha4);
  std::vector<double> crit(samples), pert(samples), diff(samples);
  parallel_for(samples, threads, [&](int64_t k) {
    const MonotoneLabels labels = sample_labels(grid, spec.substream(k));
    crit[k] = singularity_statistic(nearcritical_config(labels, 0, rate), n).statistic;
    pert[k] = singularity_statistic(nearcritical_config(labels, lambda, rate), n).statistic;
    diff[k] = pert[k] - crit[k];
  });
  SingularityTest t;
  t.n = n;
  t.critical = mean_estimate(crit);
  t.perturbed = mean_estimate(pert);
  const MeanEstimate d = mean_estimate(diff);
  t.z = d.se > 0 ? d.mean / d.se : 0;
  return t;
}

ScalingCheck scaling_covariance_check(double eta, double alpha4, const Quad& quad, double alpha, double lambda,
                                      int64_t samples, const RngSpec& spec, int threads) {
  require(alpha > 0, "scale factor must be positive");
  const double rate = near_rate(eta, alpha4);
  ScalingCheck c;
  const double l2 = std::pow(alpha, -0.75) * lambda;
  const auto a = crossing_thresholds(eta, quad.scaled(alpha), samples, spec.substream(0), threads);
  const auto b = crossing_thresholds(eta, quad, samples, spec.substream(1), threads);
  auto frac = [samples](const std::vector<double>& u, double p) {
    return binomial_estimate(std::count_if(u.begin(), u.end(), [p](double v) { return v <= p; }), samples);
  };
  c.scaled = frac(a, nearcritical_p(l2, rate));
  c.original = frac(b, nearcritical_p(lambda, rate));
  c.difference = c.scaled.value - c.original.value;
  const double va = c.scaled.value * (1 - c.scaled.value) / samples;
  const double vb = c.original.value * (1 - c.original.value) / samples;
  c.z = va + vb > 0 ? c.difference / std::sqrt(va + vb) : 0;
  return c;
}

// ---------------------------------------------------------------------------

PivotalMoments pivotal_first_moment(double eta, double alpha4, const std::vector<double>& eps_list,
                                    int64_t samples, const RngSpec& spec, int threads) {
  require(alpha4 > 0, "alpha4 estimate must be positive");
  require(!eps_list.empty(), "need at least one eps");
  const double emax = *std::max_element(eps_list.begin(), eps_list.end());
  const Rect unit{0, 0, 1, 1};
  GridPtr grid = build_grid({-emax, -emax, 1 + emax, 1 + emax}, eta);
  const double w = eta * eta / alpha4;
  std::vector<std::vector<double>> reps(eps_list.size(), std::vector<double>(samples));
  parallel_for(samples, threads, [&](int64_t k) {
    const SiteConfig c = sample_critical(grid, spec.substream(k));
    for (size_t m = 0; m < eps_list.size(); ++m) reps[m][k] = w * epsilon_important(c, eps_list[m], unit).size();
  });
  PivotalMoments out;
  out.scale = eps_list;
  for (const auto& r : reps) out.moment.push_back(mean_estimate(r));
  out.fit = replica_fit(eps_list, reps, 400, spec.substream(samples + 1));
  return out;
}

PivotalMoments pivotal_second_moment(double eta, double alpha4, double eps, const std::vector<double>& r_list,
                                     int64_t samples, const RngSpec& spec, int threads) {
  require(alpha4 > 0, "alpha4 estimate must be positive");
  require(!r_list.empty(), "need at least one square size");
  const double rmax = *std::max_element(r_list.begin(), r_list.end());
  require(rmax <= eps, "squares must fit in one eps-square");
  GridPtr grid = build_grid({-eps, -eps, 2 * eps, 2 * eps}, eta);
  const double w = eta * eta / alpha4;
  const double tol = grid->tolerance();
  // Half-open [0, rmax)^2 so that only the eps-square [0, eps)^2 is examined.
  const Rect within{0, 0, rmax - 1e-6 * eta, rmax - 1e-6 * eta};
  std::vector<std::vector<double>> reps(r_list.size(), std::vector<double>(samples));
  parallel_for(samples, threads, [&](int64_t k) {
    const SiteConfig c = sample_critical(grid, spec.substream(k));
    const PivotalSet set = epsilon_important(c, eps, within);
    for (size_t m = 0; m < r_list.size(); ++m) {
      int64_t cnt = 0;
      for (int32_t s : set.sites) {
        const Point p = grid->position(s);
        cnt += p.x >= -tol && p.y >= -tol && p.x < r_list[m] - tol && p.y < r_list[m] - tol;
      }
      reps[m][k] = (w * cnt) * (w * cnt);
    }
  });
  PivotalMoments out;
  out.scale = r_list;
  for (const auto& r : reps) out.moment.push_back(mean_estimate(r));
  out.fit = replica_fit(r_list, reps, 400, spec.substream(samples + 1));
  return out;
}

// ---------------------------------------------------------------------------

NoiseCurve noise_covariance(double eta, double alpha4, const Quad& quad, const std::vector<double>& t_list,
                            int64_t samples, const RngSpec& spec, int threads, double fit_from, double fit_to) {
  for (double t : t_list) require(t >= 0, "times must be nonnegative");
  require(samples >= 2, "need at least two samples");
  NoiseCurve out;
  out.eta = eta;
  out.rate = near_rate(eta, alpha4);
  out.t = t_list;
  GridPtr grid = build_grid(quad.bounding_box(), eta);
  const QuadRegion region = discretize(grid, quad);
  const size_t nt = t_list.size();
  std::vector<uint8_t> f0(samples), ft(samples * nt);
  parallel_for(samples, threads, [&](int64_t k) {
    thread_local std::vector<uint8_t> s0, s1, cur;
    thread_local std::vector<double> tau;
    const int32_t n = grid->size();
    s0.resize(n);
    s1.resize(n);
    cur.resize(n);
    tau.resize(n);
    Rng rng(spec.substream(k));
    for (int32_t s = 0; s < n; ++s) {
      s0[s] = rng.bits() >> 63;
      s1[s] = rng.bits() >> 63;
      tau[s] = rng.exponential(out.rate);
    }
    f0[k] = region_connected(region, s0, true, 0, 2);
    for (size_t m = 0; m < nt; ++m) {
      for (int32_t s = 0; s < n; ++s) cur[s] = tau[s] <= t_list[m] ? s1[s] : s0[s];
      ft[k * nt + m] = region_connected(region, cur, true, 0, 2);
    }
  });
  double m0 = 0;
  for (uint8_t v : f0) m0 += v;
  m0 /= samples;
  out.probability = m0;
  std::vector<double> xs, ys, ws;
  for (size_t m = 0; m < nt; ++m) {
    double mt = 0;
    for (int64_t k = 0; k < samples; ++k) mt += ft[k * nt + m];
    mt /= samples;
    std::vector<double> prod(samples);
    for (int64_t k = 0; k < samples; ++k) prod[k] = (f0[k] - m0) * (ft[k * nt + m] - mt);
    MeanEstimate c = mean_estimate(prod);
    c.mean *= static_cast<double>(samples) / (samples - 1);
    out.covariance.push_back(c);
    if (t_list[m] >= fit_from && t_list[m] <= fit_to && t_list[m] > 0 && c.mean > 0) {
      xs.push_back(t_list[m]);
      ys.push_back(c.mean);
      ws.push_back(c.se > 0 ? (c.mean * c.mean) / (c.se * c.se) : 1);
    }
  }
  out.fit = loglog_fit(xs, ys, ws);
  return out;
}

double StabilityProfile::worst_reversal() const {
  std::vector<StabilityPoint> pts = points;
  std::sort(pts.begin(), pts.end(), [](const StabilityPoint& a, const StabilityPoint& b) { return a.eps < b.eps; });
  double worst = 0;
  for (size_t k = 0; k + 1 < pts.size(); ++k) {
    const Estimate& a = pts[k].disagreement;
    const Estimate& b = pts[k + 1].disagreement;
    const double va = a.value * (1 - a.value) / std::max<int64_t>(a.samples, 1);
    const double vb = b.value * (1 - b.value) / std::max<int64_t>(b.samples, 1);
    const double se = std::sqrt(va + vb);
    const double drop = a.value - b.value;  // frequency should not fall as eps grows
    if (drop > 0) worst = std::max(worst, se > 0 ? drop / se : INFINITY);
  }
  return worst;
}

namespace {

// Sites -> quads containing them, in compressed rows.
struct QuadIndex {
  std::vector<int32_t> start, quad;
  QuadIndex(int32_t n, const std::vector<QuadRegion>& regions) : start(n + 1, 0) {
    for (const auto& r : regions)
      for (int32_t s : r.sites) ++start[s + 1];
    for (int32_t s = 0; s < n; ++s) start[s + 1] += start[s];
    quad.resize(start[n]);
    std::vector<int32_t> fill(start.begin(), start.end() - 1);
    for (size_t q = 0; q < regions.size(); ++q)
      for (int32_t s : regions[q].sites) quad[fill[s]++] = static_cast<int32_t>(q);
  }
};

// Whether the full and the cut-off replay of the same clocks disagree on some
// quad crossing at some time. Crossing states are cached per quad; a change can
// alter a cached state only against its direction (an opening site cannot undo
// a crossing), and replays can differ only on quads holding a differing site.
bool replays_disagree(const SiteConfig& initial, const ClockStream& clocks, const std::vector<uint8_t>& keep,
                      const std::vector<QuadRegion>& regions, const QuadIndex& index) {
  std::vector<uint8_t> a = initial.states(), b = initial.states();
  const size_t nq = regions.size();
  std::vector<int32_t> diff_in(nq, 0);
  std::vector<uint8_t> cross_a(nq), cross_b(nq), dirty_a(nq, 0), dirty_b(nq, 0);
  for (size_t q = 0; q < nq; ++q) cross_a[q] = cross_b[q] = region_connected(regions[q], a, true, 0, 2);
  std::vector<uint32_t> mark(nq, 0);
  uint32_t gen = 0;
  std::vector<int32_t> touched;
  size_t k = 0;
  const auto& rings = clocks.rings;
  while (k < rings.size()) {
    const double t = rings[k].time;
    ++gen;
    touched.clear();
    for (; k < rings.size() && rings[k].time == t; ++k) {
      const ClockRing& r = rings[k];
      const int32_t s = r.site;
      const bool was = a[s] != b[s];
      const bool ca = a[s] != r.state, cb = keep[s] && b[s] != r.state;
      if (!ca && !cb) continue;
      if (ca) a[s] = r.state;
      if (cb) b[s] = r.state;
      const bool now = a[s] != b[s];
      for (int32_t h = index.start[s]; h < index.start[s + 1]; ++h) {
        const int32_t q = index.quad[h];
        diff_in[q] += static_cast<int>(now) - static_cast<int>(was);
        if (ca && (r.state != 0) != (cross_a[q] != 0)) dirty_a[q] = 1;
        if (cb && (r.state != 0) != (cross_b[q] != 0)) dirty_b[q] = 1;
        if (mark[q] != gen) {
          mark[q] = gen;
          touched.push_back(q);
        }
      }
    }
    for (int32_t q : touched) {
      if (dirty_a[q]) cross_a[q] = region_connected(regions[q], a, true, 0, 2);
      if (diff_in[q] == 0) {
        cross_b[q] = cross_a[q];
      } else if (dirty_b[q]) {
        cross_b[q] = region_connected(regions[q], b, true, 0, 2);
      }
      dirty_a[q] = dirty_b[q] = 0;
      if (cross_a[q] != cross_b[q]) return true;
    }
  }
  return false;
}

}  // namespace

StabilityProfile stability_profile(double eta, double alpha4, const std::vector<double>& eps_list, double T, int k,
                                   int64_t trials, const RngSpec& spec, int threads, int64_t budget) {
  require(!eps_list.empty(), "need at least one eps");
  for (double e : eps_list) require(e > eta, "eps must exceed the mesh");
  require(T >= 0, "horizon must be nonnegative");
  require(trials >= 1, "need at least one trial");
  const Rect unit{0, 0, 1, 1};
  GridPtr grid = build_grid(unit, eta);
  const QuadFamily fam = enumerate_quads(k, unit, budget);
  std::vector<QuadRegion> regions;
  for (const Quad& q : fam.quads) regions.push_back(discretize(grid, q));
  const QuadIndex index(grid->size(), regions);
  const RateSpec rate = RateSpec::make(eta, alpha4);
  const size_t ne = eps_list.size();
  std::vector<uint8_t> dis(trials * ne);
  std::vector<double> sizes(trials * ne);
  parallel_for(trials, threads, [&](int64_t t) {
    const SiteConfig init = sample_critical(grid, spec.substream(2 * t));
    const ClockStream clocks = sample_clocks(*grid, T, rate, spec.substream(2 * t + 1));
    std::vector<uint8_t> keep(grid->size());
    for (size_t m = 0; m < ne; ++m) {
      const PivotalSet set = epsilon_important(init, eps_list[m]);
      std::fill(keep.begin(), keep.end(), 0);
      for (int32_t s : set.sites) keep[s] = 1;
      sizes[t * ne + m] = static_cast<double>(set.size());
      dis[t * ne + m] = replays_disagree(init, clocks, keep, regions, index);
    }
  });
  StabilityProfile out;
  out.eta = eta;
  out.T = T;
  out.level = k;
  out.quads = static_cast<int64_t>(regions.size());
  std::vector<double> xs;
  std::vector<Estimate> est;
  for (size_t m = 0; m < ne; ++m) {
    int64_t hits = 0;
    double sz = 0;
    for (int64_t t = 0; t < trials; ++t) {
      hits += dis[t * ne + m];
      sz += sizes[t * ne + m];
    }
    StabilityPoint p;
    p.eps = eps_list[m];
    p.disagreement = binomial_estimate(hits, trials);
    p.mean_important = sz / trials;
    out.points.push_back(p);
    xs.push_back(p.eps);
    est.push_back(p.disagreement);
  }
  out.fit = binomial_fit(xs, est, 400, spec.substream(2 * trials + 1));
  return out;
}

std::vector<double> ExceptionalMoments::ratio() const {
  std::vector<double> r;
  for (size_t k = 0; k < first.size(); ++k)
    r.push_back(first[k].mean > 0 ? second[k].mean / (first[k].mean * first[k].mean) : 0);
  return r;
}

ExceptionalMoments exceptional_moments(double eta, double alpha4, const std::vector<double>& R_list,
                                       int64_t samples, const RngSpec& spec, int threads, double rate_scale) {
  require(!R_list.empty(), "need at least one radius");
  require(rate_scale >= 0, "rate scale must be nonnegative");
  for (double R : R_list) require(R > 1, "radii must exceed the unit inner box");
  require(eta < 1, "mesh must be below the inner box size");
  const double Rmax = *std::max_element(R_list.begin(), R_list.end());
  GridPtr grid = build_grid(Rect::square({0, 0}, Rmax + 2 * eta), eta);
  const LatticeGrid& g = *grid;
  const Point o{0, 0};
  const double tol = g.tolerance();
  auto supnorm = [&](Point p) { return std::max(std::abs(p.x - o.x), std::abs(p.y - o.y)); };
  // Reach of a site: largest sup-distance of its lattice neighbors.
  std::vector<double> reach(g.size());
  std::vector<uint8_t> inside(g.size());
  std::vector<int32_t> inner;
  for (int32_t s = 0; s < g.size(); ++s) {
    inside[s] = supnorm(g.position(s)) <= Rmax + tol;
    if (supnorm(g.position(s)) <= 1 + tol) inner.push_back(s);
    double m = 0;
    for (int d = 0; d < 6; ++d) m = std::max(m, supnorm(g.point_of(neighbor_of(g.axial(s), d))));
    reach[s] = m;
  }
  RateSpec rate = RateSpec::make(eta, alpha4);
  rate.rate *= rate_scale;
  const size_t nr = R_list.size();
  std::vector<double> x1(samples * nr), x0(samples * nr);
  parallel_for(samples, threads, [&](int64_t k) {
    SiteConfig c = sample_critical(grid, spec.substream(2 * k));
    const ClockStream clocks = sample_clocks(g, 1.0, rate, spec.substream(2 * k + 1));
    StampSet in_cluster(g.size());
    std::vector<int32_t> queue;
    // Explores from the queued sites and returns the largest reach found.
    auto grow = [&](double m) {
      for (size_t h = 0; h < queue.size(); ++h) {
        const int32_t s = queue[h];
        m = std::max(m, reach[s]);
        for (int32_t n : g.neighbors(s))
          if (n >= 0 && inside[n] && c.open(n) && in_cluster.Insert(n)) queue.push_back(n);
      }
      return m;
    };
    // Largest reach over the open clusters meeting the inner box.
    auto measure = [&]() {
      in_cluster.Clear();
      queue.clear();
      for (int32_t n : inner)
        if (c.open(n) && in_cluster.Insert(n)) queue.push_back(n);
      return grow(0.0);
    };
    auto near_cluster = [&](int32_t s) {
      if (in_cluster.Contains(s) || supnorm(g.position(s)) <= 1 + tol) return true;
      for (int32_t n : g.neighbors(s))
        if (n >= 0 && in_cluster.Contains(n)) return true;
      return false;
    };
    double m = measure();
    for (size_t r = 0; r < nr; ++r) x0[k * nr + r] = m > R_list[r] + tol;
    std::vector<double> acc(nr, 0);
    double last = 0;
    for (const ClockRing& ring : clocks.rings) {
      if (c.open(ring.site) == (ring.state != 0)) continue;
      for (size_t r = 0; r < nr; ++r) acc[r] += (m > R_list[r] + tol) * (ring.time - last);
      last = ring.time;
      c.set(ring.site, ring.state != 0);
      if (!near_cluster(ring.site)) continue;
      if (ring.state != 0 && inside[ring.site] && in_cluster.Insert(ring.site)) {
        queue.assign(1, ring.site);  // an opening only grows the cluster
        m = grow(m);
      } else if (ring.state == 0 && in_cluster.Contains(ring.site)) {
        m = measure();
      }
    }
    for (size_t r = 0; r < nr; ++r) x1[k * nr + r] = acc[r] + (m > R_list[r] + tol) * (1.0 - last);
  });
  ExceptionalMoments out;
  out.eta = eta;
  out.rate = rate.rate;
  out.R = R_list;
  for (size_t r = 0; r < nr; ++r) {
    std::vector<double> a(samples), b(samples);
    int64_t hits = 0;
    for (int64_t k = 0; k < samples; ++k) {
      a[k] = x1[k * nr + r];
      b[k] = a[k] * a[k];
      hits += x0[k * nr + r] > 0;
    }
    out.first.push_back(mean_estimate(a));
    out.second.push_back(mean_estimate(b));
    out.one_arm.push_back(binomial_estimate(hits, samples));
  }
  return out;
}

// ---------------------------------------------------------------------------

double hull_width(const SiteConfig& config, const std::vector<int32_t>& hull) {
  if (hull.empty()) return 0;
  const LatticeGrid& g = config.grid();
  double s = 0;
  for (int32_t v : hull) {
    const double y = g.position(v).y;
    s += y * y;
  }
  return std::sqrt(s / hull.size()) / g.eta();
}

FrontWidth front_width(const std::vector<double>& n_list, int64_t samples, const RngSpec& spec, int threads,
                       double h) {
  require(!n_list.empty(), "need at least one n");
  require(h > 0 && h <= 0.5, "band half-height must lie in (0, 1/2]");
  FrontWidth out;
  out.n = n_list;
  std::vector<std::vector<double>> reps;
  for (size_t m = 0; m < n_list.size(); ++m) {
    require(n_list[m] >= 2, "n must be at least 2");
    GridPtr grid = build_grid({0, -h, 1, h}, 1 / n_list[m]);
    RateSpec rate;
    rate.eta = 1 / n_list[m];
    rate.rate = 1;
    std::vector<double> w(samples);
    parallel_for(samples, threads, [&](int64_t k) {
      const SiteConfig c = gradient_config(grid, rate, spec.substream(m * samples + k));
      w[k] = hull_width(c, front_hull(c));
    });
    out.width.push_back(mean_estimate(w));
    reps.push_back(std::move(w));
  }
  out.fit = replica_fit(n_list, reps, 400, spec.substream(n_list.size() * samples + 1));
  return out;
}

}  // namespace nearcrit
