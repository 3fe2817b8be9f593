#include "nearcrit/loewner.hpp"

#include <algorithm>
#include <cmath>

#include "nearcrit/analysis.hpp"
#include "nearcrit/dynamics.hpp"
#include "nearcrit/error.hpp"

namespace nearcrit {

using cplx = std::complex<double>;

namespace {

// Branch of a + sqrt(u) in the closed upper half-plane; on the real line the
// sign follows the side of `side`.
cplx upper_root(cplx u, double side) {
  cplx s = std::sqrt(u);
  if (s.imag() < 0 || (s.imag() == 0 && (s.real() > 0) != (side > 0))) s = -s;
  return s;
}

cplx slit_map(cplx z, double a, double b) {
  const cplx d = z - a;
  return a + upper_root(d * d + b * b, d.real());
}

cplx slit_inverse(cplx z, double a, double b) {
  const cplx d = z - a;
  return a + upper_root(d * d - b * b, d.real());
}

}  // namespace

Interface trace_interface(const SiteConfig& config, int64_t max_steps) {
  const LatticeGrid& g = config.grid();
  const double eta = g.eta();
  const double top = g.domain().y1;
  const double tol = g.tolerance();
  Interface out;
  // 0 closed, 1 open, 2 above the top.
  auto color = [&](Axial a) -> int {
    if (a.j <= 0) return a.i < 0 ? 1 : 0;
    const int32_t s = g.index_of(a);
    if (s >= 0) return config.open(s) ? 1 : 0;
    const Point p = g.point_of(a);
    if (p.y > top + tol) return 2;
    return p.x < -eta / 2 ? 1 : 0;
  };
  auto center = [&](Axial a, Axial b, Axial c) {
    const Point pa = g.point_of(a), pb = g.point_of(b), pc = g.point_of(c);
    return Point{(pa.x + pb.x + pc.x) / 3, (pa.y + pb.y + pc.y) / 3};
  };
  Axial L{-1, 0}, R{0, 0};
  int k = 0;  // R = L + offset k
  out.path.push_back({-eta / 2, 0});
  for (int64_t step = 0; step < max_steps; ++step) {
    const Axial H = neighbor_of(L, (k + 1) % 6);
    const int c = color(H);
    if (c == 2) {
      out.reached_top = true;
      break;
    }
    out.path.push_back(center(L, R, H));
    if (c == 1) {
      L = H;
      k = (k + 5) % 6;
    } else {
      R = H;
      k = (k + 1) % 6;
    }
  }
  return out;
}

size_t DrivingFunction::index_at(double s) const {
  const auto it = std::upper_bound(t.begin(), t.end(), s);
  return it == t.begin() ? 0 : static_cast<size_t>(it - t.begin()) - 1;
}

DrivingFunction loewner_drive(const std::vector<Point>& gamma, double step, double t_max) {
  require(!gamma.empty(), "curve must have at least one point");
  require(step >= 0, "capacity step must be nonnegative");
  DrivingFunction d;
  const Point root = gamma[0];
  require(std::abs(root.y) <= 1e-12 * (1 + std::abs(root.x)), "curve must start on the real line");
  for (const Point& p : gamma) d.gamma.push_back(p - root);
  d.t.push_back(0);
  d.W.push_back(0);
  d.tip.push_back(0);
  std::vector<double> A, B;
  for (size_t v = 1; v < d.gamma.size(); ++v) {
    cplx w(d.gamma[v].x, d.gamma[v].y);
    if (d.gamma[v].y > 0)
      for (size_t m = 0; m < A.size(); ++m) w = slit_map(w, A[m], B[m]);
    const double b = std::max(0.0, w.imag());
    if (b == 0) {
      d.truncated = true;
      d.warning = "curve touches the real line at point " + std::to_string(v);
      break;
    }
    const double dt = b * b / 4;
    if (d.t.back() + dt == d.t.back()) continue;
    if (dt < step && v + 1 < d.gamma.size()) continue;
    A.push_back(w.real());
    B.push_back(b);
    d.t.push_back(d.t.back() + dt);
    d.W.push_back(w.real());
    d.tip.push_back(static_cast<int64_t>(v));
    if (d.t.back() >= t_max) break;
  }
  return d;
}

std::vector<Point> loewner_trace(const DrivingFunction& drive) {
  std::vector<Point> out{{0, 0}};
  std::vector<double> A, B;
  for (size_t k = 1; k < drive.t.size(); ++k) {
    const double dt = drive.t[k] - drive.t[k - 1];
    require(dt > 0, "driving times must increase");
    A.push_back(drive.W[k]);
    B.push_back(2 * std::sqrt(dt));
    cplx z(A.back(), B.back());
    for (size_t m = A.size() - 1; m-- > 0;) z = slit_inverse(z, A[m], B[m]);
    out.push_back({z.real(), z.imag()});
  }
  return out;
}

double drift_sum(const DrivingFunction& drive, const std::vector<double>& partition, double d1, double d2) {
  double s = 0;
  for (size_t k = 0; k + 1 < partition.size(); ++k) {
    require(partition[k + 1] >= partition[k], "partition must be sorted");
    const size_t a = drive.index_at(partition[k]), b = drive.index_at(partition[k + 1]);
    const double dg = dist(drive.gamma[drive.tip[a]], drive.gamma[drive.tip[b]]);
    const double dw = std::abs(drive.W[b] - drive.W[a]);
    s += std::pow(dg, d1) * std::pow(dw, d2);
  }
  return s;
}

bool ExponentPair::quadratic_identity() const {
  // 14 + (2 n1 + n2)^2 / den^2 = (15 n1 + 9 n2) / den, scaled by den^2.
  const int64_t q = 2 * n1 + n2;
  return 14 * den * den + q * q == (15 * n1 + 9 * n2) * den;
}

bool ExponentPair::linear_identity() const { return 4 * (n1 + n2) == 7 * den; }

double hausdorff_distance(const std::vector<Point>& a, const std::vector<Point>& b) {
  auto one_way = [](const std::vector<Point>& x, const std::vector<Point>& y) {
    double worst = 0;
    for (const Point& p : x) {
      double best = INFINITY;
      for (const Point& q : y) best = std::min(best, dist(p, q));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_way(a, b), one_way(b, a));
}

DriftEnsemble drift_ensemble(double lambda, double rate, double L, double t_max, double step, int grid_points,
                             int64_t samples, const RngSpec& spec, int threads) {
  require(L >= 2, "box must span at least two lattice units");
  require(t_max > 0 && grid_points >= 2, "need a positive horizon and at least two grid points");
  require(samples >= 2, "need at least two samples");
  const double p = nearcritical_p(lambda, rate);
  GridPtr grid = build_grid({-L, 0.5, L, L}, 1.0);
  DriftEnsemble e;
  e.lambda = lambda;
  e.samples = samples;
  for (int j = 1; j <= grid_points; ++j) e.t.push_back(t_max * j / grid_points);
  const int levels = 3;
  std::vector<std::vector<double>> w(samples, std::vector<double>(grid_points, 0));
  std::vector<double> wT(samples), aT(samples), qv(samples);
  std::vector<std::vector<double>> refine(samples, std::vector<double>(levels, 0));
  std::vector<uint8_t> censored(samples, 0);
  parallel_for(samples, threads, [&](int64_t k) {
    const SiteConfig c = sample_bernoulli(grid, p, spec.substream(k));
    const Interface it = trace_interface(c);
    const DrivingFunction d = loewner_drive(it.path, step, t_max);
    censored[k] = d.t.back() < t_max;
    double prev = 0;
    for (int j = 0; j < grid_points; ++j) {
      w[k][j] = d.value_at(e.t[j]);
      qv[k] += (w[k][j] - prev) * (w[k][j] - prev);
      prev = w[k][j];
    }
    wT[k] = d.value_at(t_max);
    aT[k] = drift_sum(d, d.t, 0.75, 1.0);
    for (int l = 0; l < levels; ++l) {
      const int n = grid_points << l;
      std::vector<double> part;
      for (int j = 0; j <= n; ++j) part.push_back(t_max * j / n);
      refine[k][l] = drift_sum(d, part, 0.75, 1.0);
    }
  });
  std::vector<double> inc;
  double sxy = 0, sxx = 0;
  for (int64_t k = 0; k < samples; ++k) {
    e.censored += censored[k];
    e.mean_W += wT[k] / samples;
    e.mean_A += aT[k] / samples;
    e.quadratic_variation += qv[k] / samples / t_max;
    sxy += wT[k] * aT[k];
    sxx += aT[k] * aT[k];
    double prev = 0;
    for (int j = 0; j < grid_points; ++j) {
      inc.push_back(w[k][j] - prev);
      prev = w[k][j];
    }
  }
  e.second.assign(grid_points, 0);
  for (int j = 0; j < grid_points; ++j)
    for (int64_t k = 0; k < samples; ++k) e.second[j] += w[k][j] * w[k][j] / samples;
  double num = 0, den = 0;
  for (int j = 0; j < grid_points; ++j) {
    num += e.t[j] * e.second[j];
    den += e.t[j] * e.t[j];
  }
  e.variance_slope = num / den;
  if (sxx > 0) {
    e.drift = sxy / sxx;
    double rss = 0;
    for (int64_t k = 0; k < samples; ++k) rss += (wT[k] - e.drift * aT[k]) * (wT[k] - e.drift * aT[k]);
    e.drift_se = std::sqrt(rss / (samples - 1) / sxx);
  }
  double m2 = 0, m4 = 0;
  for (double x : inc) m2 += x * x / inc.size();
  for (double x : inc) m4 += x * x * x * x / inc.size();
  e.excess_kurtosis = m2 > 0 ? m4 / (m2 * m2) - 3 : 0;
  e.refinement.assign(levels, 0);
  for (int l = 0; l < levels; ++l)
    for (int64_t k = 0; k < samples; ++k) e.refinement[l] += refine[k][l] / samples;
  return e;
}

DriftReport drift_conjecture_test(double lambda, double rate, double L, double t_max, double step, int grid_points,
                                  int64_t samples, const RngSpec& spec, int threads) {
  DriftReport r;
  r.perturbed = drift_ensemble(lambda, rate, L, t_max, step, grid_points, samples, spec.substream(0), threads);
  r.control = drift_ensemble(0, rate, L, t_max, step, grid_points, samples, spec.substream(1), threads);
  r.c_hat = lambda != 0 ? r.perturbed.drift / lambda : 0;
  return r;
}

}  // namespace nearcrit
