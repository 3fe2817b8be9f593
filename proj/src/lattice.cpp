#include "nearcrit/lattice.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>
#include "nearcrit/error.hpp"

namespace nearcrit {

LatticeGrid::LatticeGrid(const Rect& domain, double eta) : domain_(domain), eta_(eta) {
  if (!(eta > 0) || !std::isfinite(eta)) throw InvalidParameter("mesh eta must be positive and finite");
  if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0) || !std::isfinite(domain.x0) ||
      !std::isfinite(domain.x1) || !std::isfinite(domain.y0) || !std::isfinite(domain.y1))
    throw InvalidParameter("domain must be a nondegenerate finite rectangle");
  const double tol = tolerance();
  const double h = eta * kSqrt3 / 2;
  const double jlo = std::ceil((domain.y0 - tol) / h);
  const double jhi = std::floor((domain.y1 + tol) / h);
  if (jhi - jlo > 1e8) throw InvalidParameter("domain too large for mesh");
  jmin_ = static_cast<int>(jlo);
  const int rows = std::max(0, static_cast<int>(jhi - jlo) + 1);
  row_imin_.resize(rows);
  row_count_.resize(rows);
  row_offset_.resize(rows);
  int64_t total = 0;
  for (int r = 0; r < rows; ++r) {
    const int j = jmin_ + r;
    const double ilo = std::ceil((domain.x0 - tol) / eta - 0.5 * j);
    const double ihi = std::floor((domain.x1 + tol) / eta - 0.5 * j);
    row_imin_[r] = static_cast<int>(ilo);
    row_count_[r] = std::max(0, static_cast<int>(ihi - ilo) + 1);
    row_offset_[r] = static_cast<int32_t>(total);
    total += row_count_[r];
    if (total > std::numeric_limits<int32_t>::max() / 2) throw InvalidParameter("domain too large for mesh");
  }
  axial_.reserve(total);
  for (int r = 0; r < rows; ++r)
    for (int k = 0; k < row_count_[r]; ++k) axial_.push_back({row_imin_[r] + k, jmin_ + r});
  neighbors_.resize(total);
  for (int32_t s = 0; s < static_cast<int32_t>(total); ++s)
    for (int k = 0; k < 6; ++k) neighbors_[s][k] = index_of(neighbor_of(axial_[s], k));
}

int32_t LatticeGrid::index_of(Axial a) const {
  const int r = a.j - jmin_;
  if (r < 0 || r >= static_cast<int>(row_offset_.size())) return -1;
  const int k = a.i - row_imin_[r];
  if (k < 0 || k >= row_count_[r]) return -1;
  return row_offset_[r] + k;
}

int LatticeGrid::degree(int32_t site) const {
  int d = 0;
  for (int32_t n : neighbors_[site]) d += (n >= 0);
  return d;
}

Axial LatticeGrid::nearest_lattice_point(Point p) const {
  const double fj = p.y / (eta_ * kSqrt3 / 2);
  const double fi = p.x / eta_ - fj / 2;
  const double fs = -fi - fj;
  double ri = std::round(fi), rj = std::round(fj), rs = std::round(fs);
  const double di = std::abs(ri - fi), dj = std::abs(rj - fj), ds = std::abs(rs - fs);
  if (di > dj && di > ds)
    ri = -rj - rs;
  else if (dj > ds)
    rj = -ri - rs;
  return {static_cast<int>(ri), static_cast<int>(rj)};
}

int32_t LatticeGrid::nearest_site(Point p) const {
  int32_t s = index_of(nearest_lattice_point(p));
  if (s >= 0) return s;
  double best = std::numeric_limits<double>::infinity();
  for (int32_t k = 0; k < size(); ++k) {
    double d = dist(position(k), p);
    if (d < best) {
      best = d;
      s = k;
    }
  }
  return s;
}

std::vector<int32_t> LatticeGrid::sites_in(const Rect& r) const {
  std::vector<int32_t> out;
  const double tol = tolerance();
  const double h = eta_ * kSqrt3 / 2;
  const int jlo = std::max(row_min(), static_cast<int>(std::ceil((r.y0 - tol) / h)));
  const int jhi = std::min(row_max(), static_cast<int>(std::floor((r.y1 + tol) / h)));
  for (int j = jlo; j <= jhi; ++j) {
    const int row = j - jmin_;
    const int ilo = std::max(row_imin_[row], static_cast<int>(std::ceil((r.x0 - tol) / eta_ - 0.5 * j)));
    const int ihi = std::min(row_imin_[row] + row_count_[row] - 1,
                             static_cast<int>(std::floor((r.x1 + tol) / eta_ - 0.5 * j)));
    for (int i = ilo; i <= ihi; ++i) out.push_back(row_offset_[row] + (i - row_imin_[row]));
  }
  return out;
}

GridPtr build_grid(const Rect& domain, double eta) { return std::make_shared<const LatticeGrid>(domain, eta); }

SiteConfig::SiteConfig(GridPtr grid, uint8_t fill) : grid_(std::move(grid)), states_(grid_->size(), fill ? 1 : 0) {}

SiteConfig::SiteConfig(GridPtr grid, std::vector<uint8_t> states) : grid_(std::move(grid)), states_(std::move(states)) {
  if (static_cast<int64_t>(states_.size()) != grid_->size())
    throw InvalidParameter("state vector length must equal the grid site count");
  for (auto& s : states_) s = s ? 1 : 0;
}

int64_t SiteConfig::open_count() const {
  int64_t c = 0;
  for (uint8_t s : states_) c += s;
  return c;
}

MonotoneLabels::MonotoneLabels(GridPtr grid, std::vector<double> labels)
    : grid_(std::move(grid)), labels_(std::move(labels)) {
  if (static_cast<int64_t>(labels_.size()) != grid_->size())
    throw InvalidParameter("label vector length must equal the grid site count");
  for (double u : labels_)
    if (!(u >= 0 && u <= 1)) throw InvalidParameter("labels must lie in [0,1]");
}

SiteConfig sample_critical(const GridPtr& grid, const RngSpec& spec) {
  Rng rng(spec);
  SiteConfig c(grid);
  auto& st = c.states();
  const size_t n = st.size();
  for (size_t base = 0; base < n; base += 64) {
    uint64_t w = rng.bits();
    const size_t lim = std::min<size_t>(64, n - base);
    for (size_t k = 0; k < lim; ++k) st[base + k] = (w >> k) & 1u;
  }
  return c;
}

SiteConfig sample_bernoulli(const GridPtr& grid, double p, const RngSpec& spec) {
  if (!(p >= 0 && p <= 1)) throw InvalidParameter("p must lie in [0,1]");
  Rng rng(spec);
  SiteConfig c(grid);
  for (auto& s : c.states()) s = rng.uniform() <= p;
  return c;
}

MonotoneLabels sample_labels(const GridPtr& grid, const RngSpec& spec) {
  Rng rng(spec);
  std::vector<double> u(grid->size());
  for (auto& x : u) x = rng.uniform();
  return MonotoneLabels(grid, std::move(u));
}

SiteConfig threshold(const MonotoneLabels& labels, double p) {
  if (!(p >= 0 && p <= 1)) throw InvalidParameter("p must lie in [0,1]");
  SiteConfig c(labels.grid_ptr());
  auto& st = c.states();
  const auto& u = labels.labels();
  for (size_t k = 0; k < u.size(); ++k) st[k] = u[k] <= p;
  return c;
}

namespace detail {

void put_u32(std::ostream& out, uint32_t v) {
  char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
  out.write(b, 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw InvalidParameter("truncated binary input");
  uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<uint32_t>(b[k]) << (8 * k);
  return v;
}

uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw InvalidParameter("truncated binary input");
  uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<uint64_t>(b[k]) << (8 * k);
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace detail

void write_config(std::ostream& out, const SiteConfig& config) {
  const auto& g = config.grid();
  out.write("NCCF", 4);
  detail::put_u32(out, 1);
  detail::put_f64(out, g.domain().x0);
  detail::put_f64(out, g.domain().y0);
  detail::put_f64(out, g.domain().x1);
  detail::put_f64(out, g.domain().y1);
  detail::put_f64(out, g.eta());
  detail::put_u64(out, static_cast<uint64_t>(config.size()));
  std::vector<char> bytes((config.size() + 7) / 8, 0);
  for (int32_t s = 0; s < config.size(); ++s)
    if (config.open(s)) bytes[s / 8] = static_cast<char>(bytes[s / 8] | (1 << (s % 8)));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

SiteConfig read_config(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "NCCF") throw InvalidParameter("not a configuration file");
  if (detail::get_u32(in) != 1) throw InvalidParameter("unsupported configuration version");
  Rect d;
  d.x0 = detail::get_f64(in);
  d.y0 = detail::get_f64(in);
  d.x1 = detail::get_f64(in);
  d.y1 = detail::get_f64(in);
  const double eta = detail::get_f64(in);
  const uint64_t n = detail::get_u64(in);
  GridPtr grid = build_grid(d, eta);
  if (static_cast<uint64_t>(grid->size()) != n) throw InvalidParameter("site count does not match the rebuilt grid");
  std::vector<char> bytes((n + 7) / 8);
  if (!in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()))) throw InvalidParameter("truncated states");
  std::vector<uint8_t> st(n);
  for (uint64_t s = 0; s < n; ++s) st[s] = (static_cast<unsigned char>(bytes[s / 8]) >> (s % 8)) & 1u;
  return SiteConfig(grid, std::move(st));
}

std::string config_to_json(const SiteConfig& config) {
  const auto& g = config.grid();
  std::string bits(config.size(), '0');
  for (int32_t s = 0; s < config.size(); ++s)
    if (config.open(s)) bits[s] = '1';
  nlohmann::json j = {{"format", "nearcrit-config"},
                      {"version", 1},
                      {"domain", {g.domain().x0, g.domain().y0, g.domain().x1, g.domain().y1}},
                      {"eta", g.eta()},
                      {"sites", config.size()},
                      {"states", bits}};
  return j.dump();
}

SiteConfig config_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "nearcrit-config") throw InvalidParameter("not a configuration document");
  auto d = j.at("domain");
  GridPtr grid = build_grid({d[0].get<double>(), d[1].get<double>(), d[2].get<double>(), d[3].get<double>()},
                            j.at("eta").get<double>());
  const std::string bits = j.at("states").get<std::string>();
  if (static_cast<int64_t>(bits.size()) != grid->size()) throw InvalidParameter("state string length mismatch");
  std::vector<uint8_t> st(bits.size());
  for (size_t k = 0; k < bits.size(); ++k) st[k] = bits[k] == '1';
  return SiteConfig(grid, std::move(st));
}

}  // namespace nearcrit
