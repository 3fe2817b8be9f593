#include "nearcrit/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nearcrit/error.hpp"

namespace nearcrit {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

std::string header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) +
         "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n";
}

}  // namespace

std::string render_config_svg(const SiteConfig& config, const ConfigStyle& style) {
  require(style.width > 0, "width must be positive");
  const LatticeGrid& g = config.grid();
  const double eta = g.eta();
  const double pad = eta;
  const Rect d = g.domain();
  const double scale = style.width / (d.width() + 2 * pad);
  const double height = (d.height() + 2 * pad) * scale;
  auto X = [&](double x) { return (x - d.x0 + pad) * scale; };
  auto Y = [&](double y) { return (d.y1 + pad - y) * scale; };
  const double rad = eta / std::sqrt(3.0);
  auto hexagon = [&](Point c) {
    std::string pts;
    for (int k = 0; k < 6; ++k) {
      const double a = M_PI / 6 + k * M_PI / 3;
      if (k) pts += ' ';
      pts += num(X(c.x + rad * std::cos(a))) + "," + num(Y(c.y + rad * std::sin(a)));
    }
    return pts;
  };
  std::string s = header(style.width, height);
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<g stroke=\"none\">\n";
  for (int32_t site = 0; site < g.size(); ++site)
    s += "<polygon points=\"" + hexagon(g.position(site)) + "\" fill=\"" +
         (config.open(site) ? style.open_color : style.closed_color) + "\"/>\n";
  s += "</g>\n";
  if (!style.highlight.empty()) {
    s += "<g id=\"witness\" fill=\"none\" stroke=\"#e8a33d\" stroke-width=\"" + num(std::max(1.0, 0.15 * eta * scale)) +
         "\">\n";
    for (int32_t site : style.highlight) {
      require(site >= 0 && site < g.size(), "highlighted site out of range");
      s += "<polygon points=\"" + hexagon(g.position(site)) + "\"/>\n";
    }
    s += "</g>\n";
  }
  if (!style.pivotal.empty()) {
    s += "<g id=\"pivotal\" fill=\"#c0392b\">\n";
    for (int32_t site : style.pivotal) {
      require(site >= 0 && site < g.size(), "pivotal site out of range");
      const Point p = g.position(site);
      s += "<circle cx=\"" + num(X(p.x)) + "\" cy=\"" + num(Y(p.y)) + "\" r=\"" +
           num(std::max(1.0, 0.3 * eta * scale)) + "\"/>\n";
    }
    s += "</g>\n";
  }
  for (const auto& line : style.polylines) {
    s += "<polyline fill=\"none\" stroke=\"#2e8b57\" stroke-width=\"" + num(std::max(1.0, 0.2 * eta * scale)) +
         "\" points=\"";
    for (size_t k = 0; k < line.size(); ++k) {
      if (k) s += ' ';
      s += num(X(line[k].x)) + "," + num(Y(line[k].y));
    }
    s += "\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string render_loglog_svg(const ExponentFit& fit, const std::string& title, const std::string& xlabel,
                              const std::string& ylabel, double width, double height) {
  require(width > 100 && height > 100, "plot must be at least 100 pixels each way");
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  std::string s = header(width, height);
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
       escape(title) + "</text>\n";
  s += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(width - ml - mr) + "\" height=\"" +
       num(height - mt - mb) + "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"" + num(width / 2) + "\" y=\"" + num(height - 12) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + escape(xlabel) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num(height / 2) + "\" transform=\"rotate(-90 16 " + num(height / 2) +
       ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + escape(ylabel) + "</text>\n";
  std::vector<double> lx, ly;
  for (size_t k = 0; k < fit.x.size(); ++k)
    if (fit.x[k] > 0 && fit.y[k] > 0) {
      lx.push_back(std::log(fit.x[k]));
      ly.push_back(std::log(fit.y[k]));
    }
  if (lx.empty()) {
    s += "</svg>\n";
    return s;
  }
  double x0 = *std::min_element(lx.begin(), lx.end()), x1 = *std::max_element(lx.begin(), lx.end());
  double y0 = *std::min_element(ly.begin(), ly.end()), y1 = *std::max_element(ly.begin(), ly.end());
  if (fit.valid) {
    y0 = std::min({y0, fit.intercept + fit.slope * x0, fit.intercept + fit.slope * x1});
    y1 = std::max({y1, fit.intercept + fit.slope * x0, fit.intercept + fit.slope * x1});
  }
  const double dx = std::max(x1 - x0, 1e-9), dy = std::max(y1 - y0, 1e-9);
  x0 -= 0.05 * dx;
  x1 += 0.05 * dx;
  y0 -= 0.05 * dy;
  y1 += 0.05 * dy;
  auto X = [&](double v) { return ml + (v - x0) / (x1 - x0) * (width - ml - mr); };
  auto Y = [&](double v) { return height - mb - (v - y0) / (y1 - y0) * (height - mt - mb); };
  s += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (size_t k = 0; k < lx.size(); ++k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", std::exp(lx[k]));
    s += "<text x=\"" + num(X(lx[k])) + "\" y=\"" + num(height - mb + 15) + "\" text-anchor=\"middle\">" + buf +
         "</text>\n";
  }
  for (double v : {y0, y1}) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", std::exp(v));
    s += "<text x=\"" + num(ml - 5) + "\" y=\"" + num(Y(v) + 4) + "\" text-anchor=\"end\">" + buf + "</text>\n";
  }
  s += "</g>\n";
  if (fit.valid) {
    s += "<line x1=\"" + num(X(x0)) + "\" y1=\"" + num(Y(fit.intercept + fit.slope * x0)) + "\" x2=\"" + num(X(x1)) +
         "\" y2=\"" + num(Y(fit.intercept + fit.slope * x1)) + "\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "slope %.4f [%.4f, %.4f]", fit.slope, fit.ci_low, fit.ci_high);
    s += "<text x=\"" + num(width - mr - 8) + "\" y=\"" + num(mt + 18) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" + buf + "</text>\n";
  }
  s += "<g fill=\"#1f4e79\">\n";
  for (size_t k = 0; k < lx.size(); ++k)
    s += "<circle cx=\"" + num(X(lx[k])) + "\" cy=\"" + num(Y(ly[k])) + "\" r=\"4\"/>\n";
  s += "</g>\n</svg>\n";
  return s;
}

}  // namespace nearcrit
