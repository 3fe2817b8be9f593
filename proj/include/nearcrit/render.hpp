#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nearcrit/analysis.hpp"
#include "nearcrit/geometry.hpp"
#include "nearcrit/lattice.hpp"

namespace nearcrit {

struct ConfigStyle {
  double width = 800;  // pixels; the height follows the domain aspect ratio
  std::string open_color = "#1f4e79";
  std::string closed_color = "#f4f1ea";
  std::vector<int32_t> pivotal;    // sites marked with dots
  std::vector<int32_t> highlight;  // sites outlined, e.g. a crossing witness
  std::vector<std::vector<Point>> polylines;
};

// Hexagonal cells of every site, colored by state, with the overlays of `style`.
// Output depends only on the inputs.
std::string render_config_svg(const SiteConfig& config, const ConfigStyle& style);

// Log-log scatter of the fitted points with the fitted line.
std::string render_loglog_svg(const ExponentFit& fit, const std::string& title, const std::string& xlabel,
                              const std::string& ylabel, double width = 640, double height = 480);

}  // namespace nearcrit
