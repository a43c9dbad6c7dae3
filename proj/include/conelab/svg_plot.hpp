#pragma once

// Static SVG line plots with a logarithmic x axis.

#include <string>
#include <vector>

namespace conelab {

struct PlotSeries {
  std::string label;
  std::vector<double> x;  // positive
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  // Horizontal reference line (drawn when finite).
  double reference = 0.0;
  bool draw_reference = true;
};

std::string render_svg(const PlotSpec& spec);

// Throws std::runtime_error when the file cannot be written.
void write_svg(const PlotSpec& spec, const std::string& path);

}  // namespace conelab
