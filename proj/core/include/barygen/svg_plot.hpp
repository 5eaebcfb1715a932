#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace barygen {

/// One scatter layer: labelled points in a shared coordinate frame. Points
/// beyond two columns are projected onto the first two coordinates.
struct ScatterLayer {
  std::string label;
  std::string color;   // SVG color, e.g. "#ff7f0e"
  double radius = 2.0; // marker radius in pixels
  Eigen::MatrixXd points;
};

/// Static SVG scatter plot: white background, framed data box with light
/// grid lines, a legend from the layer labels. Output is well-formed XML.
void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::vector<ScatterLayer>& layers,
                       int width = 640, int height = 640);

/// Line chart of one series (e.g. a smoothed loss trace) against iteration.
void write_line_svg(const std::string& path, const std::string& title,
                    const std::vector<double>& values, int width = 640,
                    int height = 400);

}  // namespace barygen
