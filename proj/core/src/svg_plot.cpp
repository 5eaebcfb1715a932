#include "barygen/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace barygen {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Bounds {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;

  void widen() {
    const double dx = std::max(xmax - xmin, 1e-9);
    const double dy = std::max(ymax - ymin, 1e-9);
    xmin -= 0.05 * dx;
    xmax += 0.05 * dx;
    ymin -= 0.05 * dy;
    ymax += 0.05 * dy;
  }
};

}  // namespace

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::vector<ScatterLayer>& layers, int width,
                       int height) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_scatter_svg: cannot open " + path);

  Bounds b;
  bool any = false;
  for (const auto& layer : layers) {
    if (layer.points.rows() == 0) continue;
    const auto x = layer.points.col(0);
    const auto y = layer.points.cols() > 1 ? layer.points.col(1)
                                           : layer.points.col(0);
    if (!any) {
      b.xmin = x.minCoeff();
      b.xmax = x.maxCoeff();
      b.ymin = y.minCoeff();
      b.ymax = y.maxCoeff();
      any = true;
    } else {
      b.xmin = std::min(b.xmin, x.minCoeff());
      b.xmax = std::max(b.xmax, x.maxCoeff());
      b.ymin = std::min(b.ymin, y.minCoeff());
      b.ymax = std::max(b.ymax, y.maxCoeff());
    }
  }
  b.widen();

  const double margin = 40.0;
  const double plot_w = width - 2.0 * margin;
  const double plot_h = height - 2.0 * margin;
  const auto sx = [&](double v) {
    return margin + (v - b.xmin) / (b.xmax - b.xmin) * plot_w;
  };
  const auto sy = [&](double v) {
    return height - margin - (v - b.ymin) / (b.ymax - b.ymin) * plot_h;
  };

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";

  // Frame and a light 4x4 grid.
  out << "<rect x=\"" << fmt(margin) << "\" y=\"" << fmt(margin)
      << "\" width=\"" << fmt(plot_w) << "\" height=\"" << fmt(plot_h)
      << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  for (int i = 1; i < 4; ++i) {
    const double gx = margin + plot_w * i / 4.0;
    const double gy = margin + plot_h * i / 4.0;
    out << "<line x1=\"" << fmt(gx) << "\" y1=\"" << fmt(margin) << "\" x2=\""
        << fmt(gx) << "\" y2=\"" << fmt(margin + plot_h)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << fmt(margin) << "\" y1=\"" << fmt(gy) << "\" x2=\""
        << fmt(margin + plot_w) << "\" y2=\"" << fmt(gy)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
  }

  for (const auto& layer : layers) {
    out << "<g fill=\"" << xml_escape(layer.color) << "\" fill-opacity=\"0.7\">\n";
    for (Eigen::Index i = 0; i < layer.points.rows(); ++i) {
      const double px = layer.points(i, 0);
      const double py = layer.points.cols() > 1 ? layer.points(i, 1) : px;
      out << "<circle cx=\"" << fmt(sx(px)) << "\" cy=\"" << fmt(sy(py))
          << "\" r=\"" << fmt(layer.radius) << "\"/>\n";
    }
    out << "</g>\n";
  }

  double legend_y = margin + 14.0;
  for (const auto& layer : layers) {
    out << "<circle cx=\"" << fmt(margin + 10.0) << "\" cy=\""
        << fmt(legend_y - 4.0) << "\" r=\"4\" fill=\""
        << xml_escape(layer.color) << "\"/>\n";
    out << "<text x=\"" << fmt(margin + 20.0) << "\" y=\"" << fmt(legend_y)
        << "\" font-family=\"sans-serif\" font-size=\"12\">"
        << xml_escape(layer.label) << "</text>\n";
    legend_y += 16.0;
  }
  out << "</svg>\n";
}

void write_line_svg(const std::string& path, const std::string& title,
                    const std::vector<double>& values, int width, int height) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_line_svg: cannot open " + path);

  double vmin = 0.0, vmax = 1.0;
  if (!values.empty()) {
    vmin = vmax = values.front();
    for (double v : values) {
      if (std::isfinite(v)) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
      }
    }
  }
  if (vmax - vmin < 1e-12) vmax = vmin + 1e-12;

  const double margin = 40.0;
  const double plot_w = width - 2.0 * margin;
  const double plot_h = height - 2.0 * margin;

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";
  out << "<rect x=\"" << fmt(margin) << "\" y=\"" << fmt(margin)
      << "\" width=\"" << fmt(plot_w) << "\" height=\"" << fmt(plot_h)
      << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";

  if (values.size() >= 2) {
    out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" "
           "points=\"";
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) continue;
      const double px =
          margin + plot_w * double(i) / double(values.size() - 1);
      const double py =
          height - margin - (values[i] - vmin) / (vmax - vmin) * plot_h;
      out << fmt(px) << "," << fmt(py) << " ";
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace barygen
