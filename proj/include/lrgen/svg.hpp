#pragma once

// Static SVG emission: route maps over the unit square and density heatmaps
// of a depot distribution (summed 2x2 marginals of each coordinate pair,
// evaluated in sigmoid space with the change-of-variables Jacobian).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "cost.hpp"
#include "dgm.hpp"
#include "instance.hpp"
#include "io.hpp"
#include "solution.hpp"

namespace lrgen {

namespace detail {

inline constexpr int kPlotSize = 600;
inline constexpr int kPlotMargin = 24;

inline double plot_x(double x) {
  return kPlotMargin + x * (kPlotSize - 2 * kPlotMargin);
}
inline double plot_y(double y) {
  return kPlotSize - kPlotMargin - y * (kPlotSize - 2 * kPlotMargin);
}

inline const char* route_color(int k) {
  static const char* palette[] = {"#c0392b", "#2980b9", "#27ae60", "#8e44ad",
                                  "#d35400", "#16a085", "#7f8c8d", "#f39c12",
                                  "#2c3e50", "#e84393"};
  return palette[k % 10];
}

inline std::string svg_open() {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(kPlotSize) + "\" height=\"" + std::to_string(kPlotSize) +
         "\" viewBox=\"0 0 " + std::to_string(kPlotSize) + " " +
         std::to_string(kPlotSize) + "\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace detail

// Routes as polylines, depots as squares, customers as demand-scaled dots.
inline std::string render_route_map(const Instance& inst,
                                    const RoutePlan& plan) {
  using detail::plot_x;
  using detail::plot_y;
  std::string svg = detail::svg_open();
  svg += "<rect x=\"" + render_double(plot_x(0)) + "\" y=\"" +
         render_double(plot_y(1)) + "\" width=\"" +
         render_double(plot_x(1) - plot_x(0)) + "\" height=\"" +
         render_double(plot_y(0) - plot_y(1)) +
         "\" fill=\"none\" stroke=\"#cccccc\"/>\n";

  for (const Route& r : plan.routes) {
    if (r.stops.empty()) continue;
    std::string pts;
    const Position& dp = inst.depots[r.depot].pos;
    pts += render_double(plot_x(dp.x)) + "," + render_double(plot_y(dp.y));
    for (int v : r.stops) {
      const Position& p = inst.vertex_pos(v);
      pts += " " + render_double(plot_x(p.x)) + "," +
             render_double(plot_y(p.y));
    }
    pts += " " + render_double(plot_x(dp.x)) + "," +
           render_double(plot_y(dp.y));
    svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" +
           detail::route_color(r.depot) + "\" stroke-width=\"1.5\"/>\n";
  }
  for (const Customer& c : inst.customers) {
    const double radius = 2.0 + 0.4 * c.demand;
    svg += "<circle cx=\"" + render_double(plot_x(c.pos.x)) + "\" cy=\"" +
           render_double(plot_y(c.pos.y)) + "\" r=\"" + render_double(radius) +
           "\" fill=\"#34495e\" fill-opacity=\"0.8\"/>\n";
  }
  for (std::size_t k = 0; k < inst.depots.size(); ++k) {
    const Position& p = inst.depots[k].pos;
    svg += "<rect x=\"" + render_double(plot_x(p.x) - 6) + "\" y=\"" +
           render_double(plot_y(p.y) - 6) +
           "\" width=\"12\" height=\"12\" fill=\"" +
           detail::route_color(static_cast<int>(k)) +
           "\" stroke=\"black\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

// Density over the unit square: for each depot k, the (x_k, y_k) pair's 2x2
// marginal of the pre-sigmoid normal, transformed to sigmoid space via the
// logit Jacobian; summed over depots. Row-major grid, row 0 at y near 0.
inline std::vector<double> gaussian_density_grid(const DepotDistribution& dist,
                                                 int resolution) {
  invariant(resolution >= 2, "density grid needs at least 2x2 cells");
  const std::vector<double> sigma = dist.covariance();
  const int d = dist.dim();
  std::vector<double> grid(std::size_t(resolution) * resolution, 0.0);

  for (int k = 0; k < dist.m; ++k) {
    const int i0 = 2 * k, i1 = 2 * k + 1;
    const double mx = dist.mean[i0], my = dist.mean[i1];
    const double a = sigma[std::size_t(i0) * d + i0];
    const double b = sigma[std::size_t(i0) * d + i1];
    const double c = sigma[std::size_t(i1) * d + i1];
    const double det = std::max(a * c - b * b, 1e-300);
    const double inv_a = c / det, inv_b = -b / det, inv_c = a / det;
    const double norm = 1.0 / (2.0 * 3.14159265358979323846 * std::sqrt(det));

    for (int gy = 0; gy < resolution; ++gy) {
      const double v = (gy + 0.5) / resolution;  // cell-center y in (0,1)
      const double ly = std::log(v / (1.0 - v));
      const double jy = 1.0 / (v * (1.0 - v));
      for (int gx = 0; gx < resolution; ++gx) {
        const double u = (gx + 0.5) / resolution;
        const double lx = std::log(u / (1.0 - u));
        const double jx = 1.0 / (u * (1.0 - u));
        const double ex = lx - mx, ey = ly - my;
        const double q = inv_a * ex * ex + 2.0 * inv_b * ex * ey +
                         inv_c * ey * ey;
        grid[std::size_t(gy) * resolution + gx] +=
            norm * std::exp(-0.5 * q) * jx * jy;
      }
    }
  }
  return grid;
}

// Heatmap of the summed marginal densities, 200x200 cells by default.
inline std::string render_gaussian_heatmap(const DepotDistribution& dist,
                                           int resolution = 200) {
  using detail::plot_x;
  using detail::plot_y;
  const std::vector<double> grid = gaussian_density_grid(dist, resolution);
  const double peak = std::max(*std::max_element(grid.begin(), grid.end()),
                               1e-300);
  std::string svg = detail::svg_open();
  const double cell_w = (plot_x(1) - plot_x(0)) / resolution;
  const double cell_h = (plot_y(0) - plot_y(1)) / resolution;
  for (int gy = 0; gy < resolution; ++gy)
    for (int gx = 0; gx < resolution; ++gx) {
      const double t = grid[std::size_t(gy) * resolution + gx] / peak;
      if (t < 1e-4) continue;  // leave near-zero cells white
      // white -> yellow -> red ramp
      const int red = 255;
      const int green = static_cast<int>(255 * (1.0 - 0.75 * t));
      const int blue = static_cast<int>(255 * (1.0 - t));
      char color[8];
      std::snprintf(color, sizeof(color), "#%02x%02x%02x", red, green, blue);
      svg += "<rect x=\"" +
             render_double(plot_x(0) + gx * cell_w) + "\" y=\"" +
             render_double(plot_y(1) + (resolution - 1 - gy) * cell_h) +
             "\" width=\"" + render_double(cell_w + 0.5) + "\" height=\"" +
             render_double(cell_h + 0.5) + "\" fill=\"" + color + "\"/>\n";
    }
  svg += "<rect x=\"" + render_double(plot_x(0)) + "\" y=\"" +
         render_double(plot_y(1)) + "\" width=\"" +
         render_double(plot_x(1) - plot_x(0)) + "\" height=\"" +
         render_double(plot_y(0) - plot_y(1)) +
         "\" fill=\"none\" stroke=\"#999999\"/>\n";
  for (int k = 0; k < dist.m; ++k) {
    const double u = sigmoid(dist.mean[2 * k]);
    const double v = sigmoid(dist.mean[2 * k + 1]);
    svg += "<circle cx=\"" + render_double(plot_x(u)) + "\" cy=\"" +
           render_double(plot_y(v)) +
           "\" r=\"4\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace lrgen
