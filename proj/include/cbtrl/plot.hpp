#pragma once

// Hand-rolled SVG emission: learning curves (mean with a std band on a
// hybrid linear/log step axis), trajectory overlays on the 2D world
// geometry, and feasibility heatmaps with the zero level set marked. Files
// are self-contained and byte-deterministic for a fixed input.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cbtrl/env2d.hpp"
#include "cbtrl/feasibility.hpp"
#include "cbtrl/pipeline.hpp"
#include "cbtrl/report.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

struct CurveSeries {
  std::string label;
  std::vector<CurvePoint> points;
};

namespace detail_plot {

constexpr int kW = 640, kH = 420;
constexpr int kMarginL = 60, kMarginR = 20, kMarginT = 20, kMarginB = 50;

inline const char* series_color(size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  return palette[i % 6];
}

inline std::string pt(double x, double y) {
  return fmt_fixed(x, 2) + "," + fmt_fixed(y, 2);
}

inline void open_svg(std::ostream& os, int w, int h) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
     << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' ' << h
     << "\">\n<rect width=\"" << w << "\" height=\"" << h
     << "\" fill=\"white\"/>\n";
}

// Hybrid step axis: linear up to the split, logarithmic beyond it.
struct StepAxis {
  double split = 1e5;
  double max = 1e6;

  double unit(double steps) const {
    if (steps <= split) return 0.5 * steps / split;
    return 0.5 + 0.5 * std::log10(steps / split) / std::log10(max / split);
  }
};

}  // namespace detail_plot

// Mean return (or success) per series against cumulative environment steps,
// with a +-1 std band. The x-axis is linear in [0, 1e5] and logarithmic
// beyond, stretched to cover the data.
inline void plot_learning_curve(const std::vector<CurveSeries>& series,
                                std::ostream& os) {
  using namespace detail_plot;
  bool empty = series.empty();
  for (const auto& s : series) empty = empty || s.points.empty();
  if (empty) throw Error("plot_learning_curve: empty logs");

  StepAxis axis;
  double lo = 0.0, hi = 0.0;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      axis.max = std::max(axis.max, double(p.steps));
      lo = std::min(lo, p.mean_return - p.std_return);
      hi = std::max(hi, p.mean_return + p.std_return);
    }
  if (hi <= lo) hi = lo + 1.0;

  const double px0 = kMarginL, px1 = kW - kMarginR;
  const double py0 = kH - kMarginB, py1 = kMarginT;
  auto X = [&](double steps) {
    return px0 + (px1 - px0) * axis.unit(steps);
  };
  auto Y = [&](double v) { return py0 + (py1 - py0) * (v - lo) / (hi - lo); };

  open_svg(os, kW, kH);
  os << "<rect x=\"" << px0 << "\" y=\"" << py1 << "\" width=\""
     << px1 - px0 << "\" height=\"" << py0 - py1
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  // step-axis ticks: linear decades then log decades
  for (double t : {0.0, 5e4, 1e5, 1e6, 1e7}) {
    if (t > axis.max) continue;
    os << "<line x1=\"" << fmt_fixed(X(t), 2) << "\" y1=\"" << py0
       << "\" x2=\"" << fmt_fixed(X(t), 2) << "\" y2=\"" << py0 + 5
       << "\" stroke=\"black\"/>\n<text x=\"" << fmt_fixed(X(t), 2)
       << "\" y=\"" << py0 + 18
       << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt_fixed(t, 0)
       << "</text>\n";
  }
  os << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << kH - 10
     << "\" font-size=\"12\" text-anchor=\"middle\">environment steps"
        " (linear to 1e5, log beyond)</text>\n";
  for (int i = 0; i <= 4; ++i) {
    double v = lo + (hi - lo) * i / 4.0;
    os << "<line x1=\"" << px0 - 5 << "\" y1=\"" << fmt_fixed(Y(v), 2)
       << "\" x2=\"" << px0 << "\" y2=\"" << fmt_fixed(Y(v), 2)
       << "\" stroke=\"black\"/>\n<text x=\"" << px0 - 8 << "\" y=\""
       << fmt_fixed(Y(v) + 4, 2)
       << "\" font-size=\"11\" text-anchor=\"end\">" << fmt_fixed(v, 2)
       << "</text>\n";
  }

  for (size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = series_color(i);
    os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\""
       << " stroke=\"none\" points=\"";
    for (const auto& p : s.points)
      os << pt(X(double(p.steps)), Y(p.mean_return + p.std_return)) << ' ';
    for (auto it = s.points.rbegin(); it != s.points.rend(); ++it)
      os << pt(X(double(it->steps)), Y(it->mean_return - it->std_return))
         << ' ';
    os << "\"/>\n<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : s.points)
      os << pt(X(double(p.steps)), Y(p.mean_return)) << ' ';
    os << "\"/>\n";
    if (s.points.size() == 1) {
      const auto& p = s.points.front();
      os << "<circle cx=\"" << fmt_fixed(X(double(p.steps)), 2) << "\" cy=\""
         << fmt_fixed(Y(p.mean_return), 2) << "\" r=\"3\" fill=\"" << color
         << "\"/>\n";
    }
    os << "<text x=\"" << px0 + 10 << "\" y=\"" << py1 + 16 + 16 * double(i)
       << "\" font-size=\"12\" fill=\"" << color << "\">" << s.label
       << "</text>\n";
  }
  os << "</svg>\n";
}

// Trajectories drawn over the 2D world: unsafe band, slope, start box and
// goal disc, one colored polyline per labeled path.
inline void plot_trajectories(
    const Env2dParams& p,
    const std::vector<std::pair<std::string, std::vector<State>>>& paths,
    std::ostream& os) {
  using namespace detail_plot;
  if (paths.empty()) throw Error("plot_trajectories: empty logs");
  const int side = 480, margin = 20;
  auto X = [&](double x) { return margin + side * x; };
  auto Y = [&](double y) { return margin + side * (1.0 - y); };
  auto rect = [&](const Rect& r, const char* fill) {
    os << "<rect x=\"" << fmt_fixed(X(r.x0), 2) << "\" y=\""
       << fmt_fixed(Y(r.y1), 2) << "\" width=\""
       << fmt_fixed(side * (r.x1 - r.x0), 2) << "\" height=\""
       << fmt_fixed(side * (r.y1 - r.y0), 2) << "\" fill=\"" << fill
       << "\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
  };
  open_svg(os, side + 2 * margin, side + 2 * margin);
  os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << side
     << "\" height=\"" << side << "\" fill=\"none\" stroke=\"black\"/>\n";
  rect(p.unsafe, "#f4cccc");
  rect(p.slope, "#d9d2e9");
  rect(p.start, "#d9ead3");
  os << "<circle cx=\"" << fmt_fixed(X(p.goal_x), 2) << "\" cy=\""
     << fmt_fixed(Y(p.goal_y), 2) << "\" r=\""
     << fmt_fixed(side * p.goal_radius, 2)
     << "\" fill=\"#fff2cc\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
  for (size_t i = 0; i < paths.size(); ++i) {
    const auto& [label, path] = paths[i];
    const char* color = series_color(i);
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& s : path) os << pt(X(s[0]), Y(s[1])) << ' ';
    os << "\"/>\n<text x=\"" << margin + 6 << "\" y=\""
       << margin + 14 + 14 * double(i) << "\" font-size=\"11\" fill=\""
       << color << "\">" << label << "</text>\n";
  }
  os << "</svg>\n";
}

// max_u Q(s, u) over the position grid at zero velocity, blue positive and
// red negative, with the zero level set drawn as a black boundary between
// cells of opposite sign.
inline void plot_feasibility_heatmap(const Env2dGrid& grid,
                                     const FeasibilityEstimator& est,
                                     std::ostream& os) {
  using namespace detail_plot;
  const int nx = grid.nx(), ny = grid.ny();
  std::vector<double> value(static_cast<size_t>(nx) * ny);
  double vmax = 1e-12;
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy) {
      State s = {double(ix) / (nx - 1), double(iy) / (ny - 1), 0.0, 0.0};
      s = grid.decode(grid.encode(s));
      double best = est.value(s);
      value[static_cast<size_t>(ix) * ny + iy] = best;
      vmax = std::max(vmax, std::fabs(best));
    }
  const int cell = 12, margin = 20;
  auto color = [&](double v) {
    int shade = static_cast<int>(200.0 * std::min(1.0, std::fabs(v) / vmax));
    char buf[16];
    if (v >= 0)
      std::snprintf(buf, sizeof(buf), "#%02x%02xff", 255 - shade, 255 - shade);
    else
      std::snprintf(buf, sizeof(buf), "#ff%02x%02x", 255 - shade, 255 - shade);
    return std::string(buf);
  };
  auto px = [&](int ix) { return margin + cell * ix; };
  auto py = [&](int iy) { return margin + cell * (ny - 1 - iy); };
  open_svg(os, 2 * margin + cell * nx, 2 * margin + cell * ny);
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy)
      os << "<rect x=\"" << px(ix) << "\" y=\"" << py(iy) << "\" width=\""
         << cell << "\" height=\"" << cell << "\" fill=\""
         << color(value[static_cast<size_t>(ix) * ny + iy]) << "\"/>\n";
  auto sign = [&](int ix, int iy) {
    return value[static_cast<size_t>(ix) * ny + iy] >= 0;
  };
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy) {
      if (ix + 1 < nx && sign(ix, iy) != sign(ix + 1, iy))
        os << "<line x1=\"" << px(ix + 1) << "\" y1=\"" << py(iy)
           << "\" x2=\"" << px(ix + 1) << "\" y2=\"" << py(iy) + cell
           << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
      if (iy + 1 < ny && sign(ix, iy) != sign(ix, iy + 1))
        os << "<line x1=\"" << px(ix) << "\" y1=\"" << py(iy + 1) + cell
           << "\" x2=\"" << px(ix) + cell << "\" y2=\"" << py(iy + 1) + cell
           << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    }
  os << "</svg>\n";
}

inline void save_svg(const std::function<void(std::ostream&)>& emit,
                     const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path + "'");
  emit(os);
}

}  // namespace cbtrl
