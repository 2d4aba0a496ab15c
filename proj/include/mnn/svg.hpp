#pragma once

// SVG drawing of a network. Bond stroke width encodes stiffness, mapped
// linearly from [k_min, k_max] onto [1.5, 2.5] display-mm.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mnn/lattice.hpp"

namespace mnn {

struct NodeRoles {
  std::set<NodeId> inputs;
  std::set<NodeId> outputs;
};

inline constexpr double kMinStroke = 1.5;
inline constexpr double kMaxStroke = 2.5;

inline double stroke_width(double k, const StiffnessBounds& b) {
  if (!(b.max > b.min)) return 0.5 * (kMinStroke + kMaxStroke);
  const double t = std::clamp((k - b.min) / (b.max - b.min), 0.0, 1.0);
  return kMinStroke + t * (kMaxStroke - kMinStroke);
}

namespace detail {

inline std::string fmt3(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

}  // namespace detail

/// Fixed nodes are drawn as triangles, inputs as dots and outputs as stars.
/// Coordinates are in millimetres (1 m = 1000 units).
inline std::string render_svg(const Network& net, const NodeRoles& roles = {}) {
  using detail::fmt3;
  constexpr double kScale = 1000.0;
  constexpr double kMargin = 10.0;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool first = true;
  for (const auto& n : net.nodes) {
    const double x = n.position.x * kScale, y = -n.position.y * kScale;
    if (first) {
      xmin = xmax = x;
      ymin = ymax = y;
      first = false;
    }
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  const double ox = xmin - kMargin, oy = ymin - kMargin;
  const double w = xmax - xmin + 2 * kMargin, h = ymax - ymin + 2 * kMargin;
  auto px = [&](const Node& n) { return n.position.x * kScale - ox; };
  auto py = [&](const Node& n) { return -n.position.y * kScale - oy; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt3(w) << "mm\" height=\""
    << fmt3(h) << "mm\" viewBox=\"0 0 " << fmt3(w) << ' ' << fmt3(h) << "\">\n";
  s << "<g stroke=\"#222222\" stroke-linecap=\"round\">\n";
  for (const auto& b : net.bonds) {
    const auto& a = net.nodes[b.i];
    const auto& c = net.nodes[b.j];
    s << "<line data-bond=\"" << b.id << "\" x1=\"" << fmt3(px(a)) << "\" y1=\"" << fmt3(py(a))
      << "\" x2=\"" << fmt3(px(c)) << "\" y2=\"" << fmt3(py(c)) << "\" stroke-width=\""
      << fmt3(stroke_width(b.k, net.k_bounds)) << "\"/>\n";
  }
  s << "</g>\n";
  const double r = 2.5;
  for (const auto& n : net.nodes) {
    const double x = px(n), y = py(n);
    if (n.fixed) {
      s << "<polygon data-node=\"" << n.id << "\" class=\"fixed\" fill=\"#1f5fbf\" points=\""
        << fmt3(x) << ',' << fmt3(y - 1.6 * r) << ' ' << fmt3(x - 1.4 * r) << ','
        << fmt3(y + 0.8 * r) << ' ' << fmt3(x + 1.4 * r) << ',' << fmt3(y + 0.8 * r) << "\"/>\n";
    } else if (roles.outputs.count(n.id)) {
      s << "<polygon data-node=\"" << n.id << "\" class=\"output\" fill=\"#00b5c8\" points=\"";
      for (int p = 0; p < 10; ++p) {
        const double ang = -M_PI / 2 + p * M_PI / 5;
        const double rad = (p % 2 == 0) ? 2.0 * r : 0.8 * r;
        s << (p ? " " : "") << fmt3(x + rad * std::cos(ang)) << ',' << fmt3(y + rad * std::sin(ang));
      }
      s << "\"/>\n";
    } else if (roles.inputs.count(n.id)) {
      s << "<circle data-node=\"" << n.id << "\" class=\"input\" fill=\"#d62728\" cx=\"" << fmt3(x)
        << "\" cy=\"" << fmt3(y) << "\" r=\"" << fmt3(1.2 * r) << "\"/>\n";
    } else {
      s << "<circle data-node=\"" << n.id << "\" fill=\"#888888\" cx=\"" << fmt3(x) << "\" cy=\""
        << fmt3(y) << "\" r=\"" << fmt3(0.5 * r) << "\"/>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace mnn
