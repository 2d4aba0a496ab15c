#pragma once

// Spring-network geometry: nodes, bonds, the triangular-lattice generator,
// pruning and structural validation.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mnn/error.hpp"

namespace mnn {

using NodeId = std::size_t;
using BondId = std::size_t;

enum class Axis { x = 0, y = 1 };

inline const char* axis_name(Axis a) { return a == Axis::x ? "x" : "y"; }

inline Axis parse_axis(const std::string& s) {
  if (s == "x") return Axis::x;
  if (s == "y") return Axis::y;
  throw ConfigError("unknown axis '" + s + "' (expected x or y)");
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Node {
  NodeId id = 0;
  Vec2 position;
  bool fixed = false;
  // Roller support: displacement along this axis held at zero.
  std::optional<Axis> constrained;
};

struct Bond {
  BondId id = 0;
  NodeId i = 0;
  NodeId j = 0;
  double k = 0.0;            // N/m
  double rest_length = 0.0;  // m
};

struct StiffnessBounds {
  double min = 0.0;
  double max = 0.0;
};

struct Network {
  std::vector<Node> nodes;
  std::vector<Bond> bonds;
  StiffnessBounds k_bounds;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_bonds() const { return bonds.size(); }

  std::vector<double> stiffness() const {
    std::vector<double> k(bonds.size());
    for (std::size_t b = 0; b < bonds.size(); ++b) k[b] = bonds[b].k;
    return k;
  }

  /// Copy of this network with per-bond stiffness replaced.
  Network with_stiffness(const std::vector<double>& k) const {
    if (k.size() != bonds.size())
      throw ConfigError("stiffness vector has " + std::to_string(k.size()) +
                        " entries, network has " +
                        std::to_string(bonds.size()) + " bonds");
    Network out = *this;
    for (std::size_t b = 0; b < k.size(); ++b) out.bonds[b].k = k[b];
    return out;
  }
};

inline double distance(const Vec2& a, const Vec2& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

/// Parameters of the triangular lattice generator.
///
/// Stiffness is expressed relative to k_ref: bonds start at 0.8 k_ref and may
/// be trained within [0.6, 1.0] k_ref. With k proportional to bar width this
/// is the 2 mm +/- 0.5 mm band of the printed networks.
struct LatticeSpec {
  LatticeSpec() = default;
  LatticeSpec(int r, int c) : rows(r), cols(c) {}

  int rows = 5;
  int cols = 7;
  double spacing = 0.02;  // m
  double k_ref = 100.0;   // N/m, stiffness at the upper width bound
  std::optional<double> default_k;
  std::optional<StiffnessBounds> k_bounds;
  std::vector<std::string> fixed_nodes{"top-left", "top-right"};
  // Odd rows carry cols-1 nodes so the lattice is mirror symmetric.
  bool symmetric = false;

  double initial_k() const { return default_k.value_or(0.8 * k_ref); }
  StiffnessBounds bounds() const {
    return k_bounds.value_or(StiffnessBounds{0.6 * k_ref, 1.0 * k_ref});
  }
};

// ---------------------------------------------------------------------------
// Node selectors
// ---------------------------------------------------------------------------

/// Groups node ids into horizontal rows, top row first, each sorted by x.
inline std::vector<std::vector<NodeId>> node_rows(const Network& net) {
  std::vector<NodeId> order(net.nodes.size());
  for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;
  double scale = 0.0;
  for (const auto& nd : net.nodes)
    scale = std::max({scale, std::abs(nd.position.x), std::abs(nd.position.y)});
  const double tol = 1e-9 * std::max(scale, 1e-12);
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    const auto& pa = net.nodes[a].position;
    const auto& pb = net.nodes[b].position;
    if (std::abs(pa.y - pb.y) > tol) return pa.y > pb.y;
    return pa.x < pb.x;
  });
  std::vector<std::vector<NodeId>> rows;
  for (NodeId n : order) {
    if (rows.empty() ||
        std::abs(net.nodes[rows.back().front()].position.y -
                 net.nodes[n].position.y) > tol)
      rows.emplace_back();
    rows.back().push_back(n);
  }
  return rows;
}

namespace detail {

inline long parse_index(const std::string& s, const std::string& selector) {
  long v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty())
    throw ConfigError("bad node selector '" + selector + "'");
  return v;
}

inline NodeId pick(const std::vector<NodeId>& row, long idx,
                   const std::string& selector) {
  const long n = static_cast<long>(row.size());
  if (idx < 0) idx += n;
  if (idx < 0 || idx >= n)
    throw ConfigError("node selector '" + selector + "' out of range");
  return row[static_cast<std::size_t>(idx)];
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Resolves a node selector against the network geometry.
///
/// Accepted forms: a bare node id ("12"); "top-left", "top-right",
/// "bottom-left", "bottom-right", "top-center", "bottom-center";
/// "top:i" / "bottom:i" for the i-th node of that row counted from the left
/// (negative counts from the right); "row:r:i" with rows counted from the top.
inline NodeId resolve_node(const Network& net, const std::string& selector) {
  if (net.nodes.empty()) throw ConfigError("network has no nodes");
  if (!selector.empty() &&
      (std::isdigit(static_cast<unsigned char>(selector[0])) != 0)) {
    long id = detail::parse_index(selector, selector);
    if (id < 0 || static_cast<std::size_t>(id) >= net.nodes.size())
      throw ConfigError("node id " + selector + " out of range");
    return static_cast<NodeId>(id);
  }
  const auto rows = node_rows(net);
  const auto& top = rows.front();
  const auto& bottom = rows.back();
  if (selector == "top-left") return top.front();
  if (selector == "top-right") return top.back();
  if (selector == "bottom-left") return bottom.front();
  if (selector == "bottom-right") return bottom.back();
  if (selector == "top-center") return top[top.size() / 2];
  if (selector == "bottom-center") return bottom[bottom.size() / 2];
  auto parts = detail::split(selector, ':');
  if (parts.size() == 2 && (parts[0] == "top" || parts[0] == "bottom"))
    return detail::pick(parts[0] == "top" ? top : bottom,
                        detail::parse_index(parts[1], selector), selector);
  if (parts.size() == 3 && parts[0] == "row") {
    long r = detail::parse_index(parts[1], selector);
    if (r < 0) r += static_cast<long>(rows.size());
    if (r < 0 || static_cast<std::size_t>(r) >= rows.size())
      throw ConfigError("node selector '" + selector + "' row out of range");
    return detail::pick(rows[static_cast<std::size_t>(r)],
                        detail::parse_index(parts[2], selector), selector);
  }
  throw ConfigError("unknown node selector '" + selector + "'");
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

inline Network build_triangular_lattice(const LatticeSpec& spec) {
  if (spec.rows < 2) throw ConfigError("rows ≥ 2 required");
  if (spec.cols < 2) throw ConfigError("cols ≥ 2 required");
  if (!(spec.spacing > 0.0) || !std::isfinite(spec.spacing))
    throw ConfigError("spacing > 0 required");
  const auto bounds = spec.bounds();
  if (!(bounds.min > 0.0) || !(bounds.max >= bounds.min))
    throw ConfigError("stiffness bounds must satisfy 0 < k_min <= k_max");
  const double k0 = spec.initial_k();
  if (k0 < bounds.min || k0 > bounds.max)
    throw ConfigError("default stiffness outside stiffness bounds");
  if (spec.symmetric && spec.cols < 3)
    throw ConfigError("symmetric lattice requires cols >= 3");

  Network net;
  net.k_bounds = bounds;
  const double pitch = spec.spacing * std::sqrt(3.0) / 2.0;
  for (int r = 0; r < spec.rows; ++r) {
    const bool odd = (r % 2) == 1;
    const int count = (odd && spec.symmetric) ? spec.cols - 1 : spec.cols;
    for (int c = 0; c < count; ++c) {
      Node n;
      n.id = net.nodes.size();
      n.position.x = (c + (odd ? 0.5 : 0.0)) * spec.spacing;
      n.position.y = -r * pitch;
      net.nodes.push_back(n);
    }
  }

  // Nearest neighbours sit at exactly one spacing; the next shell is at
  // sqrt(3) spacing, so a loose tolerance is safe.
  const double cutoff = 1.01 * spec.spacing;
  for (NodeId a = 0; a < net.nodes.size(); ++a) {
    for (NodeId b = a + 1; b < net.nodes.size(); ++b) {
      double len = distance(net.nodes[a].position, net.nodes[b].position);
      if (len <= cutoff) {
        net.bonds.push_back(Bond{net.bonds.size(), a, b, k0, len});
      }
    }
  }

  for (const auto& sel : spec.fixed_nodes)
    net.nodes[resolve_node(net, sel)].fixed = true;
  return net;
}

// ---------------------------------------------------------------------------
// Pruning
// ---------------------------------------------------------------------------

struct PruneResult {
  Network network;
  /// old bond id -> new bond id; empty for the removed bond.
  std::vector<std::optional<BondId>> old_to_new;
};

inline PruneResult prune_bond(const Network& net, BondId bond_id) {
  if (bond_id >= net.bonds.size())
    throw ConfigError("unknown bond id " + std::to_string(bond_id));
  PruneResult out;
  out.network.nodes = net.nodes;
  out.network.k_bounds = net.k_bounds;
  out.old_to_new.resize(net.bonds.size());
  for (const auto& b : net.bonds) {
    if (b.id == bond_id) continue;
    Bond nb = b;
    nb.id = out.network.bonds.size();
    out.old_to_new[b.id] = nb.id;
    out.network.bonds.push_back(nb);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string rule;
  std::string entity;

  std::string to_string() const { return rule + " (" + entity + ")"; }
};

/// Checks every structural invariant; never throws.
inline std::vector<Violation> validate(const Network& net) {
  std::vector<Violation> out;
  const auto bond_name = [](const Bond& b) {
    return "bond " + std::to_string(b.id);
  };

  if (!(net.k_bounds.min > 0.0))
    out.push_back({"k_min must be positive", "k_bounds"});
  if (net.k_bounds.max < net.k_bounds.min)
    out.push_back({"k_max below k_min", "k_bounds"});

  for (std::size_t n = 0; n < net.nodes.size(); ++n) {
    const auto& nd = net.nodes[n];
    if (nd.id != n)
      out.push_back({"node ids not dense", "node " + std::to_string(n)});
    if (!std::isfinite(nd.position.x) || !std::isfinite(nd.position.y))
      out.push_back({"non-finite position", "node " + std::to_string(n)});
  }

  std::set<std::pair<NodeId, NodeId>> seen;
  for (std::size_t b = 0; b < net.bonds.size(); ++b) {
    const auto& bd = net.bonds[b];
    if (bd.id != b) out.push_back({"bond ids not dense", bond_name(bd)});
    if (bd.i >= net.nodes.size() || bd.j >= net.nodes.size()) {
      out.push_back({"bond endpoint out of range", bond_name(bd)});
      continue;
    }
    if (bd.i == bd.j) out.push_back({"bond endpoints coincide", bond_name(bd)});
    auto key = std::minmax(bd.i, bd.j);
    if (!seen.insert({key.first, key.second}).second)
      out.push_back({"duplicate bond", "(" + std::to_string(key.first) + "," +
                                           std::to_string(key.second) + ")"});
    if (!(bd.k >= net.k_bounds.min))
      out.push_back({"stiffness below k_min", bond_name(bd)});
    if (bd.k > net.k_bounds.max)
      out.push_back({"stiffness above k_max", bond_name(bd)});
    if (!(bd.rest_length > 0.0) || !std::isfinite(bd.rest_length))
      out.push_back({"non-positive rest length", bond_name(bd)});
  }

  std::size_t fixed = 0;
  for (const auto& nd : net.nodes) fixed += nd.fixed ? 1 : 0;
  if (fixed < 2)
    out.push_back({"fewer than 2 fixed nodes", std::to_string(fixed) + " fixed"});

  // Connectivity: breadth-first search from every anchor.
  std::vector<std::vector<NodeId>> adj(net.nodes.size());
  for (const auto& bd : net.bonds) {
    if (bd.i < adj.size() && bd.j < adj.size()) {
      adj[bd.i].push_back(bd.j);
      adj[bd.j].push_back(bd.i);
    }
  }
  std::vector<char> reached(net.nodes.size(), 0);
  std::queue<NodeId> q;
  for (const auto& nd : net.nodes) {
    if (nd.fixed && nd.id < reached.size()) {
      reached[nd.id] = 1;
      q.push(nd.id);
    }
  }
  while (!q.empty()) {
    NodeId n = q.front();
    q.pop();
    for (NodeId m : adj[n]) {
      if (!reached[m]) {
        reached[m] = 1;
        q.push(m);
      }
    }
  }
  for (std::size_t n = 0; n < reached.size(); ++n)
    if (!reached[n])
      out.push_back({"node not connected to a fixed node",
                     "node " + std::to_string(n)});
  return out;
}

}  // namespace mnn
