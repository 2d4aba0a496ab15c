#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mnn/mnn.hpp"

namespace mnn::testing {

// Free node at the origin between fixed nodes at (-1,0) and (1,0), two
// x-aligned unit bonds. With y_constrained the free node rolls along x only.
inline Network s1_network(double k0 = 1.0, double k1 = 1.0, bool y_constrained = true) {
  Network net;
  net.nodes = {{0, {-1.0, 0.0}, true, std::nullopt},
               {1, {0.0, 0.0}, false, std::nullopt},
               {2, {1.0, 0.0}, true, std::nullopt}};
  if (y_constrained) net.nodes[1].constrained = Axis::y;
  net.bonds = {{0, 0, 1, k0, 1.0}, {1, 1, 2, k1, 1.0}};
  net.k_bounds = {0.5, 2.0};
  return net;
}

// Unit-scale lattice with stiffnesses drawn uniformly inside the bounds.
inline Network random_lattice(std::mt19937_64& rng, int rows, int cols, double k_ref = 1.0) {
  LatticeSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.spacing = 1.0;
  spec.k_ref = k_ref;
  auto net = build_triangular_lattice(spec);
  std::uniform_real_distribution<double> k(net.k_bounds.min, net.k_bounds.max);
  for (auto& b : net.bonds) b.k = k(rng);
  return net;
}

inline std::vector<NodeId> free_nodes(const Network& net) {
  std::vector<NodeId> out;
  for (const auto& n : net.nodes)
    if (!n.fixed) out.push_back(n.id);
  return out;
}

inline NodalForce random_force(std::mt19937_64& rng, const Network& net) {
  auto nodes = free_nodes(net);
  std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
  std::uniform_real_distribution<double> mag(-1.0, 1.0);
  return {nodes[pick(rng)], (rng() & 1) ? Axis::x : Axis::y, mag(rng)};
}

inline DofRef random_dof(std::mt19937_64& rng, const Network& net) {
  auto f = random_force(rng, net);
  return {f.node, f.axis};
}

inline Vector random_load_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
  return v;
}

inline double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace mnn::testing
