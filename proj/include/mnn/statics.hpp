#pragma once

// Linear statics of a spring network: compatibility matrix C, stiffness
// D = C^T K C over the free DOFs, equilibrium solves D u = F and zero-mode
// detection.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "mnn/error.hpp"
#include "mnn/lattice.hpp"

namespace mnn {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Standard gravity used to convert hanging masses to forces.
inline constexpr double kGravity = 9.8;

inline double grams_to_newtons(double grams) { return grams * 1e-3 * kGravity; }

// ---------------------------------------------------------------------------
// Solver-call accounting
// ---------------------------------------------------------------------------

namespace detail {
inline std::atomic<std::uint64_t> g_solve_calls{0};
}

/// Number of equilibrium solves performed in this process.
inline std::uint64_t solve_calls() { return detail::g_solve_calls.load(); }

// ---------------------------------------------------------------------------
// DOF bookkeeping
// ---------------------------------------------------------------------------

/// Maps (node, axis) to a free-DOF index. Fixed nodes carry no DOFs.
class DofMap {
 public:
  DofMap() = default;

  explicit DofMap(const Network& net) : index_(net.nodes.size(), {-1, -1}) {
    for (const auto& nd : net.nodes) {
      if (nd.fixed) continue;
      if (nd.constrained != Axis::x) index_[nd.id][0] = static_cast<long>(count_++);
      if (nd.constrained != Axis::y) index_[nd.id][1] = static_cast<long>(count_++);
    }
  }

  std::size_t size() const { return count_; }
  std::size_t num_nodes() const { return index_.size(); }

  bool is_free(NodeId n) const {
    return n < index_.size() && (index_[n][0] >= 0 || index_[n][1] >= 0);
  }

  std::optional<std::size_t> find(NodeId n, Axis a) const {
    if (n >= index_.size() || index_[n][static_cast<int>(a)] < 0) return std::nullopt;
    return static_cast<std::size_t>(index_[n][static_cast<int>(a)]);
  }

  /// Index of a free DOF; throws when the node is fixed or unknown.
  std::size_t at(NodeId n, Axis a) const {
    if (n >= index_.size())
      throw ConfigError("node " + std::to_string(n) + " does not exist");
    auto d = find(n, a);
    if (!d)
      throw ConfigError("node " + std::to_string(n) +
                        " has no free " + axis_name(a) + " DOF");
    return *d;
  }

 private:
  std::vector<std::array<long, 2>> index_;
  std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Loads and solutions
// ---------------------------------------------------------------------------

struct NodalForce {
  NodeId node = 0;
  Axis axis = Axis::y;
  double value = 0.0;  // N
};

enum class LoadKind { external, adjoint };

struct LoadCase {
  Vector forces;  // over free DOFs, N
  LoadKind kind = LoadKind::external;

  static LoadCase zero(const DofMap& dofs) {
    return LoadCase{Vector::Zero(static_cast<Eigen::Index>(dofs.size())),
                    LoadKind::external};
  }

  static LoadCase from_nodal(const DofMap& dofs,
                             const std::vector<NodalForce>& nodal) {
    LoadCase lc = zero(dofs);
    for (const auto& f : nodal)
      lc.forces[static_cast<Eigen::Index>(dofs.at(f.node, f.axis))] += f.value;
    return lc;
  }
};

struct Solution {
  Vector u;  // free-DOF displacements, m
  Vector e;  // per-bond elongation, m
};

/// Displacement of a node along an axis; zero for fixed nodes.
inline double displacement(const DofMap& dofs, const Vector& u, NodeId n,
                           Axis a) {
  auto d = dofs.find(n, a);
  return d ? u[static_cast<Eigen::Index>(*d)] : 0.0;
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// Row b holds t_b on the free DOFs of node j and -t_b on those of node i,
/// t_b being the unit vector from i to j. Positive elongation is stretching.
inline SparseMatrix compatibility_matrix(const Network& net,
                                         const DofMap& dofs) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(net.bonds.size() * 4);
  for (const auto& b : net.bonds) {
    if (b.i >= net.nodes.size() || b.j >= net.nodes.size())
      throw ConfigError("bond " + std::to_string(b.id) +
                        " references a missing node");
    const auto& pi = net.nodes[b.i].position;
    const auto& pj = net.nodes[b.j].position;
    const double len = distance(pi, pj);
    if (!(len > 0.0))
      throw ConfigError("bond " + std::to_string(b.id) + " has zero length");
    const double tx = (pj.x - pi.x) / len;
    const double ty = (pj.y - pi.y) / len;
    const auto row = static_cast<int>(b.id);
    auto put = [&](NodeId n, Axis a, double v) {
      if (auto d = dofs.find(n, a)) trip.emplace_back(row, static_cast<int>(*d), v);
    };
    put(b.j, Axis::x, tx);
    put(b.j, Axis::y, ty);
    put(b.i, Axis::x, -tx);
    put(b.i, Axis::y, -ty);
  }
  SparseMatrix c(static_cast<Eigen::Index>(net.bonds.size()),
                 static_cast<Eigen::Index>(dofs.size()));
  c.setFromTriplets(trip.begin(), trip.end());
  return c;
}

inline SparseMatrix compatibility_matrix(const Network& net) {
  return compatibility_matrix(net, DofMap(net));
}

/// D = C^T diag(k) C.
inline SparseMatrix assemble_stiffness(const SparseMatrix& c,
                                       const std::vector<double>& k) {
  if (static_cast<Eigen::Index>(k.size()) != c.rows())
    throw ConfigError("stiffness vector length " + std::to_string(k.size()) +
                      " does not match " + std::to_string(c.rows()) + " bonds");
  Vector kv = Eigen::Map<const Vector>(k.data(), static_cast<Eigen::Index>(k.size()));
  SparseMatrix d = SparseMatrix(c.transpose()) * kv.asDiagonal() * c;
  // Symmetrize away round-off from the product ordering.
  SparseMatrix dt = d.transpose();
  return 0.5 * (d + dt);
}

inline double max_stiffness(const std::vector<double>& k) {
  double m = 0.0;
  for (double v : k) m = std::max(m, std::abs(v));
  return m;
}

/// Pivot threshold below which D is treated as singular.
inline double zero_mode_tolerance(const std::vector<double>& k) {
  return 1e-9 * std::max(max_stiffness(k), 1e-300);
}

// ---------------------------------------------------------------------------
// Factorized operator
// ---------------------------------------------------------------------------

/// Factorized stiffness operator for one network and one stiffness vector.
///
/// Immutable after construction: solve() may be called concurrently.
class StaticSolver {
 public:
  explicit StaticSolver(const Network& net)
      : dofs_(net), k_(net.stiffness()), c_(compatibility_matrix(net, dofs_)) {
    d_ = assemble_stiffness(c_, k_);
    if (dofs_.size() == 0) return;
    ldlt_.compute(d_);
    if (ldlt_.info() != Eigen::Success)
      throw ZeroModeError("stiffness factorization failed");
    const Vector piv = ldlt_.vectorD();
    const double tol = zero_mode_tolerance(k_);
    for (Eigen::Index p = 0; p < piv.size(); ++p) {
      if (!(piv[p] > tol)) {
        // vectorD is in permuted order; map back to the DOF index.
        const auto dof =
            static_cast<std::size_t>(ldlt_.permutationPinv().indices()[p]);
        throw ZeroModeError(
            "stiffness matrix is not positive definite (pivot " +
                std::to_string(piv[p]) + " at free DOF " +
                std::to_string(dof) + "): network has zero modes",
            dof);
      }
    }
  }

  const DofMap& dofs() const { return dofs_; }
  const SparseMatrix& compatibility() const { return c_; }
  const SparseMatrix& stiffness_matrix() const { return d_; }
  const std::vector<double>& stiffness() const { return k_; }

  Solution solve(const LoadCase& load) const {
    if (static_cast<std::size_t>(load.forces.size()) != dofs_.size())
      throw ConfigError("load vector has " + std::to_string(load.forces.size()) +
                        " entries, network has " +
                        std::to_string(dofs_.size()) + " free DOFs");
    detail::g_solve_calls.fetch_add(1, std::memory_order_relaxed);
    Solution s;
    if (dofs_.size() == 0) {
      s.u = Vector::Zero(0);
    } else {
      s.u = ldlt_.solve(load.forces);
    }
    s.e = c_ * s.u;
    return s;
  }

 private:
  DofMap dofs_;
  std::vector<double> k_;
  SparseMatrix c_;
  SparseMatrix d_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

inline Solution solve_statics(const Network& net, const LoadCase& load) {
  return StaticSolver(net).solve(load);
}

// ---------------------------------------------------------------------------
// Zero modes
// ---------------------------------------------------------------------------

struct ZeroModeReport {
  bool positive_definite = true;
  std::size_t count = 0;
  double tolerance = 0.0;
  /// Unit-norm displacement field (free DOFs) with no elastic energy.
  std::optional<Vector> null_vector;
};

/// Counts eigenvalues of D at or below 1e-9 max(k). Dense eigensolve; the
/// networks handled here have at most a few hundred DOFs.
inline ZeroModeReport detect_zero_modes(const Network& net) {
  ZeroModeReport rep;
  DofMap dofs;
  SparseMatrix d;
  std::vector<double> k = net.stiffness();
  try {
    dofs = DofMap(net);
    d = assemble_stiffness(compatibility_matrix(net, dofs), k);
  } catch (const Error&) {
    rep.positive_definite = false;
    return rep;
  }
  rep.tolerance = zero_mode_tolerance(k);
  if (dofs.size() == 0) return rep;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(d)};
  const Vector& lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    if (lambda[i] <= rep.tolerance) ++rep.count;
  rep.positive_definite = rep.count == 0;
  if (rep.count > 0) rep.null_vector = eig.eigenvectors().col(0);
  return rep;
}

}  // namespace mnn
