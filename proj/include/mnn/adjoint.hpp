#pragma once

// Exact dL/dk from one forward and one adjoint solve.
//
// Differentiating D u = F gives du/dk = -D^-1 (dD/dk) u. Solving the adjoint
// problem D u_adj = -(dL/du)^T with the same operator turns the gradient into
// u_adj^T C^T (dK/dk) C u, i.e. the bondwise product of the adjoint and
// forward elongations.

#include <cstddef>
#include <span>
#include <vector>

#include "mnn/error.hpp"
#include "mnn/losses.hpp"
#include "mnn/statics.hpp"

namespace mnn {

struct GradientReport {
  std::vector<double> grad;  // per bond
  double loss = 0.0;
  Solution forward;
  Solution adjoint;
  std::size_t solves_used = 0;
};

/// One training/evaluation example: nodal input forces plus the loss on the
/// resulting displacements. Independent of bond ids, so it survives pruning.
struct Sample {
  std::vector<NodalForce> forces;
  LossSpec loss;
};

inline LoadCase adjoint_load(const LossSpec& spec, const DofMap& dofs,
                             const Vector& u) {
  return LoadCase{-loss_gradient(spec, dofs, u), LoadKind::adjoint};
}

inline GradientReport gradient(const StaticSolver& solver, const LoadCase& load,
                               const LossSpec& spec) {
  GradientReport rep;
  rep.forward = solver.solve(load);
  rep.loss = loss_value(spec, solver.dofs(), rep.forward.u);
  rep.adjoint = solver.solve(adjoint_load(spec, solver.dofs(), rep.forward.u));
  rep.solves_used = 2;
  const auto m = static_cast<std::size_t>(rep.forward.e.size());
  rep.grad.resize(m);
  for (std::size_t b = 0; b < m; ++b) {
    const auto i = static_cast<Eigen::Index>(b);
    rep.grad[b] = rep.adjoint.e[i] * rep.forward.e[i];
  }
  return rep;
}

inline GradientReport gradient(const Network& net, const LoadCase& load,
                               const LossSpec& spec) {
  return gradient(StaticSolver(net), load, spec);
}

/// Mean loss and mean gradient over a set of samples against one factorization.
/// Per-sample results are accumulated in sample order.
inline GradientReport batch_gradient(const StaticSolver& solver,
                                     std::span<const Sample> samples) {
  if (samples.empty()) throw ConfigError("batch_gradient needs at least one sample");
  GradientReport total;
  total.grad.assign(solver.stiffness().size(), 0.0);
  for (const auto& s : samples) {
    auto rep = gradient(solver, LoadCase::from_nodal(solver.dofs(), s.forces), s.loss);
    for (std::size_t b = 0; b < total.grad.size(); ++b) total.grad[b] += rep.grad[b];
    total.loss += rep.loss;
    total.solves_used += rep.solves_used;
    total.forward = std::move(rep.forward);
    total.adjoint = std::move(rep.adjoint);
  }
  const double n = static_cast<double>(samples.size());
  for (double& g : total.grad) g /= n;
  total.loss /= n;
  return total;
}

inline GradientReport batch_gradient(const Network& net,
                                     std::span<const Sample> samples) {
  return batch_gradient(StaticSolver(net), samples);
}

}  // namespace mnn
