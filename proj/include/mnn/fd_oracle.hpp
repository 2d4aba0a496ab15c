#pragma once

// Finite-difference gradients in k, used as the reference the adjoint
// gradient is checked against and as the cost baseline (m+1 or 2m solves).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mnn/adjoint.hpp"
#include "mnn/error.hpp"
#include "mnn/losses.hpp"
#include "mnn/statics.hpp"

namespace mnn {

enum class FdScheme { forward, central };

struct FdConfig {
  FdScheme scheme = FdScheme::central;
  double step = 1e-6;       // N/m
  bool relative = false;    // step_b = step * k_b
  /// Perturbed solves and losses in long double, with two refinement sweeps.
  /// Takes FD roundoff well below the adjoint's own error; off for sweeps,
  /// whose point is the double-precision roundoff/truncation tradeoff.
  bool extended = false;
};

namespace detail {

using LongVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

inline long double extended_loss(const StaticSolver& s, const LoadCase& load,
                                 const LossSpec& spec) {
  using LongSparse = Eigen::SparseMatrix<long double>;
  if (static_cast<std::size_t>(load.forces.size()) != s.dofs().size())
    throw ConfigError("load vector does not match the network's free DOFs");
  g_solve_calls.fetch_add(1, std::memory_order_relaxed);
  const LongSparse c = s.compatibility().cast<long double>();
  LongVector kv(c.rows());
  for (Eigen::Index b = 0; b < kv.size(); ++b)
    kv[b] = static_cast<long double>(s.stiffness()[static_cast<std::size_t>(b)]);
  const LongSparse d = LongSparse(c.transpose()) * kv.asDiagonal() * c;
  const LongVector f = load.forces.cast<long double>();
  LongVector u = LongVector::Zero(f.size());
  if (f.size() > 0) {
    Eigen::SimplicialLDLT<LongSparse> ldlt(d);
    u = ldlt.solve(f);
    for (int sweep = 0; sweep < 2; ++sweep) u += ldlt.solve(LongVector(f - d * u));
  }
  return loss_value_as<long double>(spec, s.dofs(), u);
}

inline long double perturbed_loss(const Network& net, std::size_t bond, double k,
                                  const LoadCase& load, const LossSpec& spec,
                                  bool extended) {
  Network p = net;
  p.bonds[bond].k = k;
  try {
    StaticSolver s(p);
    if (extended) return extended_loss(s, load, spec);
    return loss_value(spec, s.dofs(), s.solve(load).u);
  } catch (const ZeroModeError& e) {
    throw ZeroModeError("finite difference on bond " + std::to_string(bond) +
                            ": " + e.what(),
                        e.dof());
  }
}

}  // namespace detail

inline GradientReport fd_gradient(const Network& net, const LoadCase& load,
                                  const LossSpec& spec, const FdConfig& cfg) {
  if (!(cfg.step > 0.0)) throw ConfigError("finite-difference step must be > 0");
  GradientReport rep;
  const std::size_t m = net.bonds.size();
  rep.grad.resize(m);

  long double base = 0.0;
  if (cfg.scheme == FdScheme::forward) {
    StaticSolver s(net);
    if (cfg.extended) {
      base = detail::extended_loss(s, load, spec);
    } else {
      rep.forward = s.solve(load);
      base = loss_value(spec, s.dofs(), rep.forward.u);
    }
    rep.loss = static_cast<double>(base);
    rep.solves_used = 1;
  }
  for (std::size_t b = 0; b < m; ++b) {
    const double k = net.bonds[b].k;
    const double h = cfg.relative ? cfg.step * k : cfg.step;
    if (cfg.scheme == FdScheme::forward) {
      rep.grad[b] = static_cast<double>(
          (detail::perturbed_loss(net, b, k + h, load, spec, cfg.extended) - base) / h);
      rep.solves_used += 1;
    } else {
      if (k - h < 0.0)
        throw ConfigError("central difference step exceeds stiffness of bond " +
                          std::to_string(b));
      const long double up = detail::perturbed_loss(net, b, k + h, load, spec, cfg.extended);
      const long double dn = detail::perturbed_loss(net, b, k - h, load, spec, cfg.extended);
      rep.grad[b] = static_cast<double>((up - dn) / (2.0L * h));
      rep.solves_used += 2;
    }
  }
  return rep;
}

/// Largest componentwise relative deviation of `approx` from `exact`.
/// Components whose exact magnitude is below `abs_floor` are compared
/// absolutely instead.
inline double max_relative_error(const std::vector<double>& approx,
                                 const std::vector<double>& exact,
                                 double abs_floor = 1e-12) {
  if (approx.size() != exact.size())
    throw ConfigError("gradient length mismatch");
  double worst = 0.0;
  for (std::size_t b = 0; b < exact.size(); ++b) {
    const double diff = std::abs(approx[b] - exact[b]);
    const double mag = std::abs(exact[b]);
    worst = std::max(worst, mag < abs_floor ? diff : diff / mag);
  }
  return worst;
}

struct SweepRow {
  double step = 0.0;
  double max_rel_error = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t argmin = 0;
};

/// Log-spaced steps from `lo` to `hi` inclusive, `per_decade` points per decade.
inline std::vector<double> log_steps(double lo, double hi, int per_decade = 1) {
  if (!(lo > 0.0) || !(hi >= lo) || per_decade < 1)
    throw ConfigError("invalid step range");
  std::vector<double> out;
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  const int n = static_cast<int>(std::lround((b - a) * per_decade));
  for (int i = 0; i <= n; ++i)
    out.push_back(std::pow(10.0, a + (b - a) * i / std::max(n, 1)));
  return out;
}

/// Finite-difference error against the adjoint gradient for each step size.
inline SweepResult step_sweep(const Network& net, const LoadCase& load,
                              const LossSpec& spec,
                              const std::vector<double>& steps,
                              FdScheme scheme = FdScheme::forward) {
  if (steps.empty()) throw ConfigError("step sweep needs at least one step");
  const auto exact = gradient(net, load, spec).grad;
  SweepResult out;
  for (double h : steps) {
    auto fd = fd_gradient(net, load, spec, FdConfig{scheme, h, false});
    out.rows.push_back({h, max_relative_error(fd.grad, exact)});
  }
  for (std::size_t i = 1; i < out.rows.size(); ++i)
    if (out.rows[i].max_rel_error < out.rows[out.argmin].max_rel_error)
      out.argmin = i;
  return out;
}

}  // namespace mnn
