#pragma once

// Losses over nodal displacements with analytic gradients dL/du.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "mnn/error.hpp"
#include "mnn/lattice.hpp"
#include "mnn/statics.hpp"

namespace mnn {

struct DofRef {
  NodeId node = 0;
  Axis axis = Axis::y;
};

/// L = (u_o + c)^2 on a single output DOF.
struct QuadraticLoss {
  DofRef output;
  double offset = 0.0;  // m
};

struct RegressionTarget {
  DofRef dof;
  double value = 0.0;  // m
};

/// L = (1/N) sum_j (u_j - target_j)^2.
struct MseLoss {
  std::vector<RegressionTarget> targets;
};

/// Softmax over gamma * |u_c| followed by cross-entropy against `label`.
struct CrossEntropyLoss {
  std::vector<DofRef> outputs;
  std::vector<double> label;  // one-hot
  double gamma = 1000.0;      // 1/m

  static CrossEntropyLoss one_hot(std::vector<DofRef> outputs,
                                  std::size_t cls, double gamma = 1000.0) {
    std::vector<double> y(outputs.size(), 0.0);
    if (cls >= y.size()) throw ConfigError("class index out of range");
    y[cls] = 1.0;
    return CrossEntropyLoss{std::move(outputs), std::move(y), gamma};
  }
};

using LossSpec = std::variant<QuadraticLoss, MseLoss, CrossEntropyLoss>;

namespace detail {

template <class V>
typename V::Scalar at_dof(const DofMap& dofs, const V& u, const DofRef& r) {
  return u[static_cast<Eigen::Index>(dofs.at(r.node, r.axis))];
}

template <class V>
void check_dims(const DofMap& dofs, const V& u) {
  if (static_cast<std::size_t>(u.size()) != dofs.size())
    throw ConfigError("displacement vector has " + std::to_string(u.size()) +
                      " entries, expected " + std::to_string(dofs.size()));
}

inline void check_cross_entropy(const CrossEntropyLoss& ce) {
  if (ce.outputs.empty()) throw ConfigError("cross-entropy needs outputs");
  if (ce.label.size() != ce.outputs.size())
    throw ConfigError("cross-entropy label size does not match outputs");
  if (!(ce.gamma > 0.0)) throw ConfigError("cross-entropy gamma must be > 0");
  double s = 0.0;
  for (double y : ce.label) {
    if (y < 0.0 || y > 1.0) throw ConfigError("label entries must lie in [0, 1]");
    s += y;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ConfigError("label must sum to 1");
}

inline double sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace detail

/// Softmax of gamma |u_c| over the cross-entropy outputs.
inline std::vector<double> class_probabilities(const CrossEntropyLoss& ce,
                                               const DofMap& dofs,
                                               const Vector& u) {
  detail::check_cross_entropy(ce);
  std::vector<double> z(ce.outputs.size());
  for (std::size_t c = 0; c < z.size(); ++c)
    z[c] = ce.gamma * std::abs(detail::at_dof(dofs, u, ce.outputs[c]));
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

/// Loss in the scalar type of `u`; the FD oracle also evaluates it in long double.
template <class S>
S loss_value_as(const LossSpec& spec, const DofMap& dofs,
                const Eigen::Matrix<S, Eigen::Dynamic, 1>& u) {
  using std::abs, std::exp, std::log;
  detail::check_dims(dofs, u);
  return std::visit(
      [&](const auto& l) -> S {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, QuadraticLoss>) {
          S r = detail::at_dof(dofs, u, l.output) + l.offset;
          return r * r;
        } else if constexpr (std::is_same_v<T, MseLoss>) {
          if (l.targets.empty()) throw ConfigError("MSE loss has no targets");
          S s = 0.0;
          for (const auto& t : l.targets) {
            S r = detail::at_dof(dofs, u, t.dof) - t.value;
            s += r * r;
          }
          return s / static_cast<S>(l.targets.size());
        } else {
          detail::check_cross_entropy(l);
          // -sum y_c (z_c - logsumexp(z))
          std::vector<S> z(l.outputs.size());
          for (std::size_t c = 0; c < z.size(); ++c)
            z[c] = static_cast<S>(l.gamma) * abs(detail::at_dof(dofs, u, l.outputs[c]));
          const S zmax = *std::max_element(z.begin(), z.end());
          S sum = 0.0;
          for (S v : z) sum += exp(v - zmax);
          const S lse = zmax + log(sum);
          S loss = 0.0;
          for (std::size_t c = 0; c < z.size(); ++c)
            if (l.label[c] != 0.0) loss -= l.label[c] * (z[c] - lse);
          return loss;
        }
      },
      spec);
}

inline double loss_value(const LossSpec& spec, const DofMap& dofs, const Vector& u) {
  return loss_value_as<double>(spec, dofs, u);
}

/// dL/du over all free DOFs; nonzero only on the DOFs the loss reads.
///
/// For cross-entropy, sign(0) is taken as 0.
inline Vector loss_gradient(const LossSpec& spec, const DofMap& dofs,
                            const Vector& u) {
  detail::check_dims(dofs, u);
  Vector g = Vector::Zero(u.size());
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, QuadraticLoss>) {
          auto d = static_cast<Eigen::Index>(dofs.at(l.output.node, l.output.axis));
          g[d] += 2.0 * (u[d] + l.offset);
        } else if constexpr (std::is_same_v<T, MseLoss>) {
          if (l.targets.empty()) throw ConfigError("MSE loss has no targets");
          const double n = static_cast<double>(l.targets.size());
          for (const auto& t : l.targets) {
            auto d = static_cast<Eigen::Index>(dofs.at(t.dof.node, t.dof.axis));
            g[d] += 2.0 / n * (u[d] - t.value);
          }
        } else {
          auto p = class_probabilities(l, dofs, u);
          for (std::size_t c = 0; c < l.outputs.size(); ++c) {
            auto d = static_cast<Eigen::Index>(
                dofs.at(l.outputs[c].node, l.outputs[c].axis));
            g[d] += l.gamma * (p[c] - l.label[c]) * detail::sign(u[d]);
          }
        }
      },
      spec);
  return g;
}

/// Free-DOF indices the loss depends on, in declaration order.
inline std::vector<std::size_t> output_dofs(const LossSpec& spec,
                                            const DofMap& dofs) {
  std::vector<std::size_t> out;
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, QuadraticLoss>) {
          out.push_back(dofs.at(l.output.node, l.output.axis));
        } else if constexpr (std::is_same_v<T, MseLoss>) {
          for (const auto& t : l.targets)
            out.push_back(dofs.at(t.dof.node, t.dof.axis));
        } else {
          for (const auto& o : l.outputs) out.push_back(dofs.at(o.node, o.axis));
        }
      },
      spec);
  return out;
}

}  // namespace mnn
