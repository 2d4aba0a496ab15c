#pragma once

// Ranking bonds by how much the loss depends on them, for damage experiments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "mnn/adjoint.hpp"
#include "mnn/lattice.hpp"
#include "mnn/statics.hpp"

namespace mnn {

struct BondImpact {
  BondId bond = 0;
  double impact = 0.0;  // |k_b * dL/dk_b|
};

/// First-order loss change from removing each bond (k_b -> 0), largest first.
inline std::vector<BondImpact> rank_bonds_by_impact(const Network& net,
                                                    std::span<const Sample> samples) {
  auto rep = batch_gradient(net, samples);
  std::vector<BondImpact> out(net.bonds.size());
  for (std::size_t b = 0; b < out.size(); ++b)
    out[b] = {b, std::abs(net.bonds[b].k * rep.grad[b])};
  std::stable_sort(out.begin(), out.end(),
                   [](const BondImpact& a, const BondImpact& c) { return a.impact > c.impact; });
  return out;
}

/// Highest-impact bond whose removal leaves the network free of zero modes.
inline std::optional<BondId> select_critical_bond(const Network& net,
                                                  std::span<const Sample> samples) {
  for (const auto& bi : rank_bonds_by_impact(net, samples)) {
    if (detect_zero_modes(prune_bond(net, bi.bond).network).positive_definite) return bi.bond;
  }
  return std::nullopt;
}

}  // namespace mnn
