#pragma once

// Full-batch training of bond stiffnesses with Adam under box constraints.
//
// The optimizer variable is the bond width w = k / param_scale; with the
// default scale the stiffness band maps onto [1.5, 2.5] width units, so the
// learning rate is a width increment per step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mnn/adjoint.hpp"
#include "mnn/error.hpp"
#include "mnn/lattice.hpp"
#include "mnn/statics.hpp"
#include "mnn/tasks.hpp"

namespace mnn {

inline constexpr double kMaxWidth = 2.5;

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double alpha_, double beta1_ = 0.9, double beta2_ = 0.999,
            double eps_ = 1e-8)
      : m(n, 0.0), v(n, 0.0), alpha(alpha_), beta1(beta1_), beta2(beta2_), eps(eps_) {}
};

/// One bias-corrected Adam update followed by projection onto [lo, hi].
inline std::vector<double> adam_step(AdamState& st, std::span<const double> x,
                                     std::span<const double> grad, double lo, double hi) {
  if (x.size() != grad.size()) throw ConfigError("adam_step: parameter/gradient size mismatch");
  if (st.m.empty() && st.v.empty() && st.t == 0) {
    st.m.assign(x.size(), 0.0);
    st.v.assign(x.size(), 0.0);
  }
  if (st.m.size() != x.size() || st.v.size() != x.size())
    throw ConfigError("adam_step: state size mismatch");
  ++st.t;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    out[i] = std::clamp(x[i] - st.alpha * mhat / (std::sqrt(vhat) + st.eps), lo, hi);
  }
  return out;
}

struct TrainConfig {
  int epochs = 100;
  std::optional<double> alpha;  // defaults per task kind
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  double split = 0.7;
  /// N/m per optimizer unit; defaults to k_max / 2.5.
  std::optional<double> param_scale;
  /// Store k every this many epochs (0: final only).
  int snapshot_every = 0;
};

struct EpochStats {
  double loss_train = 0.0;
  double loss_test = 0.0;
  double metric_train = 0.0;
  double metric_test = 0.0;
};

struct TrainRecord {
  std::vector<EpochStats> epochs;  // state at the start of each epoch
  EpochStats final;                // state after the last update
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  std::vector<std::vector<double>> k_snapshots;
  std::vector<double> final_k;
  std::size_t solves_used = 0;  // adjoint-gradient solves only
  double alpha = 0.0;
  double param_scale = 0.0;
};

struct TrainResult {
  Network network;
  TrainRecord record;
};

/// Seeded shuffle split; a single-sample task trains and tests on that sample.
inline void split_indices(std::size_t n, double fraction, std::uint64_t seed,
                          std::vector<std::size_t>& train, std::vector<std::size_t>& test) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must be in (0, 1)");
  if (n == 0) throw ConfigError("task has no samples");
  train.clear();
  test.clear();
  if (n == 1) {
    train = {0};
    test = {0};
    return;
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(idx[i], idx[pick(rng)]);
  }
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
}

namespace detail {

inline EpochStats evaluate_epoch(const StaticSolver& solver, const Task& task,
                                 const std::vector<std::size_t>& train,
                                 const std::vector<std::size_t>& test,
                                 std::optional<double> loss_train) {
  EpochStats s;
  s.loss_train = loss_train ? *loss_train : mean_loss(solver, task, train);
  s.loss_test = mean_loss(solver, task, test);
  s.metric_train = task_metric(solver, task, train);
  s.metric_test = task_metric(solver, task, test);
  return s;
}

}  // namespace detail

/// Trains the stiffnesses of `net` on `task`, starting from the stiffness the
/// network already carries.
inline TrainResult train(const Network& net, const Task& task, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  TrainRecord rec;
  split_indices(task.samples.size(), cfg.split, cfg.seed, rec.train_indices, rec.test_indices);
  rec.alpha = cfg.alpha.value_or(default_learning_rate(task.kind));
  rec.param_scale = cfg.param_scale.value_or(net.k_bounds.max / kMaxWidth);
  if (!(rec.param_scale > 0.0)) throw ConfigError("param_scale must be > 0");

  std::vector<Sample> train_set;
  for (std::size_t i : rec.train_indices) train_set.push_back(task.samples[i]);

  const double s = rec.param_scale;
  const double lo = net.k_bounds.min / s;
  const double hi = net.k_bounds.max / s;
  AdamState adam(net.bonds.size(), rec.alpha, cfg.beta1, cfg.beta2, cfg.eps);

  Network cur = net;
  std::vector<double> w(net.bonds.size());
  for (std::size_t b = 0; b < w.size(); ++b) w[b] = net.bonds[b].k / s;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    try {
      StaticSolver solver(cur);
      auto rep = batch_gradient(solver, train_set);
      rec.solves_used += rep.solves_used;
      rec.epochs.push_back(
          detail::evaluate_epoch(solver, task, rec.train_indices, rec.test_indices, rep.loss));
      std::vector<double> gw(rep.grad.size());
      for (std::size_t b = 0; b < gw.size(); ++b) gw[b] = rep.grad[b] * s;
      w = adam_step(adam, w, gw, lo, hi);
    } catch (const ZeroModeError& e) {
      throw ZeroModeError("epoch " + std::to_string(epoch + 1) + ": " + e.what(), e.dof());
    }
    std::vector<double> k(w.size());
    for (std::size_t b = 0; b < k.size(); ++b)
      k[b] = std::clamp(w[b] * s, net.k_bounds.min, net.k_bounds.max);
    cur = cur.with_stiffness(k);
    if (cfg.snapshot_every > 0 && (epoch + 1) % cfg.snapshot_every == 0)
      rec.k_snapshots.push_back(k);
  }
  rec.final_k = cur.stiffness();
  rec.final = detail::evaluate_epoch(StaticSolver(cur), task, rec.train_indices,
                                     rec.test_indices, std::nullopt);
  return {std::move(cur), std::move(rec)};
}

/// Warm-started training on a new task; the optimizer state starts fresh.
inline TrainResult retrain(const Network& trained, const Task& task, const TrainConfig& cfg) {
  return train(trained, task, cfg);
}

}  // namespace mnn
