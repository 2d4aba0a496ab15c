#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"

using namespace mnn;
using namespace mnn::testing;

namespace {

struct BehaviorSetup {
  Network net;
  BehaviorTask bt;
  Task task;
};

BehaviorSetup behavior_setup(std::size_t label) {
  // odd row count keeps the bottom row full, so bottom-center is on the mirror axis
  LatticeSpec s{5, 5};
  s.symmetric = true;
  s.k_ref = 80.0;
  BehaviorSetup b;
  b.net = build_triangular_lattice(s);
  b.bt.input = resolve_node(b.net, "bottom-center");
  b.bt.left = resolve_node(b.net, "bottom-left");
  b.bt.right = resolve_node(b.net, "bottom-right");
  b.bt.label = label;
  b.task = make_behavior_task(b.bt);
  return b;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParametersAlone) {
  AdamState st(3, 0.1);
  std::vector<double> x{1.0, 2.0, 3.0}, g(3, 0.0);
  EXPECT_EQ(adam_step(st, x, g, 0.0, 10.0), x);
  EXPECT_EQ(st.t, 1);
}

TEST(Adam, FirstStepHasMagnitudeAlpha) {
  for (double gval : {1e-3, 0.5, -7.0, 1e4}) {
    AdamState st(1, 0.01);
    std::vector<double> x{1.0}, g{gval};
    auto y = adam_step(st, x, g, -10.0, 10.0);
    EXPECT_NEAR(std::abs(y[0] - x[0]), 0.01, 1e-7);
    EXPECT_EQ(y[0] < x[0], gval > 0);
  }
}

TEST(Adam, ConstantGradientKeepsStepNearAlpha) {
  AdamState st(1, 0.01);
  std::vector<double> x{0.0}, g{2.0};
  for (int i = 0; i < 50; ++i) {
    auto y = adam_step(st, x, g, -10.0, 10.0);
    EXPECT_NEAR(x[0] - y[0], 0.01, 1e-8);
    x = y;
  }
}

TEST(Adam, ProjectsOntoBounds) {
  AdamState st(2, 1.0);
  std::vector<double> x{1.1, 1.9}, g{1.0, -1.0};
  auto y = adam_step(st, x, g, 1.0, 2.0);
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], 2.0);
  for (double v : st.v) EXPECT_GE(v, 0.0);
}

TEST(Adam, SizeMismatchThrows) {
  AdamState st(2, 0.1);
  std::vector<double> x{1.0, 2.0}, g{1.0};
  EXPECT_THROW(adam_step(st, x, g, 0.0, 1.0), ConfigError);
}

TEST(Split, DeterministicDisjointCovering) {
  std::vector<std::size_t> a, b, c, d;
  split_indices(150, 0.7, 42, a, b);
  split_indices(150, 0.7, 42, c, d);
  EXPECT_EQ(a, c);
  EXPECT_EQ(b, d);
  EXPECT_EQ(a.size(), 105u);
  EXPECT_EQ(b.size(), 45u);
  std::set<std::size_t> all(a.begin(), a.end());
  for (auto i : b) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 150u);
  split_indices(150, 0.7, 43, c, d);
  EXPECT_NE(a, c);
  split_indices(1, 0.7, 1, c, d);
  EXPECT_EQ(c, std::vector<std::size_t>{0});
  EXPECT_EQ(d, std::vector<std::size_t>{0});
  EXPECT_THROW(split_indices(10, 1.0, 1, c, d), ConfigError);
  EXPECT_THROW(split_indices(10, 0.0, 1, c, d), ConfigError);
}

TEST(Train, RejectsZeroEpochs) {
  auto b = behavior_setup(0);
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(train(b.net, b.task, cfg), ConfigError);
}

TEST(Train, BehaviorLearnsLeftAndRespectsBounds) {
  auto b = behavior_setup(0);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.snapshot_every = 10;
  auto res = train(b.net, b.task, cfg);
  const auto& rec = res.record;
  ASSERT_EQ(rec.epochs.size(), 200u);
  EXPECT_LT(rec.final.loss_train, rec.epochs.front().loss_train);
  auto pre = evaluate_behavior(b.net, b.bt);
  EXPECT_LE(pre.abs_difference, 1e-10 * std::abs(pre.u_left));
  auto ev = evaluate_behavior(res.network, b.bt);
  EXPECT_GT(std::abs(ev.u_left), std::abs(ev.u_right));
  EXPECT_EQ(rec.k_snapshots.size(), 20u);
  for (const auto& snap : rec.k_snapshots)
    for (double k : snap) {
      EXPECT_GE(k, b.net.k_bounds.min);
      EXPECT_LE(k, b.net.k_bounds.max);
    }
  EXPECT_EQ(rec.solves_used, 2u * rec.train_indices.size() * 200u);
  EXPECT_EQ(rec.final_k, res.network.stiffness());
  EXPECT_DOUBLE_EQ(rec.alpha, 0.005);
}

TEST(Train, DeterministicForSameSeed) {
  auto b = behavior_setup(1);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 9;
  auto r1 = train(b.net, b.task, cfg);
  auto r2 = train(b.net, b.task, cfg);
  EXPECT_EQ(r1.record.final_k, r2.record.final_k);
  ASSERT_EQ(r1.record.epochs.size(), r2.record.epochs.size());
  for (std::size_t e = 0; e < r1.record.epochs.size(); ++e) {
    EXPECT_EQ(r1.record.epochs[e].loss_train, r2.record.epochs[e].loss_train);
    EXPECT_EQ(r1.record.epochs[e].metric_test, r2.record.epochs[e].metric_test);
  }
}

TEST(Train, RegressionProgress) {
  LatticeSpec s{5, 5};
  s.symmetric = true;
  s.k_ref = 70.0;
  auto net = build_triangular_lattice(s);
  RegressionTask rt;
  rt.input = resolve_node(net, "bottom-center");
  rt.left = resolve_node(net, "bottom-left");
  rt.right = resolve_node(net, "bottom-right");
  auto data = gen_regression_dataset(rt, 3);
  auto task = make_regression_task(rt, data);
  TrainConfig cfg;
  cfg.epochs = 600;
  cfg.seed = 3;
  auto res = train(net, task, cfg);
  EXPECT_LT(res.record.final.loss_train, 0.01 * res.record.epochs.front().loss_train);
}

TEST(Retrain, WarmStartOnConvergedTaskDoesNotBlowUp) {
  auto b = behavior_setup(0);
  TrainConfig cfg;
  cfg.epochs = 300;
  auto first = train(b.net, b.task, cfg);
  cfg.epochs = 2;
  auto again = retrain(first.network, b.task, cfg);
  EXPECT_EQ(again.record.epochs.front().loss_train, first.record.final.loss_train);
  EXPECT_LE(again.record.epochs[1].loss_train, 1.05 * again.record.epochs[0].loss_train);
}

TEST(Train, ZeroModeAbortsWithEpoch) {
  auto b = behavior_setup(0);
  // detach the left output so the network has a mechanism
  Network net = b.net;
  for (;;) {
    auto it = std::find_if(net.bonds.begin(), net.bonds.end(),
                           [&](const Bond& x) { return x.i == b.bt.left || x.j == b.bt.left; });
    if (it == net.bonds.end()) break;
    net = prune_bond(net, it->id).network;
  }
  TrainConfig cfg;
  cfg.epochs = 3;
  try {
    train(net, b.task, cfg);
    FAIL() << "expected ZeroModeError";
  } catch (const ZeroModeError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}
