// Acceptance run: one PASS/FAIL line per criterion, measured values alongside.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "helpers.hpp"

using namespace mnn;
using namespace mnn::testing;

namespace {

using Clock = std::chrono::steady_clock;

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, const std::string& name, bool pass, const std::string& detail, double secs) {
  std::printf("[%s] %2d %-28s %s (%.2f s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str(), secs);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// Default 7x7 symmetric lattice used by the learning tasks.
Network task_lattice() {
  LatticeSpec s{7, 7};
  s.symmetric = true;
  s.k_ref = 80.0;
  return build_triangular_lattice(s);
}

// 1 ---------------------------------------------------------------------------
void gradient_exactness() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(2, 5);
  double worst = 0.0, worst_double = 0.0;
  for (int c = 0; c < 10; ++c) {
    const int rows = dim(rng), cols = dim(rng);
    auto net = random_lattice(rng, rows, cols);
    auto load = LoadCase::from_nodal(DofMap(net), {random_force(rng, net)});
    QuadraticLoss q{random_dof(rng, net), 0.2};
    auto adj = gradient(net, load, q);
    // k_ref = 1 here, so the step is 1e-6 k_ref
    auto fd = fd_gradient(net, load, q, {FdScheme::central, 1e-6, false, true});
    worst = std::max(worst, max_relative_error(fd.grad, adj.grad));
    auto fd_double = fd_gradient(net, load, q, {FdScheme::central, 1e-6, false, false});
    worst_double = std::max(worst_double, max_relative_error(fd_double.grad, adj.grad));
  }
  const double t = seconds_since(t0);
  report(1, "gradient exactness", worst <= 1e-6 && t < 10.0,
         "max rel dev " + fmt(worst) + " vs long-double central FD (tol 1e-6); double-precision FD gives " +
             fmt(worst_double),
         t);
}

// 2 ---------------------------------------------------------------------------
void closed_form() {
  auto t0 = Clock::now();
  auto net = s1_network();
  auto rep = gradient(net, LoadCase::from_nodal(DofMap(net), {{1, Axis::x, 1.0}}),
                      QuadraticLoss{{1, Axis::x}, 0.0});
  // u = F/(k0+k1), target 0: dL/dk_b = -2 u F/(k0+k1)^2
  const double f = 1.0, ks = 2.0, u = f / ks;
  const double hand = -2.0 * u * f / (ks * ks);
  const double err = std::max(std::abs(rep.grad[0] - hand), std::abs(rep.grad[1] - hand));
  report(2, "closed-form oracle", err <= 1e-12 && hand == -0.25,
         "grad (" + fmt(rep.grad[0]) + ", " + fmt(rep.grad[1]) + "), abs err " + fmt(err),
         seconds_since(t0));
}

// 3 ---------------------------------------------------------------------------
// Smallest lattice with at least m bonds, then bonds stripped (last id first)
// while the network stays rigid, until exactly m remain.
Network network_with_bonds(std::size_t m) {
  for (int n = 2; n <= 12; ++n)
    for (int rows = 2; rows <= n; ++rows) {
      LatticeSpec s{rows, n};
      s.spacing = 1.0;
      s.k_ref = 1.0;
      auto net = build_triangular_lattice(s);
      if (net.num_bonds() < m) continue;
      bool progress = true;
      while (net.num_bonds() > m && progress) {
        progress = false;
        for (std::size_t b = net.num_bonds(); b-- > 0;) {
          auto cand = prune_bond(net, net.bonds[b].id).network;
          if (detect_zero_modes(cand).positive_definite) {
            net = std::move(cand);
            progress = true;
            break;
          }
        }
      }
      if (net.num_bonds() == m) return net;
    }
  throw ConfigError("no rigid network with " + std::to_string(m) + " bonds found");
}

void solve_budget() {
  auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (std::size_t m : {5u, 20u, 60u}) {
    auto net = network_with_bonds(m);
    auto free = free_nodes(net);
    auto load = LoadCase::from_nodal(DofMap(net), {{free.back(), Axis::y, -1.0}});
    QuadraticLoss q{{free.front(), Axis::y}, 0.1};
    auto before = solve_calls();
    auto adj = gradient(net, load, q);
    const auto adj_calls = solve_calls() - before;
    before = solve_calls();
    auto fd = fd_gradient(net, load, q, {FdScheme::forward, 1e-6, false});
    const auto fd_calls = solve_calls() - before;
    ok = ok && adj_calls == 2 && adj.solves_used == 2 && fd_calls == m + 1 && fd.solves_used == m + 1;
    detail += "m=" + std::to_string(m) + ": " + std::to_string(adj_calls) + " vs " +
              std::to_string(fd_calls) + "; ";
  }
  report(3, "solve budget", ok, detail, seconds_since(t0));
}

// 4 ---------------------------------------------------------------------------
void step_curve() {
  auto t0 = Clock::now();
  LatticeSpec s{3, 3};
  s.spacing = 1.0;
  s.k_ref = 1.0;
  auto net = build_triangular_lattice(s);
  auto load = LoadCase::from_nodal(DofMap(net), {{resolve_node(net, "bottom-right"), Axis::y, -1.0}});
  QuadraticLoss q{{resolve_node(net, "bottom-left"), Axis::y}, 0.5};
  auto res = step_sweep(net, load, q, log_steps(1e-10, 1e-2, 1));
  const double best = res.rows[res.argmin].max_rel_error;
  const double lo = res.rows.front().max_rel_error, hi = res.rows.back().max_rel_error;
  const bool interior = res.argmin > 0 && res.argmin + 1 < res.rows.size();
  report(4, "FD step-size curve",
         interior && best <= 1e-5 && lo >= 10 * best && hi >= 10 * best,
         "argmin dk " + fmt(res.rows[res.argmin].step) + " err " + fmt(best) + ", endpoints " +
             fmt(lo) + " / " + fmt(hi),
         seconds_since(t0));
}

// 5 ---------------------------------------------------------------------------
void adjoint_load_replication() {
  auto t0 = Clock::now();
  // formula level, at the quoted displacement
  Network one;
  one.nodes = {{0, {0, 0}, true, std::nullopt}, {1, {0, -1}, false, Axis::x}};
  one.bonds = {{0, 0, 1, 1.0, 1.0}};
  one.k_bounds = {0.5, 1.5};
  DofMap d1(one);
  Vector u1(1);
  u1[0] = -0.82e-3;
  QuadraticLoss q1{{1, Axis::y}, 0.025};
  const double quoted = adjoint_load(q1, d1, u1).forces[0];
  const bool formula_ok = std::abs(quoted - (-0.04836)) <= 1e-15;

  // lattice scaled so the forward response sits at -0.82 mm
  auto net = task_lattice();
  const NodeId in = resolve_node(net, "bottom-center"), out = resolve_node(net, "bottom-left");
  const double f = grams_to_newtons(10.0);
  auto u_at = [&](const Network& n) {
    StaticSolver s(n);
    auto sol = s.solve(LoadCase::from_nodal(s.dofs(), {{in, Axis::y, -f}}));
    return std::pair{displacement(s.dofs(), sol.u, out, Axis::y), sol.u};
  };
  const double u0 = u_at(net).first;
  auto k = net.stiffness();
  for (double& v : k) v *= u0 / -0.82e-3;
  Network tuned = net;
  tuned.k_bounds = {net.k_bounds.min * u0 / -0.82e-3, net.k_bounds.max * u0 / -0.82e-3};
  tuned = tuned.with_stiffness(k);
  auto [u, field] = u_at(tuned);
  DofMap dofs(tuned);
  QuadraticLoss q{{out, Axis::y}, 0.025};
  auto adj = adjoint_load(q, dofs, field);
  const double got = adj.forces[static_cast<Eigen::Index>(dofs.at(out, Axis::y))];
  const bool exact = got == -2.0 * (u + 0.025);
  const bool support = adj.forces.cwiseAbs().sum() == std::abs(got);
  report(5, "adjoint-load replication", formula_ok && exact && support && u0 < 0.0,
         "quoted u -> " + fmt(quoted) + " N (" + fmt(-quoted / (kGravity * 1e-3)) +
             " g); tuned lattice u_Ly " + fmt(u * 1e3) + " mm -> " + fmt(got) + " N",
         seconds_since(t0));
}

// 6 ---------------------------------------------------------------------------
void behavior() {
  auto t0 = Clock::now();
  auto net = task_lattice();
  BehaviorTask bt;
  bt.input = resolve_node(net, "bottom-center");
  bt.left = resolve_node(net, "bottom-left");
  bt.right = resolve_node(net, "bottom-right");
  auto pre = evaluate_behavior(net, bt);
  const double pre_diff = pre.abs_difference;
  const double pre_rel = pre_diff / std::max(std::abs(pre.u_left), std::abs(pre.u_right));
  bool ok = pre_rel <= 1e-10;
  std::string detail = "pre |du| " + fmt(pre_diff) + " m (rel " + fmt(pre_rel) + ")";
  for (std::size_t label : {0u, 1u}) {
    bt.label = label;
    TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.alpha = 0.005;
    auto res = train(net, make_behavior_task(bt), cfg);
    auto ev = evaluate_behavior(res.network, bt);
    const bool side = label == 0 ? std::abs(ev.u_left) > std::abs(ev.u_right)
                                 : std::abs(ev.u_right) > std::abs(ev.u_left);
    ok = ok && side && ev.abs_difference >= 10.0 * pre_diff &&
         res.record.final.loss_train < std::log(2.0);
    detail += std::string("; ") + (label == 0 ? "L" : "R") + ": |du| " +
              fmt(ev.abs_difference * 1e3) + " mm, loss " + fmt(res.record.final.loss_train);
  }
  const double t = seconds_since(t0);
  report(6, "behavior learning", ok && t < 60.0, detail, t);
}

// 7 ---------------------------------------------------------------------------
RegressionTask regression_task(const Network& net, double sigma) {
  RegressionTask rt;
  rt.input = resolve_node(net, "bottom-center");
  rt.left = resolve_node(net, "bottom-left");
  rt.right = resolve_node(net, "bottom-right");
  rt.noise_sigma = sigma;
  return rt;
}

// slopes within rel of target (zero slope within 0.0008 m/N absolute)
bool slopes_ok(const std::array<double, 4>& got, const std::array<double, 4>& want, double rel) {
  for (std::size_t o = 0; o < 4; ++o) {
    if (want[o] == 0.0) {
      if (std::abs(got[o]) > 0.0008) return false;
    } else if (std::abs(got[o] - want[o]) > rel * std::abs(want[o])) {
      return false;
    }
  }
  return true;
}

std::string slopes_str(const std::array<double, 4>& s) {
  return "(" + fmt(s[0]) + ", " + fmt(s[1]) + ", " + fmt(s[2]) + ", " + fmt(s[3]) + ")";
}

struct RegressionCheck {
  bool pass = false;
  std::string detail;
};

// Fitted slopes on the noise-free grid; MSE on the held-out split.
RegressionCheck check_regression(const Network& trained, const RegressionTask& rt,
                                 const std::vector<RegressionPoint>& data,
                                 const std::vector<std::size_t>& test, double slope_tol,
                                 bool check_mse) {
  StaticSolver s(trained);
  auto grid = regression_force_grid(rt);
  auto fit = evaluate_regression(s, rt, grid);
  std::vector<RegressionPoint> held;
  for (auto i : test) held.push_back(data[i]);
  const double ratio = evaluate_regression(s, rt, held).mse / mean_target_variance(data);
  RegressionCheck c;
  c.pass = slopes_ok(fit.slopes, rt.slopes, slope_tol) && (!check_mse || ratio <= 0.01);
  c.detail = "slopes " + slopes_str(fit.slopes) + ", test mse/var " + fmt(ratio);
  return c;
}

void regression() {
  auto t0 = Clock::now();
  auto net = task_lattice();
  bool ok = true;
  std::string detail;
  for (double sigma : {0.0, 1e-4}) {
    auto rt = regression_task(net, sigma);
    auto data = gen_regression_dataset(rt, 1);
    TrainConfig cfg;
    cfg.epochs = 5000;
    cfg.alpha = 0.1;
    cfg.seed = 1;
    auto res = train(net, make_regression_task(rt, data), cfg);
    auto c = check_regression(res.network, rt, data, res.record.test_indices,
                              sigma == 0.0 ? 0.05 : 0.10, sigma == 0.0);
    ok = ok && c.pass;
    detail += (sigma == 0.0 ? "clean: " : "; noisy: ") + c.detail;
  }
  const double t = seconds_since(t0);
  report(7, "regression", ok && t < 300.0, detail, t);
}

// 8, 9, 10 --------------------------------------------------------------------
struct IrisSetup {
  Network net;
  IrisTask it;
  Task task;
};

IrisSetup iris_setup() {
  IrisSetup s;
  s.net = task_lattice();
  const char* in[4] = {"row:5:0", "row:1:2", "bottom:4", "row:3:-1"};
  const char* out[3] = {"row:5:-1", "row:5:2", "row:1:4"};
  for (int i = 0; i < 4; ++i) s.it.inputs[i] = resolve_node(s.net, in[i]);
  for (int i = 0; i < 3; ++i) s.it.outputs[i] = resolve_node(s.net, out[i]);
  s.it.gain = 0.001 * kGravity;
  s.task = make_iris_task(s.it, load_iris(std::string(MNN_DATA_DIR) + "/iris.csv"));
  return s;
}

TrainConfig iris_config(std::uint64_t seed) {
  TrainConfig c;
  c.epochs = 100;
  c.alpha = 0.006;
  c.seed = seed;
  return c;
}

struct SeedRun {
  std::uint64_t seed = 0;
  TrainResult trained;
  double acc = 0.0;
  double t_train = 0.0;
};

void iris_suite() {
  auto setup = iris_setup();
  constexpr std::uint64_t kSeeds = 5;
  std::vector<SeedRun> runs;

  // 8
  auto t0 = Clock::now();
  int good = 0;
  std::string detail = "test acc";
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    SeedRun r;
    r.seed = seed;
    r.trained = train(setup.net, setup.task, iris_config(seed));
    r.acc = evaluate_classification(r.trained.network, setup.task, r.trained.record.test_indices).accuracy;
    good += r.acc >= 0.90 ? 1 : 0;
    detail += " s" + std::to_string(seed) + "=" + fmt(r.acc);
    runs.push_back(std::move(r));
  }
  double t = seconds_since(t0);
  detail += "; " + std::to_string(good) + "/5 seeds >= 0.90 (need 3)";
  report(8, "iris classification", good >= 3 && t < 300.0, detail, t);

  // 9: classification -> regression -> classification, warm-started
  t0 = Clock::now();
  int seq_good = 0;
  bool reg_all = true;
  detail = "final acc";
  std::string reg_detail;
  for (auto& r : runs) {
    auto rt = regression_task(setup.net, 0.0);
    auto data = gen_regression_dataset(rt, r.seed);
    TrainConfig rc;
    rc.epochs = 5000;
    rc.alpha = 0.1;
    rc.seed = r.seed;
    auto reg = retrain(r.trained.network, make_regression_task(rt, data), rc);
    auto c = check_regression(reg.network, rt, data, reg.record.test_indices, 0.05, true);
    reg_all = reg_all && c.pass;
    if (!c.pass) reg_detail += " s" + std::to_string(r.seed) + " " + c.detail;
    auto back = retrain(reg.network, setup.task, iris_config(r.seed));
    const double acc = evaluate_classification(back.network, setup.task, back.record.test_indices).accuracy;
    seq_good += acc >= 0.90 ? 1 : 0;
    detail += " s" + std::to_string(r.seed) + "=" + fmt(acc);
  }
  detail += "; " + std::to_string(seq_good) + "/5 seeds >= 0.90 (need 3); regression stage " +
            (reg_all ? "met slope/mse criteria on all seeds" : "failed:" + reg_detail);
  report(9, "retrainability sequence", seq_good >= 3 && reg_all, detail, seconds_since(t0));

  // 10: prune the highest-impact bond, retrain
  t0 = Clock::now();
  bool all = true;
  detail.clear();
  for (auto& r : runs) {
    std::vector<Sample> train_set;
    for (auto i : r.trained.record.train_indices) train_set.push_back(setup.task.samples[i]);
    auto bond = select_critical_bond(r.trained.network, train_set);
    if (!bond) {
      all = false;
      detail += " s" + std::to_string(r.seed) + ": no rigid prune;";
      continue;
    }
    auto pruned = prune_bond(r.trained.network, *bond).network;
    const auto& test = r.trained.record.test_indices;
    const double acc_p = evaluate_classification(pruned, setup.task, test).accuracy;
    auto again = retrain(pruned, setup.task, iris_config(r.seed));
    const double acc_r = evaluate_classification(again.network, setup.task, test).accuracy;
    const double drop = r.acc - acc_p;
    const double recovered = drop > 0.0 ? (acc_r - acc_p) / drop : 0.0;
    all = all && drop >= 0.15 && recovered >= 0.5;
    detail += " s" + std::to_string(r.seed) + ": " + fmt(r.acc) + "->" + fmt(acc_p) + "->" +
              fmt(acc_r) + " (rec " + fmt(recovered) + ");";
  }
  report(10, "prune and retrain", all, detail, seconds_since(t0));
}

// 11 --------------------------------------------------------------------------
void statics_invariants() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(2, 6);
  int energy = 0, recip = 0, superpos = 0, zero = 0;
  for (int c = 0; c < 100; ++c) {
    auto net = random_lattice(rng, dim(rng), dim(rng));
    StaticSolver s(net);
    const auto n = s.dofs().size();
    const auto kv = net.stiffness();

    LoadCase f{random_load_vector(rng, n), LoadKind::external};
    auto sol = s.solve(f);
    double strain = 0.0;
    for (std::size_t b = 0; b < kv.size(); ++b) strain += kv[b] * sol.e[b] * sol.e[b];
    energy += rel_diff(f.forces.dot(sol.u), strain) <= 1e-9;

    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const auto a = pick(rng), b = pick(rng);
    LoadCase fa = LoadCase::zero(s.dofs()), fb = LoadCase::zero(s.dofs());
    fa.forces[static_cast<Eigen::Index>(a)] = 1.0;
    fb.forces[static_cast<Eigen::Index>(b)] = 1.0;
    recip += rel_diff(s.solve(fa).u[static_cast<Eigen::Index>(b)],
                      s.solve(fb).u[static_cast<Eigen::Index>(a)]) <= 1e-10;

    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    const double al = coef(rng), be = coef(rng);
    LoadCase f1{random_load_vector(rng, n), LoadKind::external};
    LoadCase f2{random_load_vector(rng, n), LoadKind::external};
    Vector lhs = s.solve(LoadCase{al * f1.forces + be * f2.forces, LoadKind::external}).u;
    Vector rhs = al * s.solve(f1).u + be * s.solve(f2).u;
    superpos += (lhs - rhs).norm() <= 1e-10 * std::max(lhs.norm(), rhs.norm());

    // anchored lattice is rigid; isolating a free node adds exactly two
    // zero modes; the reported null vector carries no elongation
    bool z = detect_zero_modes(net).positive_definite;
    auto fr = free_nodes(net);
    const NodeId victim = fr[std::uniform_int_distribution<std::size_t>(0, fr.size() - 1)(rng)];
    Network iso = net;
    for (;;) {
      auto it = std::find_if(iso.bonds.begin(), iso.bonds.end(),
                             [&](const Bond& bd) { return bd.i == victim || bd.j == victim; });
      if (it == iso.bonds.end()) break;
      iso = prune_bond(iso, it->id).network;
    }
    auto rep = detect_zero_modes(iso);
    // baseline: the same bonds with the isolated node pinned, so neighbours
    // left dangling count on both sides
    Network pinned = iso;
    pinned.nodes[victim].fixed = true;
    const auto base = detect_zero_modes(pinned).count;
    if (rep.count == base + 2 && rep.null_vector) {
      const double stretch = (compatibility_matrix(iso) * *rep.null_vector).norm();
      z = z && stretch <= 1e-9;
    } else {
      z = false;
    }
    zero += z;
  }
  const double t = seconds_since(t0);
  report(11, "statics invariants", energy == 100 && recip == 100 && superpos == 100 && zero == 100 && t < 30.0,
         "energy " + std::to_string(energy) + "/100, reciprocity " + std::to_string(recip) +
             "/100, superposition " + std::to_string(superpos) + "/100, zero modes " +
             std::to_string(zero) + "/100",
         t);
}

template <class F>
void guarded(int id, const std::string& name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("threw: ") + e.what(), 0.0);
  }
}

}  // namespace

int main() {
  guarded(1, "gradient exactness", gradient_exactness);
  guarded(2, "closed-form oracle", closed_form);
  guarded(3, "solve budget", solve_budget);
  guarded(4, "FD step-size curve", step_curve);
  guarded(5, "adjoint-load replication", adjoint_load_replication);
  guarded(6, "behavior learning", behavior);
  guarded(7, "regression", regression);
  guarded(8, "iris suite (8-10)", iris_suite);
  guarded(11, "statics invariants", statics_invariants);
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
