#pragma once

// Learning tasks on a spring network: behaviour learning (two-output
// cross-entropy), linear regression of nodal displacement against input force,
// and Iris classification by largest horizontal output displacement.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mnn/adjoint.hpp"
#include "mnn/error.hpp"
#include "mnn/lattice.hpp"
#include "mnn/losses.hpp"
#include "mnn/statics.hpp"

namespace mnn {

enum class TaskKind { behavior, regression, classification };

inline const char* task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::behavior: return "behavior";
    case TaskKind::regression: return "regression";
    case TaskKind::classification: return "classification";
  }
  return "?";
}

inline TaskKind parse_task_kind(const std::string& s) {
  if (s == "behavior") return TaskKind::behavior;
  if (s == "regression") return TaskKind::regression;
  if (s == "classification" || s == "iris") return TaskKind::classification;
  throw ConfigError("unknown task_type '" + s + "'");
}

/// Learning rates used for each task when none is configured.
inline double default_learning_rate(TaskKind k) {
  switch (k) {
    case TaskKind::behavior: return 0.005;
    case TaskKind::regression: return 0.1;
    case TaskKind::classification: return 0.006;
  }
  return 0.01;
}

/// A dataset bound to concrete node ids, ready for training.
struct Task {
  TaskKind kind = TaskKind::behavior;
  std::vector<Sample> samples;
  /// Output DOFs read by the metric (class nodes, regression outputs,
  /// or the L/R pair for behaviour learning).
  std::vector<DofRef> outputs;
  /// Class index per sample (classification) or preferred side (behaviour).
  std::vector<std::size_t> labels;
  /// Input force magnitude per sample (regression), N.
  std::vector<double> forces;
};

// ---------------------------------------------------------------------------
// Behaviour learning
// ---------------------------------------------------------------------------

struct BehaviorTask {
  NodeId input = 0;
  NodeId left = 0;
  NodeId right = 0;
  double force = 0.005 * kGravity;  // N, applied downward
  std::size_t label = 0;            // 0: left output larger, 1: right
  double gamma = 1000.0;
};

inline Task make_behavior_task(const BehaviorTask& b) {
  if (b.input == b.left || b.input == b.right || b.left == b.right)
    throw ConfigError("behavior task nodes must be distinct");
  if (b.label > 1) throw ConfigError("behavior label must be 0 (L) or 1 (R)");
  Task t;
  t.kind = TaskKind::behavior;
  t.outputs = {{b.left, Axis::y}, {b.right, Axis::y}};
  t.samples.push_back(Sample{{{b.input, Axis::y, -b.force}},
                             CrossEntropyLoss::one_hot(t.outputs, b.label, b.gamma)});
  t.labels = {b.label};
  t.forces = {b.force};
  return t;
}

struct BehaviorEval {
  double u_left = 0.0;
  double u_right = 0.0;
  double abs_difference = 0.0;
};

inline BehaviorEval evaluate_behavior(const StaticSolver& solver, const BehaviorTask& b) {
  auto sol = solver.solve(LoadCase::from_nodal(solver.dofs(), {{b.input, Axis::y, -b.force}}));
  BehaviorEval ev;
  ev.u_left = displacement(solver.dofs(), sol.u, b.left, Axis::y);
  ev.u_right = displacement(solver.dofs(), sol.u, b.right, Axis::y);
  ev.abs_difference = std::abs(ev.u_left - ev.u_right);
  return ev;
}

inline BehaviorEval evaluate_behavior(const Network& net, const BehaviorTask& b) {
  return evaluate_behavior(StaticSolver(net), b);
}

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

/// Output order for regression targets and fitted slopes.
enum RegressionOutput : std::size_t { kRx = 0, kRy = 1, kLx = 2, kLy = 3 };

/// Displacements are reported in the solver frame rotated by 180 degrees:
/// y positive downward, x positive leftward. A downward force then gives
/// positive vertical slopes.
struct RegressionTask {
  NodeId input = 0;
  NodeId left = 0;
  NodeId right = 0;
  std::array<double, 4> slopes{0.0, 0.016, 0.004, 0.016};  // m/N (Rx, Ry, Lx, Ly)
  std::size_t n_samples = 100;
  double f_max = 0.012 * kGravity;  // N
  double noise_sigma = 0.0;         // m

  std::array<DofRef, 4> output_dofs() const {
    return {DofRef{right, Axis::x}, DofRef{right, Axis::y}, DofRef{left, Axis::x},
            DofRef{left, Axis::y}};
  }
};

struct RegressionPoint {
  double force = 0.0;                 // N, downward
  std::array<double, 4> targets{};    // m, reporting frame
};

/// Maps a displacement between the reporting frame and the solver frame.
/// The reporting frame is the solver frame rotated by 180 degrees, so both
/// axes point along the (downward) load; the map is its own inverse.
inline double to_solver_frame(std::size_t /*output*/, double value) { return -value; }

inline std::vector<RegressionPoint> gen_regression_dataset(const RegressionTask& task,
                                                           std::uint64_t seed) {
  if (!(task.f_max > 0.0)) throw ConfigError("F_max must be > 0");
  if (task.noise_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> force(0.0, task.f_max);
  std::normal_distribution<double> noise(0.0, task.noise_sigma > 0.0 ? task.noise_sigma : 1.0);
  std::vector<RegressionPoint> out(task.n_samples);
  for (auto& p : out) {
    p.force = force(rng);
    for (std::size_t o = 0; o < 4; ++o) {
      p.targets[o] = task.slopes[o] * p.force;
      if (task.noise_sigma > 0.0) p.targets[o] += noise(rng);
    }
  }
  return out;
}

/// Noise-free evaluation grid: 0 to 12 g in 2 g steps.
inline std::vector<RegressionPoint> regression_force_grid(const RegressionTask& task) {
  std::vector<RegressionPoint> out;
  for (int g = 0; g <= 12; g += 2) {
    RegressionPoint p;
    p.force = grams_to_newtons(g);
    for (std::size_t o = 0; o < 4; ++o) p.targets[o] = task.slopes[o] * p.force;
    out.push_back(p);
  }
  return out;
}

inline Task make_regression_task(const RegressionTask& r,
                                 const std::vector<RegressionPoint>& data) {
  if (r.input == r.left || r.input == r.right || r.left == r.right)
    throw ConfigError("regression task nodes must be distinct");
  Task t;
  t.kind = TaskKind::regression;
  const auto dofs = r.output_dofs();
  t.outputs.assign(dofs.begin(), dofs.end());
  for (const auto& p : data) {
    MseLoss mse;
    for (std::size_t o = 0; o < 4; ++o)
      mse.targets.push_back({dofs[o], to_solver_frame(o, p.targets[o])});
    t.samples.push_back(Sample{{{r.input, Axis::y, -p.force}}, std::move(mse)});
    t.forces.push_back(p.force);
  }
  return t;
}

struct RegressionEval {
  double mse = 0.0;
  std::array<double, 4> slopes{};  // m/N, reporting frame
  double r2 = 0.0;
};

/// Least-squares slopes through the origin of each output against force,
/// MSE against the targets, and pooled R^2 of predictions vs targets.
inline RegressionEval evaluate_regression(const StaticSolver& solver, const RegressionTask& r,
                                          std::span<const RegressionPoint> data) {
  if (data.empty()) throw ConfigError("regression evaluation needs data");
  const auto dofs = r.output_dofs();
  std::array<double, 4> sfu{}, sum_t{};
  double sff = 0.0, sse = 0.0;
  std::vector<std::array<double, 4>> pred(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    auto sol = solver.solve(
        LoadCase::from_nodal(solver.dofs(), {{r.input, Axis::y, -data[s].force}}));
    for (std::size_t o = 0; o < 4; ++o) {
      double u = to_solver_frame(o, displacement(solver.dofs(), sol.u, dofs[o].node, dofs[o].axis));
      pred[s][o] = u;
      sfu[o] += data[s].force * u;
      sum_t[o] += data[s].targets[o];
      double res = u - data[s].targets[o];
      sse += res * res;
    }
    sff += data[s].force * data[s].force;
  }
  RegressionEval ev;
  const double n = static_cast<double>(data.size() * 4);
  ev.mse = sse / n;
  for (std::size_t o = 0; o < 4; ++o) ev.slopes[o] = sff > 0.0 ? sfu[o] / sff : 0.0;
  double mean = 0.0;
  for (double v : sum_t) mean += v;
  mean /= n;
  double sst = 0.0;
  for (const auto& p : data)
    for (double v : p.targets) sst += (v - mean) * (v - mean);
  ev.r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);
  return ev;
}

/// Mean over outputs of the per-output target variance.
inline double mean_target_variance(std::span<const RegressionPoint> data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t o = 0; o < 4; ++o) {
    double mean = 0.0;
    for (const auto& p : data) mean += p.targets[o];
    mean /= static_cast<double>(data.size());
    double var = 0.0;
    for (const auto& p : data) var += (p.targets[o] - mean) * (p.targets[o] - mean);
    total += var / static_cast<double>(data.size());
  }
  return total / 4.0;
}

// ---------------------------------------------------------------------------
// Iris
// ---------------------------------------------------------------------------

inline const std::array<std::string, 3>& iris_class_names() {
  static const std::array<std::string, 3> names{"setosa", "versicolor", "virginica"};
  return names;
}

struct IrisData {
  std::vector<std::array<double, 4>> features;
  std::vector<std::size_t> labels;
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && p == t.data() + t.size();
}

inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace detail

/// Parses a 5-column CSV (four numeric features, species label). A leading
/// header row is skipped; the "Iris-" prefix on labels is accepted.
inline IrisData parse_iris(std::istream& in) {
  IrisData out;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cols = detail::split(line, ',');
    std::array<double, 4> f{};
    bool numeric = cols.size() == 5;
    for (std::size_t c = 0; numeric && c < 4; ++c) numeric = detail::parse_double(cols[c], f[c]);
    if (first && !numeric) {
      first = false;
      continue;
    }
    first = false;
    if (cols.size() != 5)
      throw ConfigError("iris line " + std::to_string(lineno) + ": expected 5 columns, got " +
                        std::to_string(cols.size()));
    if (!numeric)
      throw ConfigError("iris line " + std::to_string(lineno) + ": non-numeric feature");
    std::string label = detail::trim(cols[4]);
    if (label.rfind("Iris-", 0) == 0) label = label.substr(5);
    const auto& names = iris_class_names();
    auto it = std::find(names.begin(), names.end(), label);
    if (it == names.end())
      throw ConfigError("iris line " + std::to_string(lineno) + ": unknown label '" + label + "'");
    out.features.push_back(f);
    out.labels.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  if (out.features.empty()) throw ConfigError("iris file contains no data rows");
  return out;
}

inline IrisData load_iris(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open iris file '" + path + "'");
  return parse_iris(in);
}

inline void write_iris(std::ostream& out, const IrisData& data) {
  out << "sepal_length,sepal_width,petal_length,petal_width,species\n";
  for (std::size_t r = 0; r < data.features.size(); ++r) {
    for (double v : data.features[r]) out << detail::format_double(v) << ',';
    out << iris_class_names().at(data.labels[r]) << '\n';
  }
}

/// Downward force magnitudes, gain * feature, in newtons. With
/// `round_to_grams` each force is rounded to a whole hanging mass.
inline std::vector<std::array<double, 4>> scale_features_to_forces(
    const std::vector<std::array<double, 4>>& features, double gain,
    bool round_to_grams = false) {
  if (!(gain > 0.0)) throw ConfigError("feature gain must be > 0");
  std::vector<std::array<double, 4>> out(features.size());
  for (std::size_t r = 0; r < features.size(); ++r) {
    for (std::size_t f = 0; f < 4; ++f) {
      if (features[r][f] < 0.0)
        throw ConfigError("negative feature in row " + std::to_string(r));
      double force = gain * features[r][f];
      if (round_to_grams) force = grams_to_newtons(std::round(force / grams_to_newtons(1.0)));
      out[r][f] = force;
    }
  }
  return out;
}

struct IrisTask {
  std::array<NodeId, 4> inputs{};
  std::array<NodeId, 3> outputs{};  // horizontal DOFs, one per class
  double gain = 0.001 * kGravity;   // N per feature unit (cm)
  double gamma = 1000.0;
  bool round_to_grams = false;

  std::vector<DofRef> output_dofs() const {
    return {{outputs[0], Axis::x}, {outputs[1], Axis::x}, {outputs[2], Axis::x}};
  }
};

inline Task make_iris_task(const IrisTask& t, const IrisData& data) {
  for (std::size_t a = 0; a < 7; ++a)
    for (std::size_t b = a + 1; b < 7; ++b) {
      NodeId na = a < 4 ? t.inputs[a] : t.outputs[a - 4];
      NodeId nb = b < 4 ? t.inputs[b] : t.outputs[b - 4];
      if (na == nb) throw ConfigError("iris task nodes must be distinct");
    }
  Task task;
  task.kind = TaskKind::classification;
  task.outputs = t.output_dofs();
  auto forces = scale_features_to_forces(data.features, t.gain, t.round_to_grams);
  for (std::size_t r = 0; r < forces.size(); ++r) {
    Sample s;
    for (std::size_t f = 0; f < 4; ++f) s.forces.push_back({t.inputs[f], Axis::y, -forces[r][f]});
    s.loss = CrossEntropyLoss::one_hot(task.outputs, data.labels[r], t.gamma);
    task.samples.push_back(std::move(s));
    task.labels.push_back(data.labels[r]);
  }
  return task;
}

/// Index of the largest |u| among the outputs; ties go to the lowest index.
inline std::size_t predict_class(const DofMap& dofs, const Vector& u,
                                 std::span<const DofRef> outputs, bool* tie = nullptr) {
  std::size_t best = 0;
  double best_v = -1.0;
  bool tied = false;
  for (std::size_t c = 0; c < outputs.size(); ++c) {
    double v = std::abs(displacement(dofs, u, outputs[c].node, outputs[c].axis));
    if (v > best_v) {
      best_v = v;
      best = c;
      tied = false;
    } else if (v == best_v) {
      tied = true;
    }
  }
  if (tie) *tie = tied;
  return best;
}

struct ClassificationEval {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t ties = 0;
};

/// Accuracy over the selected samples (all samples when `indices` is empty).
inline ClassificationEval evaluate_classification(const StaticSolver& solver, const Task& task,
                                                  std::span<const std::size_t> indices = {}) {
  if (task.labels.size() != task.samples.size())
    throw ConfigError("classification task needs one label per sample");
  ClassificationEval ev;
  auto visit = [&](std::size_t s) {
    auto sol = solver.solve(LoadCase::from_nodal(solver.dofs(), task.samples[s].forces));
    bool tie = false;
    auto cls = predict_class(solver.dofs(), sol.u, task.outputs, &tie);
    ev.ties += tie ? 1 : 0;
    ev.correct += cls == task.labels[s] ? 1 : 0;
    ++ev.total;
  };
  if (indices.empty()) {
    for (std::size_t s = 0; s < task.samples.size(); ++s) visit(s);
  } else {
    for (std::size_t s : indices) visit(s);
  }
  if (ev.total > 0) ev.accuracy = static_cast<double>(ev.correct) / static_cast<double>(ev.total);
  return ev;
}

inline ClassificationEval evaluate_classification(const Network& net, const Task& task,
                                                  std::span<const std::size_t> indices = {}) {
  return evaluate_classification(StaticSolver(net), task, indices);
}

// ---------------------------------------------------------------------------
// Generic per-task metric
// ---------------------------------------------------------------------------

/// Mean loss over the selected samples.
inline double mean_loss(const StaticSolver& solver, const Task& task,
                        std::span<const std::size_t> indices) {
  if (indices.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i : indices) {
    const auto& smp = task.samples[i];
    auto sol = solver.solve(LoadCase::from_nodal(solver.dofs(), smp.forces));
    s += loss_value(smp.loss, solver.dofs(), sol.u);
  }
  return s / static_cast<double>(indices.size());
}

/// Task metric over the selected samples: classification accuracy;
/// 1 - relative l2 error of the regression outputs; |u_L - u_R| for
/// behaviour learning.
inline double task_metric(const StaticSolver& solver, const Task& task,
                          std::span<const std::size_t> indices) {
  if (indices.empty()) return 0.0;
  switch (task.kind) {
    case TaskKind::classification:
      return evaluate_classification(solver, task, indices).accuracy;
    case TaskKind::regression: {
      double err = 0.0, ref = 0.0;
      for (std::size_t i : indices) {
        const auto& smp = task.samples[i];
        auto sol = solver.solve(LoadCase::from_nodal(solver.dofs(), smp.forces));
        for (const auto& t : std::get<MseLoss>(smp.loss).targets) {
          double u = displacement(solver.dofs(), sol.u, t.dof.node, t.dof.axis);
          err += (u - t.value) * (u - t.value);
          ref += t.value * t.value;
        }
      }
      return ref > 0.0 ? 1.0 - std::sqrt(err / ref) : 1.0 - std::sqrt(err);
    }
    case TaskKind::behavior: {
      const auto& smp = task.samples[indices.front()];
      auto sol = solver.solve(LoadCase::from_nodal(solver.dofs(), smp.forces));
      return std::abs(displacement(solver.dofs(), sol.u, task.outputs[0].node, Axis::y) -
                      displacement(solver.dofs(), sol.u, task.outputs[1].node, Axis::y));
    }
  }
  return 0.0;
}

}  // namespace mnn
