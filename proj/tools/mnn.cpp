// Command-line front end: build, solve, grad, grad-check, sweep-fd, train,
// eval, prune, render.
//
// Exit codes: 0 success, 1 runtime/model error (e.g. zero modes),
// 2 usage or configuration error.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mnn/io.hpp"
#include "mnn/mnn.hpp"

namespace fs = std::filesystem;
using mnn::io::json;

namespace {

struct Globals {
  std::string config;
  std::string out = ".";
  std::string network;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double tolerance = 1e-6;
};

std::string iso_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string num(double v) { return mnn::detail::format_double(v); }

/// Tracks inputs and outputs of one command and writes its manifest.
class Run {
 public:
  Run(std::string command, const Globals& g) : command_(std::move(command)), g_(g) {
    started_ = iso_now();
    calls0_ = mnn::solve_calls();
    fs::create_directories(g.out);
  }

  void add_input(const std::string& path) {
    inputs_.push_back(path);
    hashed_ += path + '\n' + mnn::io::read_file(path);
  }
  void add_param(const std::string& key, const json& value) { params_[key] = value; }

  std::string artifact(const std::string& name) {
    auto p = (fs::path(g_.out) / name).string();
    artifacts_.push_back(p);
    return p;
  }

  void write(const std::string& name, const std::string& content) {
    mnn::io::write_file_atomic(artifact(name), content);
  }

  void finish() {
    json m;
    m["command"] = command_;
    m["config_hash"] = mnn::io::content_hash(hashed_ + params_.dump());
    m["seed"] = g_.seed;
    m["started"] = started_;
    m["finished"] = iso_now();
    m["solver_calls"] = mnn::solve_calls() - calls0_;
    m["inputs"] = inputs_;
    m["parameters"] = params_;
    m["artifacts"] = artifacts_;
    mnn::io::write_file_atomic((fs::path(g_.out) / ("manifest-" + command_ + ".json")).string(),
                               m.dump(2) + "\n");
  }

 private:
  std::string command_;
  const Globals& g_;
  std::string started_;
  std::uint64_t calls0_ = 0;
  std::vector<std::string> inputs_;
  std::vector<std::string> artifacts_;
  std::string hashed_;
  json params_ = json::object();
};

json load_config(Run& run, const Globals& g, bool required) {
  if (g.config.empty()) {
    if (required) throw mnn::ConfigError("--config is required for this command");
    return json::object();
  }
  run.add_input(g.config);
  return mnn::io::load_json(g.config);
}

mnn::Network load_or_build_network(Run& run, const Globals& g, const json& cfg) {
  if (!g.network.empty()) {
    run.add_input(g.network);
    return mnn::io::load_network(g.network);
  }
  if (cfg.contains("lattice")) return mnn::build_triangular_lattice(mnn::io::lattice_spec_from_json(cfg));
  throw mnn::ConfigError("--network is required (or a 'lattice' block in the config)");
}

std::string resolve_relative(const std::string& path, const std::string& config) {
  if (path.empty() || fs::path(path).is_absolute() || fs::exists(path) || config.empty()) return path;
  auto alt = fs::path(config).parent_path() / path;
  return fs::exists(alt) ? alt.string() : path;
}

mnn::io::TaskConfig task_config(const json& cfg, const Globals& g) {
  auto tc = mnn::io::task_config_from_json(cfg);
  if (g.seed_set) {
    tc.seed = g.seed;
    tc.train.seed = g.seed;
  }
  tc.iris_path = resolve_relative(tc.iris_path, g.config);
  return tc;
}

void check_valid(const mnn::Network& net) {
  auto v = mnn::validate(net);
  if (!v.empty()) throw mnn::ConfigError("invalid network: " + v.front().to_string());
}

// ---------------------------------------------------------------------------

int cmd_build(const Globals& g) {
  Run run("build", g);
  auto cfg = load_config(run, g, true);
  auto net = mnn::build_triangular_lattice(mnn::io::lattice_spec_from_json(cfg));
  run.write("network.json", mnn::io::network_to_string(net));
  run.finish();
  std::cout << "nodes=" << net.num_nodes() << " bonds=" << net.num_bonds() << "\n";
  return 0;
}

int cmd_solve(const Globals& g) {
  Run run("solve", g);
  auto cfg = load_config(run, g, false);
  auto net = load_or_build_network(run, g, cfg);
  auto probe = mnn::io::probe_from_json(net, cfg);
  mnn::StaticSolver solver(net);
  auto sol = solver.solve(mnn::LoadCase::from_nodal(solver.dofs(), probe.loads));
  std::ostringstream nodes;
  nodes << "node,x,y,ux,uy\n";
  for (const auto& n : net.nodes)
    nodes << n.id << ',' << num(n.position.x) << ',' << num(n.position.y) << ','
          << num(mnn::displacement(solver.dofs(), sol.u, n.id, mnn::Axis::x)) << ','
          << num(mnn::displacement(solver.dofs(), sol.u, n.id, mnn::Axis::y)) << '\n';
  run.write("displacements.csv", nodes.str());
  std::ostringstream bonds;
  bonds << "bond_id,e\n";
  for (std::size_t b = 0; b < net.bonds.size(); ++b)
    bonds << b << ',' << num(sol.e[static_cast<Eigen::Index>(b)]) << '\n';
  run.write("elongations.csv", bonds.str());
  run.finish();
  std::cout << json{{"loss", mnn::loss_value(probe.loss, solver.dofs(), sol.u)}}.dump() << "\n";
  return 0;
}

int cmd_grad(const Globals& g) {
  Run run("grad", g);
  auto cfg = load_config(run, g, false);
  auto net = load_or_build_network(run, g, cfg);
  auto probe = mnn::io::probe_from_json(net, cfg);
  mnn::StaticSolver solver(net);
  auto rep = mnn::gradient(solver, mnn::LoadCase::from_nodal(solver.dofs(), probe.loads), probe.loss);
  std::ostringstream csv;
  csv << "bond_id,e,e_adj,grad\n";
  for (std::size_t b = 0; b < rep.grad.size(); ++b) {
    const auto i = static_cast<Eigen::Index>(b);
    csv << b << ',' << num(rep.forward.e[i]) << ',' << num(rep.adjoint.e[i]) << ','
        << num(rep.grad[b]) << '\n';
  }
  run.write("grad.csv", csv.str());
  run.finish();
  std::cout << json{{"loss", rep.loss}, {"solves_used", rep.solves_used}}.dump() << "\n";
  return 0;
}

int cmd_grad_check(const Globals& g, double step, bool plain_double) {
  Run run("grad-check", g);
  auto cfg = load_config(run, g, false);
  auto net = load_or_build_network(run, g, cfg);
  auto probe = mnn::io::probe_from_json(net, cfg);
  const double h = step > 0.0 ? step : 1e-6 * net.k_bounds.max;
  run.add_param("step", h);
  run.add_param("tolerance", g.tolerance);
  run.add_param("extended_precision", !plain_double);
  mnn::StaticSolver solver(net);
  auto load = mnn::LoadCase::from_nodal(solver.dofs(), probe.loads);
  auto adj = mnn::gradient(solver, load, probe.loss);
  auto fd = mnn::fd_gradient(net, load, probe.loss, {mnn::FdScheme::central, h, false, !plain_double});
  const double err = mnn::max_relative_error(fd.grad, adj.grad);
  const bool pass = err <= g.tolerance;
  run.finish();
  std::cout << json{{"max_rel_error", err}, {"tolerance", g.tolerance}, {"step", h},
                    {"extended_precision", !plain_double}, {"adjoint_solves", adj.solves_used}, {"fd_solves", fd.solves_used},
                    {"pass", pass}}.dump()
            << "\n";
  return pass ? 0 : 1;
}

int cmd_sweep_fd(const Globals& g, double lo, double hi, int per_decade, const std::string& scheme) {
  Run run("sweep-fd", g);
  auto cfg = load_config(run, g, false);
  auto net = load_or_build_network(run, g, cfg);
  auto probe = mnn::io::probe_from_json(net, cfg);
  if (scheme != "forward" && scheme != "central") throw mnn::ConfigError("scheme must be forward or central");
  run.add_param("min", lo);
  run.add_param("max", hi);
  run.add_param("per_decade", per_decade);
  run.add_param("scheme", scheme);
  mnn::StaticSolver solver(net);
  auto res = mnn::step_sweep(net, mnn::LoadCase::from_nodal(solver.dofs(), probe.loads), probe.loss,
                             mnn::log_steps(lo, hi, per_decade),
                             scheme == "forward" ? mnn::FdScheme::forward : mnn::FdScheme::central);
  std::ostringstream csv;
  csv << "delta_k,max_rel_error\n";
  for (const auto& r : res.rows) csv << num(r.step) << ',' << num(r.max_rel_error) << '\n';
  run.write("sweep.csv", csv.str());
  run.finish();
  std::cout << json{{"argmin_delta_k", res.rows[res.argmin].step},
                    {"min_rel_error", res.rows[res.argmin].max_rel_error}}.dump()
            << "\n";
  return 0;
}

int cmd_train(const Globals& g) {
  Run run("train", g);
  auto cfg = load_config(run, g, true);
  auto tc = task_config(cfg, g);
  auto net = load_or_build_network(run, g, cfg);
  check_valid(net);
  if (tc.kind == mnn::TaskKind::classification) run.add_input(tc.iris_path);
  auto task = mnn::io::make_task(net, tc);
  auto res = mnn::train(net, task, tc.train);
  const auto& rec = res.record;

  std::ostringstream hist;
  hist << "epoch,loss_train,loss_test,metric\n";
  for (std::size_t e = 0; e < rec.epochs.size(); ++e)
    hist << e + 1 << ',' << num(rec.epochs[e].loss_train) << ',' << num(rec.epochs[e].loss_test)
         << ',' << num(rec.epochs[e].metric_test) << '\n';
  run.write("history.csv", hist.str());
  run.write("trained_network.json", mnn::io::network_to_string(res.network));

  run.add_param("task_type", mnn::task_kind_name(tc.kind));
  run.add_param("epochs", tc.train.epochs);
  run.add_param("alpha", rec.alpha);
  run.add_param("beta1", tc.train.beta1);
  run.add_param("beta2", tc.train.beta2);
  run.add_param("eps", tc.train.eps);
  run.add_param("split", tc.train.split);
  run.add_param("param_scale", rec.param_scale);
  run.add_param("gamma", tc.gamma);
  run.add_param("train_indices", rec.train_indices);
  run.add_param("test_indices", rec.test_indices);
  run.add_param("training_solves", rec.solves_used);
  run.finish();
  std::cout << json{{"loss_train", rec.final.loss_train}, {"loss_test", rec.final.loss_test},
                    {"metric_train", rec.final.metric_train}, {"metric_test", rec.final.metric_test}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_eval(const Globals& g) {
  Run run("eval", g);
  auto cfg = load_config(run, g, true);
  auto tc = task_config(cfg, g);
  auto net = load_or_build_network(run, g, cfg);
  mnn::StaticSolver solver(net);
  json out{{"task_type", mnn::task_kind_name(tc.kind)}};
  switch (tc.kind) {
    case mnn::TaskKind::behavior: {
      auto ev = mnn::evaluate_behavior(solver, mnn::io::behavior_task(net, tc));
      out["u_Ly"] = ev.u_left;
      out["u_Ry"] = ev.u_right;
      out["abs_delta_uy"] = ev.abs_difference;
      break;
    }
    case mnn::TaskKind::regression: {
      auto rt = mnn::io::regression_task(net, tc);
      auto data = mnn::gen_regression_dataset(rt, tc.seed);
      auto ev = mnn::evaluate_regression(solver, rt, data);
      auto grid = mnn::regression_force_grid(rt);
      auto gev = mnn::evaluate_regression(solver, rt, grid);
      out["mse"] = ev.mse;
      out["r2"] = ev.r2;
      out["slopes"] = ev.slopes;
      out["grid_mse"] = gev.mse;
      break;
    }
    case mnn::TaskKind::classification: {
      run.add_input(tc.iris_path);
      auto task = mnn::io::make_task(net, tc);
      std::vector<std::size_t> tr, te;
      mnn::split_indices(task.samples.size(), tc.train.split, tc.train.seed, tr, te);
      auto all = mnn::evaluate_classification(solver, task);
      out["accuracy"] = all.accuracy;
      out["accuracy_train"] = mnn::evaluate_classification(solver, task, tr).accuracy;
      out["accuracy_test"] = mnn::evaluate_classification(solver, task, te).accuracy;
      out["ties"] = all.ties;
      break;
    }
  }
  run.write("eval.json", out.dump(2) + "\n");
  run.finish();
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_prune(const Globals& g, long bond, bool critical) {
  Run run("prune", g);
  auto cfg = load_config(run, g, critical);
  auto net = load_or_build_network(run, g, cfg);
  if (critical) {
    auto tc = task_config(cfg, g);
    auto task = mnn::io::make_task(net, tc);
    std::vector<std::size_t> tr, te;
    mnn::split_indices(task.samples.size(), tc.train.split, tc.train.seed, tr, te);
    std::vector<mnn::Sample> train_set;
    for (auto i : tr) train_set.push_back(task.samples[i]);
    auto pick = mnn::select_critical_bond(net, train_set);
    if (!pick) throw mnn::Error("every bond removal creates zero modes");
    bond = static_cast<long>(*pick);
  }
  if (bond < 0) throw mnn::ConfigError("--bond or --critical is required");
  auto res = mnn::prune_bond(net, static_cast<mnn::BondId>(bond));
  run.add_param("bond", bond);
  run.write("network.json", mnn::io::network_to_string(res.network));
  run.finish();
  auto violations = mnn::validate(res.network);
  json vj = json::array();
  for (const auto& v : violations) vj.push_back(v.to_string());
  std::cout << json{{"pruned_bond", bond}, {"bonds", res.network.num_bonds()},
                    {"zero_modes", mnn::detect_zero_modes(res.network).count}, {"violations", vj}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_render(const Globals& g) {
  Run run("render", g);
  auto cfg = load_config(run, g, false);
  auto net = load_or_build_network(run, g, cfg);
  mnn::NodeRoles roles;
  if (cfg.contains("task_type")) {
    auto tc = task_config(cfg, g);
    if (tc.kind == mnn::TaskKind::classification) {
      for (const auto& s : tc.inputs) roles.inputs.insert(mnn::resolve_node(net, s));
      for (const auto& s : tc.outputs) roles.outputs.insert(mnn::resolve_node(net, s));
    } else {
      roles.inputs.insert(mnn::resolve_node(net, tc.input));
      roles.outputs.insert(mnn::resolve_node(net, tc.left));
      roles.outputs.insert(mnn::resolve_node(net, tc.right));
    }
  } else if (cfg.contains("loads")) {
    auto probe = mnn::io::probe_from_json(net, cfg);
    for (const auto& f : probe.loads) roles.inputs.insert(f.node);
  }
  run.write("network.svg", mnn::render_svg(net, roles));
  run.finish();
  return 0;
}

void print_error(const char* kind, const std::string& msg) {
  std::cerr << "error: " << json{{"kind", kind}, {"message", msg}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mechanical neural networks: spring-network statics, adjoint gradients and training"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--tolerance", g.tolerance, "grad-check tolerance");
  auto* seed_opt = app.add_option("--seed", g.seed, "random seed (overrides config)");
  app.add_option("--network", g.network, "network JSON file");

  double step = 0.0, lo = 1e-10, hi = 1e-2;
  int per_decade = 1;
  std::string scheme = "forward";
  long bond = -1;
  bool critical = false;

  auto* build = app.add_subcommand("build", "build a triangular lattice from a spec");
  auto* solve = app.add_subcommand("solve", "solve statics for a load case");
  auto* grad = app.add_subcommand("grad", "adjoint gradient of a loss with respect to k");
  auto* check = app.add_subcommand("grad-check", "compare adjoint and finite-difference gradients");
  check->add_option("--step", step, "finite-difference step in N/m (default 1e-6 k_max)");
  bool plain_double = false;
  check->add_flag("--double", plain_double, "run the finite-difference solves in double precision");
  auto* sweep = app.add_subcommand("sweep-fd", "finite-difference error versus step size");
  sweep->add_option("--min", lo, "smallest step");
  sweep->add_option("--max", hi, "largest step");
  sweep->add_option("--per-decade", per_decade, "steps per decade");
  sweep->add_option("--scheme", scheme, "forward or central");
  auto* trn = app.add_subcommand("train", "train bond stiffnesses on a task");
  auto* eval = app.add_subcommand("eval", "evaluate a network on a task");
  auto* prune = app.add_subcommand("prune", "remove a bond");
  prune->add_option("--bond", bond, "bond id to remove");
  prune->add_flag("--critical", critical, "remove the highest-impact bond for the configured task");
  auto* render = app.add_subcommand("render", "draw the network as SVG");
  for (auto* sc : {build, solve, grad, check, sweep, trn, eval, prune, render}) sc->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*build) return cmd_build(g);
    if (*solve) return cmd_solve(g);
    if (*grad) return cmd_grad(g);
    if (*check) return cmd_grad_check(g, step, plain_double);
    if (*sweep) return cmd_sweep_fd(g, lo, hi, per_decade, scheme);
    if (*trn) return cmd_train(g);
    if (*eval) return cmd_eval(g);
    if (*prune) return cmd_prune(g, bond, critical);
    if (*render) return cmd_render(g);
  } catch (const mnn::ConfigError& e) {
    print_error("config", e.what());
    return 2;
  } catch (const mnn::ZeroModeError& e) {
    print_error("zero_modes", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return 1;
  }
  return 2;
}
