#pragma once

// JSON file formats: network files, lattice specs, task and probe configs.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mnn/error.hpp"
#include "mnn/lattice.hpp"
#include "mnn/losses.hpp"
#include "mnn/statics.hpp"
#include "mnn/tasks.hpp"
#include "mnn/trainer.hpp"

namespace mnn::io {

using json = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a temporary file and renames, so readers never see a
/// partially written file.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw Error("write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("cannot rename '" + tmp + "' to '" + path + "'");
}

inline json parse_json(const std::string& text, const std::string& what = "json") {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline json load_json(const std::string& path) { return parse_json(read_file(path), path); }

/// 64-bit FNV-1a digest, hex encoded.
inline std::string content_hash(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

template <class T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Network files
// ---------------------------------------------------------------------------

inline json network_to_json(const Network& net) {
  json j;
  json nodes = json::array();
  for (const auto& n : net.nodes) {
    json jn{{"id", n.id}, {"x", n.position.x}, {"y", n.position.y}, {"fixed", n.fixed}};
    if (n.constrained) jn["constrained"] = axis_name(*n.constrained);
    nodes.push_back(std::move(jn));
  }
  json bonds = json::array();
  for (const auto& b : net.bonds)
    bonds.push_back(json{{"id", b.id}, {"i", b.i}, {"j", b.j}, {"k", b.k}, {"rest_length", b.rest_length}});
  j["nodes"] = std::move(nodes);
  j["bonds"] = std::move(bonds);
  j["k_bounds"] = json{{"min", net.k_bounds.min}, {"max", net.k_bounds.max}};
  j["units"] = json{{"length", "m"}, {"stiffness", "N/m"}};
  return j;
}

inline std::string network_to_string(const Network& net) { return network_to_json(net).dump(2) + "\n"; }

inline Network network_from_json(const json& j) {
  Network net;
  try {
    for (const auto& n : j.at("nodes")) {
      Node nd;
      nd.id = n.at("id").get<NodeId>();
      nd.position = {n.at("x").get<double>(), n.at("y").get<double>()};
      nd.fixed = n.value("fixed", false);
      if (n.contains("constrained")) nd.constrained = parse_axis(n.at("constrained").get<std::string>());
      net.nodes.push_back(nd);
    }
    for (const auto& b : j.at("bonds")) {
      Bond bd;
      bd.id = b.at("id").get<BondId>();
      bd.i = b.at("i").get<NodeId>();
      bd.j = b.at("j").get<NodeId>();
      bd.k = b.at("k").get<double>();
      bd.rest_length = b.at("rest_length").get<double>();
      net.bonds.push_back(bd);
    }
    net.k_bounds.min = j.at("k_bounds").at("min").get<double>();
    net.k_bounds.max = j.at("k_bounds").at("max").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed network file: ") + e.what());
  }
  return net;
}

inline Network load_network(const std::string& path) {
  return network_from_json(load_json(path));
}

inline void save_network(const std::string& path, const Network& net) {
  write_file_atomic(path, network_to_string(net));
}

// ---------------------------------------------------------------------------
// Lattice spec
// ---------------------------------------------------------------------------

/// Reads a lattice spec from either the object itself or its "lattice" key.
inline LatticeSpec lattice_spec_from_json(const json& root) {
  const json& j = root.contains("lattice") ? root["lattice"] : root;
  LatticeSpec s;
  s.rows = detail::get_or(j, "rows", s.rows);
  s.cols = detail::get_or(j, "cols", s.cols);
  s.spacing = detail::get_or(j, "spacing", s.spacing);
  s.k_ref = detail::get_or(j, "k_ref", s.k_ref);
  s.symmetric = detail::get_or(j, "symmetric", s.symmetric);
  if (j.contains("default_k")) s.default_k = detail::require<double>(j, "default_k");
  if (j.contains("k_bounds")) {
    const auto& kb = j["k_bounds"];
    s.k_bounds = StiffnessBounds{detail::require<double>(kb, "min"), detail::require<double>(kb, "max")};
  }
  if (j.contains("fixed_nodes")) s.fixed_nodes = detail::require<std::vector<std::string>>(j, "fixed_nodes");
  return s;
}

inline json lattice_spec_to_json(const LatticeSpec& s) {
  json j{{"rows", s.rows}, {"cols", s.cols}, {"spacing", s.spacing}, {"k_ref", s.k_ref},
         {"symmetric", s.symmetric}, {"fixed_nodes", s.fixed_nodes}};
  if (s.default_k) j["default_k"] = *s.default_k;
  if (s.k_bounds) j["k_bounds"] = json{{"min", s.k_bounds->min}, {"max", s.k_bounds->max}};
  return j;
}

// ---------------------------------------------------------------------------
// Loads and losses (probe configs for solve / grad / grad-check / sweep-fd)
// ---------------------------------------------------------------------------

inline DofRef dof_from_json(const Network& net, const json& j) {
  return DofRef{resolve_node(net, detail::require<std::string>(j, "node")),
                parse_axis(detail::get_or<std::string>(j, "axis", "y"))};
}

/// Nodal loads: [{"node": sel, "axis": "y", "force": N}] or with "grams"
/// for a hanging mass (downward).
inline std::vector<NodalForce> loads_from_json(const Network& net, const json& arr) {
  std::vector<NodalForce> out;
  if (!arr.is_array()) throw ConfigError("'loads' must be an array");
  for (const auto& l : arr) {
    DofRef d = dof_from_json(net, l);
    double f = 0.0;
    if (l.contains("grams")) {
      f = -grams_to_newtons(detail::require<double>(l, "grams"));
      d.axis = Axis::y;
    } else {
      f = detail::require<double>(l, "force");
    }
    out.push_back({d.node, d.axis, f});
  }
  return out;
}

inline LossSpec loss_from_json(const Network& net, const json& j) {
  const auto type = detail::require<std::string>(j, "type");
  if (type == "quadratic") {
    const json& out = j.contains("output") ? j.at("output") : j;
    return QuadraticLoss{dof_from_json(net, out), detail::get_or(j, "offset", 0.0)};
  }
  if (type == "mse") {
    MseLoss l;
    for (const auto& t : j.at("targets"))
      l.targets.push_back({dof_from_json(net, t), detail::require<double>(t, "value")});
    return l;
  }
  if (type == "cross_entropy") {
    std::vector<DofRef> outs;
    for (const auto& o : j.at("outputs")) outs.push_back(dof_from_json(net, o));
    return CrossEntropyLoss::one_hot(std::move(outs), detail::require<std::size_t>(j, "label"),
                                     detail::get_or(j, "gamma", 1000.0));
  }
  throw ConfigError("unknown loss type '" + type + "'");
}

/// A single load case with its loss. Defaults reproduce the demonstration
/// setup: 10 g hung at the bottom-right node, L = (u_Ly + 0.025 m)^2.
struct Probe {
  std::vector<NodalForce> loads;
  LossSpec loss;
};

inline Probe probe_from_json(const Network& net, const json& j) {
  Probe p;
  if (j.contains("loads")) {
    p.loads = loads_from_json(net, j["loads"]);
  } else {
    p.loads = {{resolve_node(net, "bottom-right"), Axis::y, -grams_to_newtons(10.0)}};
  }
  if (j.contains("loss")) {
    p.loss = loss_from_json(net, j["loss"]);
  } else {
    p.loss = QuadraticLoss{{resolve_node(net, "bottom-left"), Axis::y}, 0.025};
  }
  return p;
}

// ---------------------------------------------------------------------------
// Task configs
// ---------------------------------------------------------------------------

struct TaskConfig {
  TaskKind kind = TaskKind::behavior;
  std::uint64_t seed = 0;
  TrainConfig train;
  // behavior / regression
  std::string input = "bottom-center";
  std::string left = "bottom-left";
  std::string right = "bottom-right";
  std::size_t label = 0;
  double force = 0.005 * kGravity;
  double gamma = 1000.0;
  // regression
  std::array<double, 4> slopes{0.0, 0.016, 0.004, 0.016};
  std::size_t n_samples = 100;
  double f_max = 0.012 * kGravity;
  double noise_sigma = 0.0;
  // classification
  std::array<std::string, 4> inputs{"row:5:0", "row:1:2", "bottom:4", "row:3:-1"};
  std::array<std::string, 3> outputs{"row:5:-1", "row:5:2", "row:1:4"};
  double force_gain = 0.001 * kGravity;
  bool round_to_grams = false;
  std::string iris_path = "data/iris.csv";
  // the document this was parsed from
  json raw;
};

inline TaskConfig task_config_from_json(const json& j) {
  TaskConfig c;
  c.raw = j;
  c.kind = parse_task_kind(detail::require<std::string>(j, "task_type"));
  c.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
  c.input = detail::get_or(j, "input", c.input);
  c.left = detail::get_or(j, "left", c.left);
  c.right = detail::get_or(j, "right", c.right);
  if (j.contains("label")) {
    if (j["label"].is_string()) {
      auto s = j["label"].get<std::string>();
      if (s == "L" || s == "left") c.label = 0;
      else if (s == "R" || s == "right") c.label = 1;
      else throw ConfigError("label must be L or R");
    } else {
      c.label = detail::require<std::size_t>(j, "label");
    }
  }
  if (j.contains("force_grams")) c.force = grams_to_newtons(detail::require<double>(j, "force_grams"));
  c.force = detail::get_or(j, "force", c.force);
  c.gamma = detail::get_or(j, "gamma", c.gamma);
  if (j.contains("slopes")) c.slopes = detail::require<std::array<double, 4>>(j, "slopes");
  c.n_samples = detail::get_or(j, "n_samples", c.n_samples);
  c.f_max = detail::get_or(j, "f_max", c.f_max);
  c.noise_sigma = detail::get_or(j, "noise_sigma", c.noise_sigma);
  if (j.contains("inputs")) c.inputs = detail::require<std::array<std::string, 4>>(j, "inputs");
  if (j.contains("outputs")) c.outputs = detail::require<std::array<std::string, 3>>(j, "outputs");
  c.force_gain = detail::get_or(j, "force_gain", c.force_gain);
  c.round_to_grams = detail::get_or(j, "round_to_grams", c.round_to_grams);
  c.iris_path = detail::get_or(j, "iris_path", c.iris_path);

  c.train.seed = c.seed;
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    c.train.epochs = detail::get_or(o, "epochs", c.train.epochs);
    if (o.contains("alpha")) c.train.alpha = detail::require<double>(o, "alpha");
    c.train.beta1 = detail::get_or(o, "beta1", c.train.beta1);
    c.train.beta2 = detail::get_or(o, "beta2", c.train.beta2);
    c.train.eps = detail::get_or(o, "eps", c.train.eps);
    c.train.split = detail::get_or(o, "split", c.train.split);
    if (o.contains("param_scale")) c.train.param_scale = detail::require<double>(o, "param_scale");
    c.train.snapshot_every = detail::get_or(o, "snapshot_every", c.train.snapshot_every);
  }
  return c;
}

inline BehaviorTask behavior_task(const Network& net, const TaskConfig& c) {
  return BehaviorTask{resolve_node(net, c.input), resolve_node(net, c.left),
                      resolve_node(net, c.right), c.force, c.label, c.gamma};
}

inline RegressionTask regression_task(const Network& net, const TaskConfig& c) {
  RegressionTask r;
  r.input = resolve_node(net, c.input);
  r.left = resolve_node(net, c.left);
  r.right = resolve_node(net, c.right);
  r.slopes = c.slopes;
  r.n_samples = c.n_samples;
  r.f_max = c.f_max;
  r.noise_sigma = c.noise_sigma;
  return r;
}

inline IrisTask iris_task(const Network& net, const TaskConfig& c) {
  IrisTask t;
  for (std::size_t i = 0; i < 4; ++i) t.inputs[i] = resolve_node(net, c.inputs[i]);
  for (std::size_t i = 0; i < 3; ++i) t.outputs[i] = resolve_node(net, c.outputs[i]);
  t.gain = c.force_gain;
  t.gamma = c.gamma;
  t.round_to_grams = c.round_to_grams;
  return t;
}

/// Builds the concrete training task described by a config.
inline Task make_task(const Network& net, const TaskConfig& c) {
  switch (c.kind) {
    case TaskKind::behavior:
      return make_behavior_task(behavior_task(net, c));
    case TaskKind::regression: {
      auto r = regression_task(net, c);
      return make_regression_task(r, gen_regression_dataset(r, c.seed));
    }
    case TaskKind::classification:
      return make_iris_task(iris_task(net, c), load_iris(c.iris_path));
  }
  throw ConfigError("unknown task");
}

}  // namespace mnn::io
