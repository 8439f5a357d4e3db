#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgda/augment.hpp"
#include "mgda/dataset.hpp"
#include "mgda/errors.hpp"
#include "mgda/io.hpp"
#include "mgda/maze.hpp"

namespace mgda {

// Resolved run configuration. The JSON file mirrors this nesting; CLI
// overrides use dotted keys (e.g. dynamics.lr=0.001) with precedence
// CLI > file > defaults.
struct RunConfig {
  // maze
  std::string maze_name = "umaze";
  std::string maze_file;  // optional layout file ('#' wall, '.' free)
  std::string maze_kind = "continuous";
  double cell_size = 1.0;

  // data
  std::string legs = "auto";
  int n_traj = 500;
  int horizon = 80;
  double noise = 0.1;
  double controller_kp = 4.0;
  double controller_kd = 1.0;

  // dynamics
  double lambda = 1.0;
  double alpha_slack = 0.1;
  int dyn_epochs = 30;
  double dyn_lr = 1e-3;
  int dyn_batch = 256;
  std::vector<int> dyn_hidden = {64, 64};
  bool dyn_projection = true;
  bool dyn_slack = true;
  double k_env = 0.0;  // 0 = auto (1 + dt)

  // cluster
  int clusters = 0;  // 0 = auto per maze
  int kmeans_iters = 100;

  // augment
  std::string strategy = "none";
  double eps_prob = 0.5;
  double aug_delta = 0.5;
  std::string reach_check = "candidate_action";
  int retries = 8;

  // weights
  std::string weight_scheme = "discount";
  double weight_gamma = 0.99;

  // train
  int train_steps = 20000;
  int train_batch = 256;
  double train_lr = 3e-4;
  std::vector<int> policy_hidden = {64, 64};

  // eval
  int n_pairs = 100;
  int t_max = 0;  // 0 = auto per maze (100/200/400)
  int bootstrap = 1000;
  double delta = 0.5;

  // theorems
  double occupancy_gamma = 0.9;
  std::uint64_t theorem2_samples = 100000;

  // run
  std::uint64_t seed = 1;
  int jobs = 0;  // 0 = hardware concurrency
  std::string out = "out";

  MazeKind kind() const {
    if (maze_kind == "continuous") return MazeKind::continuous;
    if (maze_kind == "discrete") return MazeKind::discrete;
    throw ConfigError("maze.kind must be 'continuous' or 'discrete'");
  }
};

inline Json config_to_json(const RunConfig& c) {
  return Json{
      {"maze",
       {{"name", c.maze_name}, {"file", c.maze_file}, {"kind", c.maze_kind},
        {"cell_size", c.cell_size}}},
      {"data",
       {{"legs", c.legs}, {"n_traj", c.n_traj}, {"horizon", c.horizon}, {"noise", c.noise},
        {"kp", c.controller_kp}, {"kd", c.controller_kd}}},
      {"dynamics",
       {{"lambda", c.lambda}, {"alpha_slack", c.alpha_slack}, {"epochs", c.dyn_epochs},
        {"lr", c.dyn_lr}, {"batch", c.dyn_batch}, {"hidden", c.dyn_hidden},
        {"projection", c.dyn_projection}, {"slack", c.dyn_slack}, {"k_env", c.k_env}}},
      {"cluster", {{"C", c.clusters}, {"iters", c.kmeans_iters}}},
      {"augment",
       {{"strategy", c.strategy}, {"eps_prob", c.eps_prob}, {"delta", c.aug_delta},
        {"reach_check", c.reach_check}, {"retries", c.retries}}},
      {"weights", {{"scheme", c.weight_scheme}, {"gamma", c.weight_gamma}}},
      {"train",
       {{"steps", c.train_steps}, {"batch", c.train_batch}, {"lr", c.train_lr},
        {"hidden", c.policy_hidden}}},
      {"eval",
       {{"n_pairs", c.n_pairs}, {"t_max", c.t_max}, {"bootstrap", c.bootstrap},
        {"delta", c.delta}}},
      {"theorems", {{"gamma", c.occupancy_gamma}, {"n_samples", c.theorem2_samples}}},
      {"run", {{"seed", c.seed}, {"jobs", c.jobs}, {"out", c.out}}}};
}

namespace detail {

template <typename T>
void maybe_get(const Json& j, const char* section, const char* key, T& into) {
  if (!j.contains(section)) return;
  const auto& sec = j.at(section);
  if (!sec.contains(key)) return;
  try {
    into = sec.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config key ") + section + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline RunConfig config_from_json(const Json& j, RunConfig base = RunConfig{}) {
  using detail::maybe_get;
  maybe_get(j, "maze", "name", base.maze_name);
  maybe_get(j, "maze", "file", base.maze_file);
  maybe_get(j, "maze", "kind", base.maze_kind);
  maybe_get(j, "maze", "cell_size", base.cell_size);
  maybe_get(j, "data", "legs", base.legs);
  maybe_get(j, "data", "n_traj", base.n_traj);
  maybe_get(j, "data", "horizon", base.horizon);
  maybe_get(j, "data", "noise", base.noise);
  maybe_get(j, "data", "kp", base.controller_kp);
  maybe_get(j, "data", "kd", base.controller_kd);
  maybe_get(j, "dynamics", "lambda", base.lambda);
  maybe_get(j, "dynamics", "alpha_slack", base.alpha_slack);
  maybe_get(j, "dynamics", "epochs", base.dyn_epochs);
  maybe_get(j, "dynamics", "lr", base.dyn_lr);
  maybe_get(j, "dynamics", "batch", base.dyn_batch);
  maybe_get(j, "dynamics", "hidden", base.dyn_hidden);
  maybe_get(j, "dynamics", "projection", base.dyn_projection);
  maybe_get(j, "dynamics", "slack", base.dyn_slack);
  maybe_get(j, "dynamics", "k_env", base.k_env);
  maybe_get(j, "cluster", "C", base.clusters);
  maybe_get(j, "cluster", "iters", base.kmeans_iters);
  maybe_get(j, "augment", "strategy", base.strategy);
  maybe_get(j, "augment", "eps_prob", base.eps_prob);
  maybe_get(j, "augment", "delta", base.aug_delta);
  maybe_get(j, "augment", "reach_check", base.reach_check);
  maybe_get(j, "augment", "retries", base.retries);
  maybe_get(j, "weights", "scheme", base.weight_scheme);
  maybe_get(j, "weights", "gamma", base.weight_gamma);
  maybe_get(j, "train", "steps", base.train_steps);
  maybe_get(j, "train", "batch", base.train_batch);
  maybe_get(j, "train", "lr", base.train_lr);
  maybe_get(j, "train", "hidden", base.policy_hidden);
  maybe_get(j, "eval", "n_pairs", base.n_pairs);
  maybe_get(j, "eval", "t_max", base.t_max);
  maybe_get(j, "eval", "bootstrap", base.bootstrap);
  maybe_get(j, "eval", "delta", base.delta);
  maybe_get(j, "theorems", "gamma", base.occupancy_gamma);
  maybe_get(j, "theorems", "n_samples", base.theorem2_samples);
  maybe_get(j, "run", "seed", base.seed);
  maybe_get(j, "run", "jobs", base.jobs);
  maybe_get(j, "run", "out", base.out);
  return base;
}

// "section.key=value" with JSON value syntax (bare words fall back to
// strings).
inline Json apply_overrides(Json base, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw ConfigError("override key '" + key + "' must be dotted");
    Json value;
    try {
      value = Json::parse(raw);
    } catch (const Json::exception&) {
      value = raw;
    }
    base[key.substr(0, dot)][key.substr(dot + 1)] = value;
  }
  return base;
}

inline MazeSpec resolve_maze(const RunConfig& c) {
  if (!c.maze_file.empty()) {
    return parse_maze(c.maze_name, c.kind(), read_text_file(c.maze_file), c.cell_size);
  }
  return builtin_maze(c.maze_name, c.kind(), c.cell_size);
}

inline int resolve_clusters(const RunConfig& c) {
  if (c.clusters > 0) return c.clusters;
  if (c.maze_name == "umaze") return 20;
  if (c.maze_name == "medium") return 40;
  if (c.maze_name == "large") return 80;
  if (c.maze_name == "two_rooms") return 6;
  if (c.maze_name == "open5") return 4;
  if (c.maze_name == "two_strips") return 2;
  return 8;
}

inline int resolve_t_max(const RunConfig& c) {
  if (c.t_max > 0) return c.t_max;
  if (c.maze_name == "medium") return 200;
  if (c.maze_name == "large") return 400;
  return 100;
}

inline double resolve_k_env(const RunConfig& c, const MazeSpec& spec) {
  return c.k_env > 0.0 ? c.k_env : 1.0 + spec.dt;
}

inline Controller make_tabular_controller(std::string id, const MazeSpec& spec,
                                          const std::vector<double>& probs) {
  Controller c;
  c.id = std::move(id);
  c.kind = Controller::Kind::tabular;
  c.move_probs.assign(std::size_t(spec.rows()) * std::size_t(spec.cols()), probs);
  return c;
}

// The two stochastic behaviour policies behind the occupancy oracles: biased
// random walks with a fixed stay share (the stay mass keeps every cell
// one-step-reachable from itself, which the singleton-cluster control needs).
inline std::vector<Controller> theorem2_behaviors(const MazeSpec& spec) {
  // order: up, down, left, right, stay
  return {make_tabular_controller("walk_se", spec, {0.10, 0.25, 0.10, 0.35, 0.20}),
          make_tabular_controller("walk_nw", spec, {0.30, 0.10, 0.30, 0.10, 0.20})};
}

// Built-in leg presets. Legs chain head-to-tail so adjacent legs share an
// intersection region while no single controller covers two legs.
inline std::vector<Controller> builtin_controllers(const std::string& preset,
                                                   const MazeSpec& spec, double kp, double kd) {
  const std::string name = preset == "auto" ? spec.name : preset;
  std::vector<Controller> out;
  const auto add = [&](Controller c) {
    c.kp = kp;
    c.kd = kd;
    out.push_back(std::move(c));
  };
  if (name == "umaze" || name == "umaze2") {
    add(make_waypoint_controller("legA", {{1, 1}, {1, 2}}, {{1, 3}, {2, 3}}));
    add(make_waypoint_controller("legB", {{2, 3}, {3, 3}}, {{3, 2}, {3, 1}}));
    return out;
  }
  if (name == "umaze1") {  // single leg, for imitation-only baselines
    add(make_waypoint_controller("legA", {{1, 1}, {1, 2}}, {{1, 3}, {2, 3}}));
    return out;
  }
  if (name == "medium" || name == "medium3") {
    add(make_waypoint_controller("leg1", {{1, 1}, {2, 1}}, {{6, 1}, {6, 3}}));
    add(make_waypoint_controller("leg2", {{6, 3}, {5, 3}}, {{1, 3}, {1, 5}}));
    add(make_waypoint_controller("leg3", {{1, 5}, {2, 5}}, {{6, 5}}));
    return out;
  }
  if (name == "large" || name == "large4") {
    add(make_waypoint_controller("leg1", {{1, 1}, {2, 1}}, {{10, 1}, {10, 3}}));
    add(make_waypoint_controller("leg2", {{10, 3}, {9, 3}}, {{1, 3}, {1, 5}}));
    add(make_waypoint_controller("leg3", {{1, 5}, {2, 5}}, {{10, 5}, {10, 7}}));
    add(make_waypoint_controller("leg4", {{10, 7}, {9, 7}}, {{1, 7}}));
    return out;
  }
  if (name == "two_rooms" || name == "two_rooms4") {
    add(make_waypoint_controller("roomA_r1", {{1, 1}, {1, 2}, {2, 1}, {2, 2}}, {{24, 1}}));
    add(make_waypoint_controller("roomA_r2", {{1, 1}, {1, 2}, {2, 1}, {2, 2}}, {{24, 2}}));
    add(make_waypoint_controller("roomB_r1", {{1, 4}, {1, 5}, {2, 4}, {2, 5}}, {{24, 4}}));
    add(make_waypoint_controller("roomB_r2", {{1, 4}, {1, 5}, {2, 4}, {2, 5}}, {{24, 5}}));
    return out;
  }
  if (name == "open5" || name == "two_strips") {
    return theorem2_behaviors(spec);
  }
  throw ConfigError("no controller preset for '" + name + "'");
}

inline ReachCheck reach_check_from_name(const std::string& name) {
  if (name == "candidate_action") return ReachCheck::candidate_action;
  if (name == "literal_alg1") return ReachCheck::literal_alg1;
  throw ConfigError("augment.reach_check must be candidate_action or literal_alg1");
}

inline AugmentConfig make_augment_config(const RunConfig& c) {
  AugmentConfig cfg;
  cfg.strategy = strategy_from_name(c.strategy);
  cfg.eps_prob = c.eps_prob;
  cfg.delta = c.aug_delta;
  cfg.reach_check = reach_check_from_name(c.reach_check);
  cfg.retries = c.retries;
  cfg.validate();
  return cfg;
}

}  // namespace mgda
