#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mgda/errors.hpp"
#include "mgda/maze.hpp"
#include "mgda/rng.hpp"

namespace mgda {

// Behaviour policy that produced a trajectory. Waypoint controllers realize
// the scripted legs; tabular controllers realize known stochastic policies
// for the occupancy oracles.
struct Controller {
  enum class Kind { waypoint, tabular };

  std::string id;
  Kind kind = Kind::waypoint;

  // Waypoint variant. Cells name the start region; waypoints are cell
  // coordinates (converted to centers for continuous mazes).
  std::vector<std::pair<int, int>> start_cells;
  std::vector<std::pair<int, int>> waypoints;
  double kp = 4.0;
  double kd = 1.0;
  double reach_radius = 0.4;  // waypoint advance radius, in cell_size units

  // Tabular variant: per-cell move distribution, row-major [cell][move].
  std::vector<std::vector<double>> move_probs;
};

inline Controller make_waypoint_controller(std::string id,
                                           std::vector<std::pair<int, int>> start_cells,
                                           std::vector<std::pair<int, int>> waypoints) {
  Controller c;
  c.id = std::move(id);
  c.kind = Controller::Kind::waypoint;
  c.start_cells = std::move(start_cells);
  c.waypoints = std::move(waypoints);
  return c;
}

struct Trajectory {
  std::vector<EnvState> states;  // length T+1
  std::vector<Action> actions;   // length T
  Goal desired_goal;
  std::string controller_id;

  int horizon() const { return int(actions.size()); }
};

// Start/end anchor regions of a leg, used to build stitching pairs.
struct LegInfo {
  std::string id;
  std::vector<std::pair<int, int>> start_cells;
  std::vector<std::pair<int, int>> end_cells;
};

struct OfflineDataset {
  MazeSpec maze;
  std::uint64_t seed = 0;
  std::vector<Trajectory> trajectories;
  std::vector<LegInfo> legs;

  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.actions.size();
    return n;
  }
};

struct RelabeledSample {
  EnvState state;
  Action action;
  Goal goal;
  int traj_index = 0;
  int t = 0;
  int i = 0;  // relabel index, i >= t
};

struct TransitionTuple {
  EnvState state;
  Action action;
  Goal goal_next;  // phi of the successor state
  int traj_index = 0;
  int t = 0;
};

namespace detail {

inline Move greedy_move_towards(const MazeSpec& spec, int ci, int cj,
                                const std::vector<int>& dist_field) {
  const auto dist_at = [&](int i, int j) {
    return spec.is_free(i, j) ? dist_field[std::size_t(j) * std::size_t(spec.cols()) + std::size_t(i)]
                              : -1;
  };
  const int here = dist_at(ci, cj);
  const Move order[4] = {Move::right, Move::left, Move::up, Move::down};
  const int di[4] = {1, -1, 0, 0};
  const int dj[4] = {0, 0, -1, 1};
  for (int k = 0; k < 4; ++k) {
    const int d = dist_at(ci + di[k], cj + dj[k]);
    if (d >= 0 && d < here) return order[k];
  }
  return Move::stay;
}

inline Action controller_action(const MazeSpec& spec, const Controller& c, const EnvState& s,
                                int& waypoint_idx, double noise_std, Rng& rng) {
  if (c.kind == Controller::Kind::tabular) {
    const auto& probs = c.move_probs[std::size_t(s.cj) * std::size_t(spec.cols()) + std::size_t(s.ci)];
    double u = rng.uniform01();
    for (int m = 0; m < kNumMoves; ++m) {
      u -= probs[std::size_t(m)];
      if (u < 0.0) return make_move(Move(m));
    }
    return make_move(Move::stay);
  }

  if (spec.kind == MazeKind::discrete) {
    if (noise_std > 0.0 && rng.bernoulli(std::min(1.0, noise_std))) {
      return make_move(Move(rng.index(kNumMoves)));
    }
    const auto [wi, wj] = c.waypoints[std::size_t(waypoint_idx)];
    if (s.ci == wi && s.cj == wj && waypoint_idx + 1 < int(c.waypoints.size())) ++waypoint_idx;
    const auto [ti, tj] = c.waypoints[std::size_t(waypoint_idx)];
    const auto field = bfs_distances(spec, ti, tj);
    return make_move(greedy_move_towards(spec, s.ci, s.cj, field));
  }

  const Goal wp = spec.cell_center(c.waypoints[std::size_t(waypoint_idx)].first,
                                   c.waypoints[std::size_t(waypoint_idx)].second);
  if (std::hypot(s.x - wp.x, s.y - wp.y) < c.reach_radius * spec.cell_size &&
      waypoint_idx + 1 < int(c.waypoints.size())) {
    ++waypoint_idx;
  }
  const Goal target = spec.cell_center(c.waypoints[std::size_t(waypoint_idx)].first,
                                       c.waypoints[std::size_t(waypoint_idx)].second);
  const double ax = c.kp * (target.x - s.x) - c.kd * s.vx + noise_std * rng.normal();
  const double ay = c.kp * (target.y - s.y) - c.kd * s.vy + noise_std * rng.normal();
  return make_force(ax, ay);
}

inline EnvState random_start(const MazeSpec& spec, const Controller& c, Rng& rng) {
  const auto [si, sj] = c.start_cells[rng.index(c.start_cells.size())];
  if (spec.kind == MazeKind::discrete) return make_cell_state(si, sj);
  // Position drawn from the central 60% of the start cell, zero velocity.
  const double x = (si + 0.2 + 0.6 * rng.uniform01()) * spec.cell_size;
  const double y = (sj + 0.2 + 0.6 * rng.uniform01()) * spec.cell_size;
  return make_cont_state(x, y);
}

}  // namespace detail

// Scripted collection: trajectory k follows controllers[k % n] for exactly T
// steps, with an independent RNG stream per trajectory (seed + index), so the
// result is identical no matter how collection is scheduled.
inline OfflineDataset collect(const MazeSpec& spec, const std::vector<Controller>& controllers,
                              int n_traj, int T, double noise_std, std::uint64_t seed) {
  if (controllers.empty()) throw ConfigError("collect: no controllers");
  if (n_traj < 1) throw ConfigError("collect: n_traj must be >= 1");
  if (T < 1) throw ConfigError("collect: T must be >= 1");
  for (const auto& c : controllers) {
    if (c.kind == Controller::Kind::waypoint) {
      if (c.start_cells.empty() || c.waypoints.empty()) {
        throw ConfigError("collect: controller '" + c.id + "' missing start cells or waypoints");
      }
      for (const auto& [i, j] : c.waypoints) {
        if (!spec.is_free(i, j)) {
          throw ConfigError("collect: controller '" + c.id + "' waypoint (" + std::to_string(i) +
                            "," + std::to_string(j) + ") is inside a wall");
        }
      }
      for (const auto& [i, j] : c.start_cells) {
        if (!spec.is_free(i, j)) {
          throw ConfigError("collect: controller '" + c.id + "' start cell inside a wall");
        }
      }
    } else if (c.move_probs.size() != std::size_t(spec.rows()) * std::size_t(spec.cols())) {
      throw ConfigError("collect: controller '" + c.id + "' tabular policy has wrong shape");
    }
  }

  OfflineDataset ds;
  ds.maze = spec;
  ds.seed = seed;
  ds.trajectories.reserve(std::size_t(n_traj));
  for (const auto& c : controllers) {
    LegInfo leg;
    leg.id = c.id;
    leg.start_cells = c.start_cells;
    if (!c.waypoints.empty()) leg.end_cells.push_back(c.waypoints.back());
    ds.legs.push_back(std::move(leg));
  }

  Rng base(seed);
  for (int k = 0; k < n_traj; ++k) {
    const Controller& c = controllers[std::size_t(k) % controllers.size()];
    Rng rng = base.derive(std::uint64_t(k) + 1);
    Trajectory traj;
    traj.controller_id = c.id;
    int wp_idx = 0;

    EnvState s = c.kind == Controller::Kind::tabular
                     ? [&] {
                         const auto cells = spec.free_cells();
                         const auto [i, j] = cells[rng.index(cells.size())];
                         return make_cell_state(i, j);
                       }()
                     : detail::random_start(spec, c, rng);
    traj.states.push_back(s);
    for (int t = 0; t < T; ++t) {
      const Action a = detail::controller_action(spec, c, s, wp_idx, noise_std, rng);
      s = step(spec, s, a);
      traj.actions.push_back(a);
      traj.states.push_back(s);
    }
    traj.desired_goal =
        c.kind == Controller::Kind::tabular || c.waypoints.empty()
            ? phi(spec, traj.states.back())
            : (spec.kind == MazeKind::discrete
                   ? Goal{double(c.waypoints.back().first), double(c.waypoints.back().second)}
                   : spec.cell_center(c.waypoints.back().first, c.waypoints.back().second));
    ds.trajectories.push_back(std::move(traj));
  }
  return ds;
}

// Hindsight relabeling: uniform (trajectory, t), relabel index i uniform on
// {t..T} or geometrically tilted towards t when gamma_geom is set
// (truncated-renormalized via rejection).
inline RelabeledSample sample_one_relabeled(const OfflineDataset& ds,
                                            std::optional<double> gamma_geom, Rng& rng) {
  const std::size_t k = rng.index(ds.trajectories.size());
  const Trajectory& traj = ds.trajectories[k];
  const int T = traj.horizon();
  const int t = int(rng.index(std::size_t(T)));
  int i;
  if (gamma_geom.has_value()) {
    const double g = *gamma_geom;
    if (!(g > 0.0 && g < 1.0)) throw ConfigError("sample_relabeled: gamma_geom must be in (0,1)");
    int k_geom = rng.geometric(g);
    for (int tries = 0; t + k_geom > T && tries < 10000; ++tries) k_geom = rng.geometric(g);
    i = std::min(t + k_geom, T);
  } else {
    i = t + int(rng.index(std::size_t(T - t + 1)));
  }
  RelabeledSample s;
  s.state = traj.states[std::size_t(t)];
  s.action = traj.actions[std::size_t(t)];
  s.goal = phi(ds.maze, traj.states[std::size_t(i)]);
  s.traj_index = int(k);
  s.t = t;
  s.i = i;
  return s;
}

inline std::vector<RelabeledSample> sample_relabeled(const OfflineDataset& ds, int batch,
                                                     std::optional<double> gamma_geom, Rng& rng) {
  if (batch < 1) throw ConfigError("sample_relabeled: batch must be >= 1");
  if (ds.trajectories.empty()) throw ValidationError("sample_relabeled: empty dataset");
  std::vector<RelabeledSample> out;
  out.reserve(std::size_t(batch));
  for (int b = 0; b < batch; ++b) out.push_back(sample_one_relabeled(ds, gamma_geom, rng));
  return out;
}

// One tuple per logged transition; the supervised signal for the one-step
// residual model.
inline std::vector<TransitionTuple> transition_tuples(const OfflineDataset& ds) {
  std::vector<TransitionTuple> out;
  out.reserve(ds.transition_count());
  for (std::size_t k = 0; k < ds.trajectories.size(); ++k) {
    const Trajectory& traj = ds.trajectories[k];
    for (int t = 0; t < traj.horizon(); ++t) {
      TransitionTuple tup;
      tup.state = traj.states[std::size_t(t)];
      tup.action = traj.actions[std::size_t(t)];
      tup.goal_next = phi(ds.maze, traj.states[std::size_t(t) + 1]);
      tup.traj_index = int(k);
      tup.t = t;
      out.push_back(tup);
    }
  }
  return out;
}

}  // namespace mgda
