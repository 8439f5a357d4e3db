#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgda/dataset.hpp"
#include "mgda/errors.hpp"
#include "mgda/maze.hpp"

namespace mgda {

using Json = nlohmann::json;

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& contents) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path + "'");
  out << contents;
}

// FNV-1a, used for manifest input/config fingerprints.
inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(const std::string& data) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(data)));
  return std::string(buf);
}

namespace detail {

inline Json maze_to_json(const MazeSpec& spec) {
  return Json{{"name", spec.name},
              {"kind", spec.kind == MazeKind::discrete ? "discrete" : "continuous"},
              {"cell_size", spec.cell_size},
              {"dt", spec.dt},
              {"v_max", spec.v_max},
              {"layout", spec.to_text()}};
}

inline MazeSpec maze_from_json(const Json& j) {
  const MazeKind kind = j.at("kind").get<std::string>() == "discrete" ? MazeKind::discrete
                                                                      : MazeKind::continuous;
  MazeSpec spec = parse_maze(j.at("name").get<std::string>(), kind,
                             j.at("layout").get<std::string>(), j.at("cell_size").get<double>());
  spec.dt = j.at("dt").get<double>();
  spec.v_max = j.at("v_max").get<double>();
  return spec;
}

inline Json state_to_json(const MazeSpec& spec, const EnvState& s) {
  if (spec.kind == MazeKind::discrete) return Json::array({s.ci, s.cj});
  return Json::array({s.x, s.y, s.vx, s.vy});
}

inline EnvState state_from_json(const MazeSpec& spec, const Json& j) {
  if (spec.kind == MazeKind::discrete) return make_cell_state(j.at(0).get<int>(), j.at(1).get<int>());
  return make_cont_state(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
                         j.at(3).get<double>());
}

inline Json action_to_json(const MazeSpec& spec, const Action& a) {
  if (spec.kind == MazeKind::discrete) return Json(move_name(a.move));
  return Json::array({a.fx, a.fy});
}

inline Action action_from_json(const MazeSpec& spec, const Json& j) {
  if (spec.kind == MazeKind::discrete) {
    const std::string m = j.get<std::string>();
    for (int k = 0; k < kNumMoves; ++k) {
      if (m == move_name(Move(k))) return make_move(Move(k));
    }
    throw ParseError("unknown move '" + m + "'");
  }
  return make_force(j.at(0).get<double>(), j.at(1).get<double>());
}

inline Json cells_to_json(const std::vector<std::pair<int, int>>& cells) {
  Json arr = Json::array();
  for (const auto& [i, j] : cells) arr.push_back(Json::array({i, j}));
  return arr;
}

inline std::vector<std::pair<int, int>> cells_from_json(const Json& arr) {
  std::vector<std::pair<int, int>> cells;
  for (const auto& c : arr) cells.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
  return cells;
}

}  // namespace detail

// Dataset file format: line-delimited JSON. First line is the header record
// (maze, seed, counts, legs); each further line is one trajectory.
inline std::string serialize_dataset(const OfflineDataset& ds) {
  std::ostringstream out;
  Json header{{"type", "mgda_dataset"},
              {"version", 1},
              {"maze", detail::maze_to_json(ds.maze)},
              {"seed", ds.seed},
              {"n_trajectories", ds.trajectories.size()}};
  Json legs = Json::array();
  for (const auto& leg : ds.legs) {
    legs.push_back(Json{{"id", leg.id},
                        {"start_cells", detail::cells_to_json(leg.start_cells)},
                        {"end_cells", detail::cells_to_json(leg.end_cells)}});
  }
  header["legs"] = legs;
  out << header.dump() << '\n';
  for (const auto& traj : ds.trajectories) {
    Json rec{{"controller", traj.controller_id},
             {"goal", Json::array({traj.desired_goal.x, traj.desired_goal.y})}};
    Json states = Json::array();
    for (const auto& s : traj.states) states.push_back(detail::state_to_json(ds.maze, s));
    Json actions = Json::array();
    for (const auto& a : traj.actions) actions.push_back(detail::action_to_json(ds.maze, a));
    rec["states"] = states;
    rec["actions"] = actions;
    out << rec.dump() << '\n';
  }
  return out.str();
}

inline OfflineDataset deserialize_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset: empty file");
  Json header;
  try {
    header = Json::parse(line);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("dataset header: ") + e.what());
  }
  if (header.value("type", "") != "mgda_dataset") {
    throw ParseError("dataset: missing 'mgda_dataset' header record");
  }
  OfflineDataset ds;
  ds.maze = detail::maze_from_json(header.at("maze"));
  ds.seed = header.at("seed").get<std::uint64_t>();
  for (const auto& leg : header.at("legs")) {
    LegInfo info;
    info.id = leg.at("id").get<std::string>();
    info.start_cells = detail::cells_from_json(leg.at("start_cells"));
    info.end_cells = detail::cells_from_json(leg.at("end_cells"));
    ds.legs.push_back(std::move(info));
  }
  const std::size_t expected = header.at("n_trajectories").get<std::size_t>();
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++record;
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ParseError("dataset record " + std::to_string(record) + ": " + e.what());
    }
    Trajectory traj;
    traj.controller_id = rec.at("controller").get<std::string>();
    traj.desired_goal = Goal{rec.at("goal").at(0).get<double>(), rec.at("goal").at(1).get<double>()};
    for (const auto& s : rec.at("states")) traj.states.push_back(detail::state_from_json(ds.maze, s));
    for (const auto& a : rec.at("actions")) traj.actions.push_back(detail::action_from_json(ds.maze, a));
    if (traj.states.size() != traj.actions.size() + 1) {
      throw ParseError("dataset record " + std::to_string(record) + ": state/action length mismatch");
    }
    ds.trajectories.push_back(std::move(traj));
  }
  if (ds.trajectories.size() != expected) {
    throw ParseError("dataset: header promises " + std::to_string(expected) + " trajectories, found " +
                     std::to_string(ds.trajectories.size()));
  }
  for (std::size_t k = 0; k < ds.trajectories.size(); ++k) {
    for (const auto& s : ds.trajectories[k].states) {
      if (!state_valid(ds.maze, s)) {
        throw ValidationError("dataset: trajectory " + std::to_string(k) +
                              " contains a state inside a wall");
      }
    }
  }
  return ds;
}

inline void save_dataset(const OfflineDataset& ds, const std::string& path) {
  write_text_file(path, serialize_dataset(ds));
}

inline OfflineDataset load_dataset(const std::string& path) {
  return deserialize_dataset(read_text_file(path));
}

inline bool operator==(const Goal& a, const Goal& b) { return a.x == b.x && a.y == b.y; }

inline bool states_equal(const MazeSpec& spec, const EnvState& a, const EnvState& b) {
  if (spec.kind == MazeKind::discrete) return a.ci == b.ci && a.cj == b.cj;
  return a.x == b.x && a.y == b.y && a.vx == b.vx && a.vy == b.vy;
}

inline bool datasets_equal(const OfflineDataset& a, const OfflineDataset& b) {
  if (a.seed != b.seed || a.maze.name != b.maze.name || a.maze.to_text() != b.maze.to_text() ||
      a.trajectories.size() != b.trajectories.size()) {
    return false;
  }
  for (std::size_t k = 0; k < a.trajectories.size(); ++k) {
    const auto& ta = a.trajectories[k];
    const auto& tb = b.trajectories[k];
    if (ta.controller_id != tb.controller_id || !(ta.desired_goal == tb.desired_goal) ||
        ta.states.size() != tb.states.size() || ta.actions.size() != tb.actions.size()) {
      return false;
    }
    for (std::size_t t = 0; t < ta.states.size(); ++t) {
      if (!states_equal(a.maze, ta.states[t], tb.states[t])) return false;
    }
    for (std::size_t t = 0; t < ta.actions.size(); ++t) {
      const auto& xa = ta.actions[t];
      const auto& xb = tb.actions[t];
      if (a.maze.kind == MazeKind::discrete ? xa.move != xb.move
                                            : (xa.fx != xb.fx || xa.fy != xb.fy)) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace mgda
