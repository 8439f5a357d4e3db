#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mgda/errors.hpp"

namespace mgda {

enum class MazeKind { continuous, discrete };

enum class Move : int { up = 0, down = 1, left = 2, right = 3, stay = 4 };
constexpr int kNumMoves = 5;

inline const char* move_name(Move m) {
  switch (m) {
    case Move::up: return "up";
    case Move::down: return "down";
    case Move::left: return "left";
    case Move::right: return "right";
    default: return "stay";
  }
}

// A 2-D point in goal space. Discrete mazes use integer-valued cell
// coordinates; continuous mazes use positions in length units.
struct Goal {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Goal& a, const Goal& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct Action {
  // Continuous: force components, each clamped to [-1, 1].
  double fx = 0.0;
  double fy = 0.0;
  // Discrete: grid move.
  Move move = Move::stay;
};

inline Action make_force(double fx, double fy) {
  Action a;
  a.fx = std::clamp(fx, -1.0, 1.0);
  a.fy = std::clamp(fy, -1.0, 1.0);
  return a;
}

inline Action make_move(Move m) {
  Action a;
  a.move = m;
  return a;
}

struct EnvState {
  // Continuous: position and velocity in length units / units per step.
  double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0;
  // Discrete: cell coordinates (i = column, j = row).
  int ci = 0, cj = 0;
};

inline EnvState make_cont_state(double x, double y, double vx = 0.0, double vy = 0.0) {
  EnvState s;
  s.x = x;
  s.y = y;
  s.vx = vx;
  s.vy = vy;
  return s;
}

inline EnvState make_cell_state(int i, int j) {
  EnvState s;
  s.ci = i;
  s.cj = j;
  return s;
}

// Maze layout plus the physical constants of the continuous variant.
// Rows are indexed top-down; y grows with the row index.
class MazeSpec {
 public:
  std::string name;
  MazeKind kind = MazeKind::discrete;
  double cell_size = 1.0;
  double dt = 0.1;
  double v_max = 1.0;

  MazeSpec() = default;

  MazeSpec(std::string name_, MazeKind kind_, const std::vector<std::string>& rows,
           double cell_size_ = 1.0)
      : name(std::move(name_)), kind(kind_), cell_size(cell_size_) {
    if (rows.empty()) throw ParseError("maze '" + name + "': empty layout");
    rows_ = int(rows.size());
    cols_ = int(rows[0].size());
    wall_.assign(std::size_t(rows_) * std::size_t(cols_), true);
    for (int j = 0; j < rows_; ++j) {
      if (int(rows[j].size()) != cols_) {
        throw ParseError("maze '" + name + "': ragged row " + std::to_string(j));
      }
      for (int i = 0; i < cols_; ++i) {
        const char c = rows[j][std::size_t(i)];
        if (c == '#') {
          wall_[idx(i, j)] = true;
        } else if (c == '.') {
          wall_[idx(i, j)] = false;
        } else {
          throw ParseError("maze '" + name + "': bad character '" + std::string(1, c) +
                           "' at row " + std::to_string(j));
        }
      }
    }
    validate();
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  bool in_bounds(int i, int j) const { return i >= 0 && i < cols_ && j >= 0 && j < rows_; }
  bool is_wall(int i, int j) const { return !in_bounds(i, j) || wall_[idx(i, j)]; }
  bool is_free(int i, int j) const { return in_bounds(i, j) && !wall_[idx(i, j)]; }

  std::vector<std::pair<int, int>> free_cells() const {
    std::vector<std::pair<int, int>> cells;
    for (int j = 0; j < rows_; ++j)
      for (int i = 0; i < cols_; ++i)
        if (is_free(i, j)) cells.emplace_back(i, j);
    return cells;
  }

  int cell_of_coord(double v) const { return int(std::floor(v / cell_size)); }

  std::pair<int, int> cell_of(double x, double y) const {
    return {cell_of_coord(x), cell_of_coord(y)};
  }

  Goal cell_center(int i, int j) const {
    return Goal{(i + 0.5) * cell_size, (j + 0.5) * cell_size};
  }

  std::string to_text() const {
    std::string out;
    for (int j = 0; j < rows_; ++j) {
      for (int i = 0; i < cols_; ++i) out += wall_[idx(i, j)] ? '#' : '.';
      out += '\n';
    }
    return out;
  }

 private:
  std::size_t idx(int i, int j) const { return std::size_t(j) * std::size_t(cols_) + std::size_t(i); }

  void validate() const {
    int free_count = 0;
    for (int j = 0; j < rows_; ++j)
      for (int i = 0; i < cols_; ++i)
        if (is_free(i, j)) ++free_count;
    if (free_count < 1) throw ValidationError("maze '" + name + "': no free cells");
    for (int i = 0; i < cols_; ++i) {
      if (is_free(i, 0) || is_free(i, rows_ - 1))
        throw ValidationError("maze '" + name + "': boundary must be all walls");
    }
    for (int j = 0; j < rows_; ++j) {
      if (is_free(0, j) || is_free(cols_ - 1, j))
        throw ValidationError("maze '" + name + "': boundary must be all walls");
    }
    // No isolated free cells: each must have a free 4-neighbour.
    for (int j = 0; j < rows_; ++j) {
      for (int i = 0; i < cols_; ++i) {
        if (!is_free(i, j)) continue;
        if (!is_free(i + 1, j) && !is_free(i - 1, j) && !is_free(i, j + 1) && !is_free(i, j - 1)) {
          throw ValidationError("maze '" + name + "': isolated free cell (" + std::to_string(i) +
                                "," + std::to_string(j) + ")");
        }
      }
    }
    if (kind == MazeKind::continuous && v_max * dt > cell_size) {
      throw ValidationError("maze '" + name + "': v_max*dt must not exceed cell_size");
    }
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<bool> wall_;
};

inline MazeSpec parse_maze(const std::string& name, MazeKind kind, const std::string& text,
                           double cell_size = 1.0) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  return MazeSpec(name, kind, rows, cell_size);
}

inline bool state_valid(const MazeSpec& spec, const EnvState& s) {
  if (spec.kind == MazeKind::discrete) {
    return spec.is_free(s.ci, s.cj);
  }
  const auto [i, j] = spec.cell_of(s.x, s.y);
  if (!spec.is_free(i, j)) return false;
  return std::abs(s.vx) <= spec.v_max + 1e-12 && std::abs(s.vy) <= spec.v_max + 1e-12;
}

inline Goal phi(const MazeSpec& spec, const EnvState& s) {
  if (spec.kind == MazeKind::discrete) return Goal{double(s.ci), double(s.cj)};
  return Goal{s.x, s.y};
}

struct StepResult {
  EnvState state;
  bool contact = false;  // wall collision clipped the motion this step
};

// Ground-truth transition. Discrete: move blocked by walls keeps the cell.
// Continuous: double integrator with axis-separated wall clipping; the
// blocked velocity component is zeroed on contact.
inline StepResult step_ex(const MazeSpec& spec, const EnvState& s, const Action& a) {
  if (!state_valid(spec, s)) {
    throw ValidationError("step: state invalid for maze '" + spec.name + "'");
  }
  StepResult out;
  if (spec.kind == MazeKind::discrete) {
    int ni = s.ci, nj = s.cj;
    switch (a.move) {
      case Move::up: nj -= 1; break;
      case Move::down: nj += 1; break;
      case Move::left: ni -= 1; break;
      case Move::right: ni += 1; break;
      case Move::stay: break;
    }
    if (spec.is_free(ni, nj)) {
      out.state = make_cell_state(ni, nj);
    } else {
      out.state = s;
      out.contact = a.move != Move::stay;
    }
    return out;
  }

  const double margin = 1e-7 * spec.cell_size;
  EnvState n = s;
  n.vx = std::clamp(s.vx + std::clamp(a.fx, -1.0, 1.0) * spec.dt, -spec.v_max, spec.v_max);
  n.vy = std::clamp(s.vy + std::clamp(a.fy, -1.0, 1.0) * spec.dt, -spec.v_max, spec.v_max);

  // X axis first, then Y with the settled x. v_max*dt <= cell_size, so at
  // most one boundary can be crossed per axis.
  double nx = s.x + n.vx * spec.dt;
  {
    const int cj = spec.cell_of_coord(s.y);
    const int ci = spec.cell_of_coord(nx);
    if (!spec.is_free(ci, cj)) {
      const int cur = spec.cell_of_coord(s.x);
      nx = n.vx > 0 ? (cur + 1) * spec.cell_size - margin : cur * spec.cell_size + margin;
      n.vx = 0.0;
      out.contact = true;
    }
  }
  double ny = s.y + n.vy * spec.dt;
  {
    const int ci = spec.cell_of_coord(nx);
    const int cj = spec.cell_of_coord(ny);
    if (!spec.is_free(ci, cj)) {
      const int cur = spec.cell_of_coord(s.y);
      ny = n.vy > 0 ? (cur + 1) * spec.cell_size - margin : cur * spec.cell_size + margin;
      n.vy = 0.0;
      out.contact = true;
    }
  }
  n.x = nx;
  n.y = ny;
  out.state = n;
  return out;
}

inline EnvState step(const MazeSpec& spec, const EnvState& s, const Action& a) {
  return step_ex(spec, s, a).state;
}

// Sparse indicator: 1 iff the state's goal projection is strictly within
// delta of g.
inline int reward(const MazeSpec& spec, const EnvState& s, const Goal& g, double delta) {
  if (!(delta > 0.0)) throw ValidationError("reward: delta must be positive");
  return distance(phi(spec, s), g) < delta ? 1 : 0;
}

struct ReachResult {
  bool reachable = false;
  int length = -1;  // hop count when reachable
};

inline std::pair<int, int> goal_cell(const MazeSpec& spec, const Goal& g) {
  if (spec.kind == MazeKind::discrete) {
    return {int(std::lround(g.x)), int(std::lround(g.y))};
  }
  return spec.cell_of(g.x, g.y);
}

// Breadth-first search over free cells (4-neighbourhood). Continuous goals
// are snapped to their containing cell.
inline ReachResult bfs_reachable(const MazeSpec& spec, const Goal& from, const Goal& to) {
  const auto [si, sj] = goal_cell(spec, from);
  const auto [ti, tj] = goal_cell(spec, to);
  if (!spec.is_free(si, sj) || !spec.is_free(ti, tj)) {
    throw ValidationError("bfs_reachable: endpoint inside a wall");
  }
  ReachResult res;
  if (si == ti && sj == tj) {
    res.reachable = true;
    res.length = 0;
    return res;
  }
  std::vector<int> dist(std::size_t(spec.rows()) * std::size_t(spec.cols()), -1);
  const auto at = [&](int i, int j) -> int& {
    return dist[std::size_t(j) * std::size_t(spec.cols()) + std::size_t(i)];
  };
  std::deque<std::pair<int, int>> queue;
  at(si, sj) = 0;
  queue.emplace_back(si, sj);
  const int di[4] = {1, -1, 0, 0};
  const int dj[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    for (int d = 0; d < 4; ++d) {
      const int ni = i + di[d], nj = j + dj[d];
      if (!spec.is_free(ni, nj) || at(ni, nj) >= 0) continue;
      at(ni, nj) = at(i, j) + 1;
      if (ni == ti && nj == tj) {
        res.reachable = true;
        res.length = at(ni, nj);
        return res;
      }
      queue.emplace_back(ni, nj);
    }
  }
  return res;
}

// All-pairs BFS distances from one source cell; -1 where unreachable.
inline std::vector<int> bfs_distances(const MazeSpec& spec, int si, int sj) {
  std::vector<int> dist(std::size_t(spec.rows()) * std::size_t(spec.cols()), -1);
  const auto at = [&](int i, int j) -> int& {
    return dist[std::size_t(j) * std::size_t(spec.cols()) + std::size_t(i)];
  };
  if (!spec.is_free(si, sj)) throw ValidationError("bfs_distances: source inside a wall");
  std::deque<std::pair<int, int>> queue;
  at(si, sj) = 0;
  queue.emplace_back(si, sj);
  const int di[4] = {1, -1, 0, 0};
  const int dj[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    for (int d = 0; d < 4; ++d) {
      const int ni = i + di[d], nj = j + dj[d];
      if (!spec.is_free(ni, nj) || at(ni, nj) >= 0) continue;
      at(ni, nj) = at(i, j) + 1;
      queue.emplace_back(ni, nj);
    }
  }
  return dist;
}

// Bundled layouts. umaze/medium/large carry the U/S-corridor topologies the
// stitching datasets are built on; the rest exist for oracle-exact checks.
inline std::string builtin_layout(const std::string& name) {
  if (name == "umaze") {
    return "#####\n"
           "#.#.#\n"
           "#.#.#\n"
           "#...#\n"
           "#####\n";
  }
  if (name == "medium") {
    return "########\n"
           "#......#\n"
           "######.#\n"
           "#......#\n"
           "#.######\n"
           "#......#\n"
           "######.#\n"
           "########\n";
  }
  if (name == "large") {
    return "############\n"
           "#..........#\n"
           "##########.#\n"
           "#..........#\n"
           "#.##########\n"
           "#..........#\n"
           "##########.#\n"
           "#..........#\n"
           "############\n";
  }
  if (name == "two_rooms") {
    // Two disconnected 24x2 rooms; the audit maze for the principle matrix.
    std::string wall(26, '#');
    std::string open = "#" + std::string(24, '.') + "#";
    return wall + "\n" + open + "\n" + open + "\n" + wall + "\n" + open + "\n" + open + "\n" +
           wall + "\n";
  }
  if (name == "open5") {
    return "#####\n"
           "#...#\n"
           "#...#\n"
           "#...#\n"
           "#####\n";
  }
  if (name == "two_strips") {
    // Two disconnected 7x1 corridors; used for the unreachable-goal ablation.
    return "#########\n"
           "#.......#\n"
           "#########\n"
           "#.......#\n"
           "#########\n";
  }
  throw ConfigError("unknown builtin maze '" + name + "'");
}

inline MazeSpec builtin_maze(const std::string& name, MazeKind kind, double cell_size = 1.0) {
  return parse_maze(name, kind, builtin_layout(name), cell_size);
}

}  // namespace mgda
