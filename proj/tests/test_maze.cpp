#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "mgda/maze.hpp"
#include "mgda/rng.hpp"

using namespace mgda;

namespace {

MazeSpec open5(MazeKind kind = MazeKind::discrete) { return builtin_maze("open5", kind); }

}  // namespace

TEST_CASE("discrete step moves and blocks") {
  const MazeSpec spec = open5();
  const EnvState s = make_cell_state(1, 1);
  const EnvState right = step(spec, s, make_move(Move::right));
  CHECK(right.ci == 2);
  CHECK(right.cj == 1);

  // wall on the left of (1,1): blocked move is the identity
  const EnvState blocked = step(spec, s, make_move(Move::left));
  CHECK(blocked.ci == 1);
  CHECK(blocked.cj == 1);

  const EnvState stay = step(spec, s, make_move(Move::stay));
  CHECK(stay.ci == 1);
  CHECK(stay.cj == 1);
}

TEST_CASE("continuous step is a hand-checked double integrator") {
  MazeSpec spec = open5(MazeKind::continuous);
  REQUIRE(spec.dt == 0.1);
  REQUIRE(spec.v_max == 1.0);
  const EnvState s = make_cont_state(0.5 + 1.0, 0.5 + 1.0);  // interior cell (1,1)
  const EnvState n = step(spec, s, make_force(1.0, 0.0));
  CHECK(n.vx == Catch::Approx(0.1));
  CHECK(n.vy == Catch::Approx(0.0));
  CHECK(n.x == Catch::Approx(1.5 + 0.01));
  CHECK(n.y == Catch::Approx(1.5));
}

TEST_CASE("continuous wall contact zeroes the blocked component") {
  MazeSpec spec = open5(MazeKind::continuous);
  // pushing left from just inside the west wall of the free region
  EnvState s = make_cont_state(1.05, 2.5, -1.0, 0.0);
  const StepResult r = step_ex(spec, s, make_force(-1.0, 0.0));
  CHECK(r.contact);
  CHECK(r.state.vx == 0.0);
  CHECK(r.state.x >= 1.0);
  CHECK(state_valid(spec, r.state));
}

TEST_CASE("step rejects invalid states") {
  const MazeSpec spec = open5();
  CHECK_THROWS_AS(step(spec, make_cell_state(0, 0), make_move(Move::up)), ValidationError);
}

TEST_CASE("phi projects continuous states and is identity on cells") {
  MazeSpec cont = open5(MazeKind::continuous);
  const Goal g = phi(cont, make_cont_state(1.0, 2.0, 0.3, -0.1));
  CHECK(g.x == 1.0);
  CHECK(g.y == 2.0);
  const MazeSpec disc = open5();
  const Goal gd = phi(disc, make_cell_state(3, 4));
  CHECK(gd.x == 3.0);
  CHECK(gd.y == 4.0);
}

TEST_CASE("reward is a strict sparse indicator") {
  const MazeSpec spec = open5();
  const EnvState s = make_cell_state(2, 2);
  CHECK(reward(spec, s, Goal{2.0, 2.0}, 0.5) == 1);
  CHECK(reward(spec, s, Goal{2.0, 2.0}, 1e-12) == 1);  // zero distance, any delta>0
  // distance exactly delta + 0.01 is outside
  CHECK(reward(spec, s, Goal{2.51, 2.0}, 0.5) == 0);
  CHECK_THROWS_AS(reward(spec, s, Goal{2.0, 2.0}, 0.0), ValidationError);
}

TEST_CASE("reward monotone in delta") {
  const MazeSpec spec = open5();
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    const EnvState s = make_cell_state(1 + int(rng.index(3)), 1 + int(rng.index(3)));
    const Goal g{1.0 + 2.0 * rng.uniform01(), 1.0 + 2.0 * rng.uniform01()};
    const double d1 = 0.05 + rng.uniform01();
    const double d2 = d1 + rng.uniform01();
    // shrinking delta never flips 0 -> 1
    CHECK(reward(spec, s, g, d1) <= reward(spec, s, g, d2));
  }
}

TEST_CASE("bfs_reachable on the open room") {
  const MazeSpec spec = open5();
  const auto self = bfs_reachable(spec, Goal{1, 1}, Goal{1, 1});
  CHECK(self.reachable);
  CHECK(self.length == 0);

  const auto hop2 = bfs_reachable(spec, Goal{1, 1}, Goal{3, 1});
  CHECK(hop2.reachable);
  CHECK(hop2.length == 2);

  CHECK_THROWS_AS(bfs_reachable(spec, Goal{0, 0}, Goal{1, 1}), ValidationError);
}

TEST_CASE("bfs_reachable across a full wall partition") {
  const MazeSpec spec = builtin_maze("two_rooms", MazeKind::discrete);
  const auto blocked = bfs_reachable(spec, Goal{1, 1}, Goal{1, 4});
  CHECK_FALSE(blocked.reachable);
  const auto same_room = bfs_reachable(spec, Goal{1, 1}, Goal{24, 2});
  CHECK(same_room.reachable);
  CHECK(same_room.length == 24);
}

TEST_CASE("continuous goals snap to their containing cell") {
  MazeSpec spec = builtin_maze("umaze", MazeKind::continuous);
  const auto r = bfs_reachable(spec, Goal{1.5, 1.5}, Goal{3.7, 1.2});
  CHECK(r.reachable);
  CHECK(r.length == 6);  // down the left arm, across, up the right arm
}

TEST_CASE("step is deterministic and wall safe over random rollouts") {
  MazeSpec spec = builtin_maze("umaze", MazeKind::continuous);
  Rng rng(99);
  EnvState s = make_cont_state(1.5, 1.5);
  for (int t = 0; t < 2000; ++t) {
    const Action a = make_force(2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0);
    const EnvState n1 = step(spec, s, a);
    const EnvState n2 = step(spec, s, a);
    CHECK(n1.x == n2.x);
    CHECK(n1.y == n2.y);
    CHECK(n1.vx == n2.vx);
    REQUIRE(state_valid(spec, n1));
    s = n1;
  }
}

TEST_CASE("continuous step is locally Lipschitz away from walls") {
  MazeSpec spec = open5(MazeKind::continuous);
  const double k_env = 1.0 + spec.dt;
  Rng rng(123);
  int checked = 0;
  for (int k = 0; k < 4000; ++k) {
    // base states in cell interiors, pair within 0.1 * cell_size
    const int ci = 1 + int(rng.index(3)), cj = 1 + int(rng.index(3));
    EnvState a = make_cont_state((ci + 0.3 + 0.4 * rng.uniform01()) * spec.cell_size,
                                 (cj + 0.3 + 0.4 * rng.uniform01()) * spec.cell_size,
                                 0.5 * (2.0 * rng.uniform01() - 1.0),
                                 0.5 * (2.0 * rng.uniform01() - 1.0));
    EnvState b = a;
    const double r = 0.1 * spec.cell_size * rng.uniform01();
    const double ang = 6.2831853 * rng.uniform01();
    b.x += r * std::cos(ang) * 0.5;
    b.y += r * std::sin(ang) * 0.5;
    b.vx += r * std::cos(ang) * 0.5;
    b.vy += r * std::sin(ang) * 0.5;
    const Action act = make_force(2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0);
    const StepResult ra = step_ex(spec, a, act);
    const StepResult rb = step_ex(spec, b, act);
    if (ra.contact || rb.contact) continue;  // Lipschitz claim is for the open space
    const double din = std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                                 (a.vx - b.vx) * (a.vx - b.vx) + (a.vy - b.vy) * (a.vy - b.vy));
    const double dout = std::sqrt(
        (ra.state.x - rb.state.x) * (ra.state.x - rb.state.x) +
        (ra.state.y - rb.state.y) * (ra.state.y - rb.state.y) +
        (ra.state.vx - rb.state.vx) * (ra.state.vx - rb.state.vx) +
        (ra.state.vy - rb.state.vy) * (ra.state.vy - rb.state.vy));
    REQUIRE(dout <= k_env * din + 1e-12);
    ++checked;
  }
  CHECK(checked > 3000);
}

TEST_CASE("maze parsing validates layout") {
  CHECK_THROWS_AS(parse_maze("bad", MazeKind::discrete, "###\n#x#\n###\n"), ParseError);
  CHECK_THROWS_AS(parse_maze("open_border", MazeKind::discrete, "##.\n#.#\n###\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_maze("isolated", MazeKind::discrete, "#####\n#.#.#\n#####\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_maze("allwall", MazeKind::discrete, "###\n###\n###\n"), ValidationError);
}

TEST_CASE("bundled layouts load and round-trip through text") {
  for (const char* name : {"umaze", "medium", "large", "two_rooms", "open5", "two_strips"}) {
    const MazeSpec spec = builtin_maze(name, MazeKind::discrete);
    CHECK(spec.free_cells().size() >= 7);
    const MazeSpec again = parse_maze(spec.name, spec.kind, spec.to_text(), spec.cell_size);
    CHECK(again.to_text() == spec.to_text());
  }
}
