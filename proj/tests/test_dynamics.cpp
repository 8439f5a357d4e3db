#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mgda/config.hpp"
#include "mgda/dynamics.hpp"
#include "mgda/io.hpp"
#include "oracles.hpp"

using namespace mgda;

namespace {

// Synthetic tuples from an exactly linear residual system:
// displacement = B [x y vx vy]^T + C [fx fy]^T.
std::vector<TransitionTuple> linear_system_tuples(const MazeSpec& maze, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TransitionTuple> tuples;
  const double B[2][4] = {{0.05, -0.02, 0.08, 0.0}, {0.01, 0.06, 0.0, -0.07}};
  const double C[2][2] = {{0.04, 0.01}, {-0.02, 0.05}};
  for (int k = 0; k < n; ++k) {
    TransitionTuple tup;
    tup.state = make_cont_state(1.0 + 3.0 * rng.uniform01(), 1.0 + 3.0 * rng.uniform01(),
                                2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0);
    tup.action = make_force(2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0);
    const double sv[4] = {tup.state.x, tup.state.y, tup.state.vx, tup.state.vy};
    const double av[2] = {tup.action.fx, tup.action.fy};
    double dx = 0.0, dy = 0.0;
    for (int c = 0; c < 4; ++c) {
      dx += B[0][c] * sv[c];
      dy += B[1][c] * sv[c];
    }
    for (int c = 0; c < 2; ++c) {
      dx += C[0][c] * av[c];
      dy += C[1][c] * av[c];
    }
    tup.goal_next = Goal{tup.state.x + dx, tup.state.y + dy};
    tuples.push_back(tup);
  }
  return tuples;
}

DynamicsModel identity_featurized_model(std::vector<int> dims) {
  DynamicsModel m;
  m.feat.kind = MazeKind::continuous;
  m.feat.in_mean.assign(6, 0.0);
  m.feat.in_std.assign(6, 1.0);
  m.feat.out_std_x = 1.0;
  m.feat.out_std_y = 1.0;
  Rng rng(1);
  m.net = make_mlp(dims, Activation::relu, rng);
  for (auto& w : m.net.weights)
    for (auto& v : w.data) v = 0.0;
  for (auto& b : m.net.biases)
    for (auto& v : b) v = 0.0;
  return m;
}

// Undamped high-gain controllers with saturating noise ram the corridor
// walls; a sizeable share of transitions are collision-clipped.
OfflineDataset wall_stress_dataset() {
  const MazeSpec maze = builtin_maze("umaze", MazeKind::continuous);
  auto controllers = builtin_controllers("umaze2", maze, 8.0, 0.0);
  return collect(maze, controllers, 100, 50, 1.2, 21);
}

}  // namespace

TEST_CASE("fit_dynamics guards its configuration") {
  const MazeSpec maze = builtin_maze("open5", MazeKind::continuous);
  const auto tuples = linear_system_tuples(maze, 64, 1);
  FitDynamicsConfig cfg;
  cfg.alpha_slack = 0.0;
  CHECK_THROWS_AS(fit_dynamics(maze, tuples, cfg), ConfigError);
  cfg.alpha_slack = 0.1;
  cfg.lambda = 0.0;
  CHECK_THROWS_AS(fit_dynamics(maze, tuples, cfg), ConfigError);
  cfg.lambda = 1.0;
  CHECK_THROWS_AS(fit_dynamics(maze, {tuples[0]}, cfg), ConfigError);
}

TEST_CASE("a globally linear system is fit to the least-squares level") {
  const MazeSpec maze = builtin_maze("open5", MazeKind::continuous);
  const auto train = linear_system_tuples(maze, 2000, 2);
  const auto held_out = linear_system_tuples(maze, 400, 3);

  FitDynamicsConfig cfg;
  cfg.hidden = {};  // single linear layer: the system is exactly representable
  cfg.lambda = 3.0;
  cfg.epochs = 120;
  cfg.lr = 5e-3;
  cfg.batch = 64;
  cfg.seed = 4;
  const FitDynamicsResult res = fit_dynamics(maze, train, cfg);

  double worst = 0.0;
  for (const auto& tup : held_out) {
    const Vec2 pred = predict_displacement(res.model, tup.state, tup.action);
    const Goal from = phi(maze, tup.state);
    worst = std::max(worst, std::hypot(tup.goal_next.x - from.x - pred.x,
                                       tup.goal_next.y - from.y - pred.y));
  }
  CHECK(worst < 1e-2);

  // independent least-squares oracle reaches the same residual level
  std::vector<std::vector<double>> rows;
  std::vector<double> bx, by;
  for (const auto& tup : train) {
    rows.push_back({tup.state.x, tup.state.y, tup.state.vx, tup.state.vy, tup.action.fx,
                    tup.action.fy, 1.0});
    const Goal from = phi(maze, tup.state);
    bx.push_back(tup.goal_next.x - from.x);
    by.push_back(tup.goal_next.y - from.y);
  }
  const auto wx = oracles::least_squares(rows, bx);
  const auto wy = oracles::least_squares(rows, by);
  double oracle_worst = 0.0;
  for (const auto& tup : held_out) {
    const std::vector<double> f = {tup.state.x, tup.state.y, tup.state.vx, tup.state.vy,
                                   tup.action.fx, tup.action.fy, 1.0};
    double px = 0.0, py = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      px += wx[k] * f[k];
      py += wy[k] * f[k];
    }
    const Goal from = phi(maze, tup.state);
    oracle_worst = std::max(oracle_worst, std::hypot(tup.goal_next.x - from.x - px,
                                                     tup.goal_next.y - from.y - py));
  }
  CHECK(oracle_worst < 1e-6);  // the oracle solves it exactly
}

TEST_CASE("training loss decreases and fits deterministically") {
  const OfflineDataset ds = wall_stress_dataset();
  const auto tuples = transition_tuples(ds);
  FitDynamicsConfig cfg;
  cfg.epochs = 8;
  cfg.seed = 5;
  const FitDynamicsResult a = fit_dynamics(ds.maze, tuples, cfg);
  CHECK(a.model.report.epoch_losses.back() < a.model.report.epoch_losses.front());

  const FitDynamicsResult b = fit_dynamics(ds.maze, tuples, cfg);
  for (std::size_t l = 0; l < a.model.net.weights.size(); ++l) {
    for (std::size_t k = 0; k < a.model.net.weights[l].data.size(); ++k) {
      REQUIRE(a.model.net.weights[l].data[k] == b.model.net.weights[l].data[k]);
    }
  }
  CHECK(a.slack.lambda_n == b.slack.lambda_n);
}

TEST_CASE("every layer satisfies the spectral bound after fitting") {
  const OfflineDataset ds = wall_stress_dataset();
  FitDynamicsConfig cfg;
  cfg.epochs = 6;
  cfg.lambda = 1.0;
  cfg.seed = 6;
  const FitDynamicsResult res = fit_dynamics(ds.maze, transition_tuples(ds), cfg);
  for (const auto& w : res.model.net.weights) {
    CHECK(oracles::svd_largest_singular_value(w) <= 1.0 + 1e-3);
  }
  // json round-trip preserves the model exactly
  const DynamicsModel back = dynamics_from_json(dynamics_to_json(res.model));
  const EnvState probe = make_cont_state(1.5, 1.5, 0.1, -0.2);
  const Vec2 p0 = predict_displacement(res.model, probe, make_force(0.3, 0.4));
  const Vec2 p1 = predict_displacement(back, probe, make_force(0.3, 0.4));
  CHECK(p0.x == p1.x);
  CHECK(p0.y == p1.y);
}

TEST_CASE("discrete transitions are memorized to 0.1 cells") {
  const MazeSpec maze = builtin_maze("open5", MazeKind::discrete);
  const OfflineDataset ds = collect(maze, theorem2_behaviors(maze), 120, 40, 0.0, 7);
  const auto tuples = transition_tuples(ds);
  FitDynamicsConfig cfg;
  cfg.hidden = {64};
  cfg.lambda = 4.0;  // one-hot inputs need a wider spectral ball than the point maze
  cfg.epochs = 60;
  cfg.lr = 5e-3;
  cfg.seed = 8;
  const FitDynamicsResult res = fit_dynamics(maze, tuples, cfg);
  double worst = 0.0;
  for (const auto& tup : tuples) {
    const Vec2 pred = predict_displacement(res.model, tup.state, tup.action);
    const Goal from = phi(maze, tup.state);
    worst = std::max(worst, std::hypot(tup.goal_next.x - from.x - pred.x,
                                       tup.goal_next.y - from.y - pred.y));
  }
  CHECK(worst < 0.1);

  // memorized model: held-out tuples from the same grid violate the bound
  // nowhere (the residual term alone covers them)
  const LipschitzCertificate cert = verify_theorem1(maze, res.model, tuples, 2.0);
  CHECK(cert.bound_violation_rate == 0.0);
}

TEST_CASE("zero model predicts zero displacement") {
  const DynamicsModel m = identity_featurized_model({6, 8, 2});
  const Vec2 d = predict_displacement(m, make_cont_state(2.2, 3.3, 0.5, -0.5), make_force(1, 1));
  CHECK(d.x == 0.0);
  CHECK(d.y == 0.0);
  const std::vector<std::pair<EnvState, Action>> probes = {
      {make_cont_state(2.0, 2.0), make_force(0, 0)}};
  CHECK(estimate_local_lipschitz(m, probes, 0.1) == 0.0);
}

TEST_CASE("local Lipschitz estimate recovers a known linear slope") {
  DynamicsModel m = identity_featurized_model({6, 2});
  // position block 0.7 * I2, velocity/action columns zero
  m.net.weights[0].at(0, 0) = 0.7;
  m.net.weights[0].at(1, 1) = 0.7;
  const std::vector<std::pair<EnvState, Action>> probes = {
      {make_cont_state(2.0, 2.0, 0.1, 0.1), make_force(0.2, -0.2)},
      {make_cont_state(1.5, 3.0), make_force(0, 0)}};
  const double delta = estimate_local_lipschitz(m, probes, 0.05);
  CHECK(delta == Catch::Approx(0.7).margin(0.05));
  CHECK_THROWS_AS(estimate_local_lipschitz(m, probes, 0.0), ConfigError);
}

TEST_CASE("measured local constant never exceeds the product-of-norms bound") {
  const OfflineDataset ds = wall_stress_dataset();
  FitDynamicsConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 9;
  const FitDynamicsResult res = fit_dynamics(ds.maze, transition_tuples(ds), cfg);
  std::vector<std::pair<EnvState, Action>> probes;
  for (std::size_t k = 0; k < 64; ++k) {
    const auto& tup = transition_tuples(ds)[k * 37];
    probes.emplace_back(tup.state, tup.action);
  }
  const double delta = estimate_local_lipschitz(res.model, probes, 0.1);
  CHECK(delta <= lipschitz_product_bound(res.model) * (1.0 + 1e-6));
}

TEST_CASE("prediction gap between same-cell states is certified") {
  const OfflineDataset ds = wall_stress_dataset();
  FitDynamicsConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 10;
  const FitDynamicsResult res = fit_dynamics(ds.maze, transition_tuples(ds), cfg);
  const double bound = lipschitz_product_bound(res.model);
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const EnvState a = make_cont_state(1.2 + 0.5 * rng.uniform01(), 1.2 + 0.5 * rng.uniform01(),
                                       0.3 * rng.normal(), 0.3 * rng.normal());
    EnvState b = a;
    b.x += 0.05 * (2.0 * rng.uniform01() - 1.0);
    b.y += 0.05 * (2.0 * rng.uniform01() - 1.0);
    const Action act = make_force(rng.normal(), rng.normal());
    const Vec2 pa = predict_displacement(res.model, a, act);
    const Vec2 pb = predict_displacement(res.model, b, act);
    const double gap = std::hypot(pa.x - pb.x, pa.y - pb.y);
    const double d = std::hypot(a.x - b.x, a.y - b.y);
    CHECK(gap <= bound * d * (1.0 + 1e-6) + 1e-12);
  }
}

TEST_CASE("theorem bound degenerates to the training-error bound at zero gap") {
  const MazeSpec maze = builtin_maze("open5", MazeKind::discrete);
  DynamicsModel m;
  m.feat.kind = MazeKind::discrete;
  m.feat.rows = maze.rows();
  m.feat.cols = maze.cols();
  m.feat.out_std_x = 1.0;
  m.feat.out_std_y = 1.0;
  Rng rng(12);
  m.net = make_mlp({m.feat.input_dim(), 2}, Activation::relu, rng);
  for (auto& w : m.net.weights)
    for (auto& v : w.data) v = 0.0;
  m.report.epsilon = 0.05;
  m.report.layer_norms = layer_spectral_norms(m.net);

  // both tuples have ||phi(s) - g|| = 0, so the bound is exactly epsilon
  TransitionTuple stay;
  stay.state = make_cell_state(2, 2);
  stay.action = make_move(Move::stay);
  stay.goal_next = Goal{2, 2};  // true displacement 0, prediction 0: no violation
  TransitionTuple mover;
  mover.state = make_cell_state(2, 2);
  mover.action = make_move(Move::right);
  mover.goal_next = Goal{2, 2};  // zero gap but true displacement 1: violation
  const LipschitzCertificate cert = verify_theorem1(maze, m, {stay, mover}, 2.0);
  CHECK(cert.bound_violation_rate == Catch::Approx(0.5));
  CHECK_THROWS_AS(verify_theorem1(maze, m, {}, 2.0), ValidationError);
}

TEST_CASE("slack down-weights wall-contact tuples (Welch test)") {
  const OfflineDataset ds = wall_stress_dataset();
  const auto tuples = transition_tuples(ds);
  FitDynamicsConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 13;
  const FitDynamicsResult res = fit_dynamics(ds.maze, tuples, cfg);

  std::vector<double> contact_sigma, free_sigma;
  for (std::size_t k = 0; k < tuples.size(); ++k) {
    const StepResult sr = step_ex(ds.maze, tuples[k].state, tuples[k].action);
    (sr.contact ? contact_sigma : free_sigma).push_back(res.slack.sigma(k));
  }
  REQUIRE(contact_sigma.size() > 50);
  REQUIRE(free_sigma.size() > 50);
  INFO("contact tuples: " << contact_sigma.size() << " / " << tuples.size());
  CHECK(oracles::welch_less_pvalue(contact_sigma, free_sigma) < 0.05);
}
