#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgda/dataset.hpp"
#include "mgda/errors.hpp"
#include "mgda/maze.hpp"
#include "mgda/mlp.hpp"
#include "mgda/rng.hpp"

namespace mgda {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

// Input featurization for the one-step model. Continuous mazes use raw
// (x, y, vx, vy, fx, fy) standardized by dataset statistics; discrete mazes
// use one-hot cell + one-hot move. Displacement targets are scaled (not
// shifted) so a zero network predicts a zero displacement.
struct DynFeaturizer {
  MazeKind kind = MazeKind::continuous;
  int rows = 0, cols = 0;
  std::vector<double> in_mean, in_std;
  double out_std_x = 1.0, out_std_y = 1.0;

  int input_dim() const {
    return kind == MazeKind::continuous ? 6 : rows * cols + kNumMoves;
  }

  std::vector<double> features(const EnvState& s, const Action& a) const {
    if (kind == MazeKind::continuous) {
      std::vector<double> f = {s.x, s.y, s.vx, s.vy, a.fx, a.fy};
      for (std::size_t k = 0; k < f.size(); ++k) f[k] = (f[k] - in_mean[k]) / in_std[k];
      return f;
    }
    std::vector<double> f(std::size_t(input_dim()), 0.0);
    f[std::size_t(s.cj) * std::size_t(cols) + std::size_t(s.ci)] = 1.0;
    f[std::size_t(rows * cols) + std::size_t(int(a.move))] = 1.0;
    return f;
  }
};

inline DynFeaturizer fit_dyn_featurizer(const MazeSpec& maze,
                                        const std::vector<TransitionTuple>& tuples) {
  DynFeaturizer feat;
  feat.kind = maze.kind;
  feat.rows = maze.rows();
  feat.cols = maze.cols();
  if (maze.kind == MazeKind::continuous) {
    feat.in_mean.assign(6, 0.0);
    feat.in_std.assign(6, 0.0);
    for (const auto& tup : tuples) {
      const double raw[6] = {tup.state.x, tup.state.y, tup.state.vx,
                             tup.state.vy, tup.action.fx, tup.action.fy};
      for (int k = 0; k < 6; ++k) feat.in_mean[std::size_t(k)] += raw[k];
    }
    for (auto& m : feat.in_mean) m /= double(tuples.size());
    for (const auto& tup : tuples) {
      const double raw[6] = {tup.state.x, tup.state.y, tup.state.vx,
                             tup.state.vy, tup.action.fx, tup.action.fy};
      for (int k = 0; k < 6; ++k) {
        const double d = raw[k] - feat.in_mean[std::size_t(k)];
        feat.in_std[std::size_t(k)] += d * d;
      }
    }
    for (auto& s : feat.in_std) s = std::max(std::sqrt(s / double(tuples.size())), 1e-6);
  }
  double sx = 0.0, sy = 0.0;
  for (const auto& tup : tuples) {
    const Goal from = phi(maze, tup.state);
    const double dx = tup.goal_next.x - from.x;
    const double dy = tup.goal_next.y - from.y;
    sx += dx * dx;
    sy += dy * dy;
  }
  feat.out_std_x = std::max(std::sqrt(sx / double(tuples.size())), 1e-6);
  feat.out_std_y = std::max(std::sqrt(sy / double(tuples.size())), 1e-6);
  return feat;
}

// Per-tuple slack variables; sigma(lambda_n) is the weight of tuple n in the
// data term.
struct SlackWeights {
  std::vector<double> lambda_n;

  double sigma(std::size_t n) const { return 1.0 / (1.0 + std::exp(-lambda_n[n])); }
};

struct DynamicsTrainReport {
  std::vector<double> epoch_losses;
  double epsilon = 0.0;  // 95th percentile of training residuals, goal units
  std::vector<double> layer_norms;
};

struct DynamicsModel {
  Mlp net;
  double lambda = 1.0;
  bool projected = true;
  DynFeaturizer feat;
  DynamicsTrainReport report;
};

// Predicted one-step goal-space displacement; the predicted next goal is
// phi(s) + the returned vector.
inline Vec2 predict_displacement(const DynamicsModel& m, const EnvState& s, const Action& a) {
  const std::vector<double> out = forward(m.net, m.feat.features(s, a));
  return Vec2{out[0] * m.feat.out_std_x, out[1] * m.feat.out_std_y};
}

inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * double(values.size());
  std::size_t idx = std::size_t(std::ceil(rank));
  if (idx > 0) --idx;
  if (idx >= values.size()) idx = values.size() - 1;
  return values[idx];
}

struct FitDynamicsConfig {
  double lambda = 1.0;       // spectral projection radius
  double alpha_slack = 0.1;  // reward for keeping sigma(lambda_n) high
  int epochs = 30;
  double lr = 1e-3;
  double slack_lr = 1.0;
  int batch = 256;
  std::vector<int> hidden = {64, 64};
  bool use_projection = true;
  bool use_slack = true;
  int proj_iters = 20;
  std::uint64_t seed = 1;
};

struct FitDynamicsResult {
  DynamicsModel model;
  SlackWeights slack;
};

// Trains the residual model on (s, a, g_next) tuples:
//   min over net, lambda_n of  mean_n [ sigma(lambda_n)*||r_n||^2 - alpha*sigma(lambda_n) ]
// in scaled target units, with every weight matrix re-projected onto the
// spectral ball of radius lambda after each optimizer step.
inline FitDynamicsResult fit_dynamics(const MazeSpec& maze,
                                      const std::vector<TransitionTuple>& tuples,
                                      const FitDynamicsConfig& cfg) {
  if (tuples.size() < 2) throw ConfigError("fit_dynamics: need at least 2 tuples");
  if (!(cfg.lambda > 0.0)) throw ConfigError("fit_dynamics: lambda must be positive");
  if (cfg.use_slack && !(cfg.alpha_slack > 0.0)) {
    throw ConfigError("fit_dynamics: alpha_slack must be positive (sigma would collapse to 0)");
  }

  DynamicsModel model;
  model.lambda = cfg.lambda;
  model.projected = cfg.use_projection;
  model.feat = fit_dyn_featurizer(maze, tuples);

  Rng rng(cfg.seed);
  std::vector<int> dims;
  dims.push_back(model.feat.input_dim());
  for (int h : cfg.hidden) dims.push_back(h);
  dims.push_back(2);
  model.net = make_mlp(dims, Activation::relu, rng);

  // Pre-compute feature and scaled-target arrays.
  const std::size_t n = tuples.size();
  std::vector<std::vector<double>> xs(n);
  std::vector<Vec2> targets(n);
  for (std::size_t k = 0; k < n; ++k) {
    xs[k] = model.feat.features(tuples[k].state, tuples[k].action);
    const Goal from = phi(maze, tuples[k].state);
    targets[k] = Vec2{(tuples[k].goal_next.x - from.x) / model.feat.out_std_x,
                      (tuples[k].goal_next.y - from.y) / model.feat.out_std_y};
  }

  SlackWeights slack;
  slack.lambda_n.assign(n, 2.0);

  AdamState adam(model.net);
  std::vector<PowerIterState> proj_states;
  Rng proj_rng = rng.derive(17);
  Rng shuffle_rng = rng.derive(29);
  if (cfg.use_projection) project_weights_warm(model.net, cfg.lambda, 50, proj_states, proj_rng);

  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;

  double last_finite = 0.0;
  ForwardCache cache;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t ofs = 0; ofs < n; ofs += std::size_t(cfg.batch)) {
      const std::size_t end = std::min(n, ofs + std::size_t(cfg.batch));
      const double inv = 1.0 / double(end - ofs);
      GradientTape tape(model.net);
      for (std::size_t b = ofs; b < end; ++b) {
        const std::size_t k = order[b];
        const auto out = forward_cached(model.net, xs[k], cache);
        const double rx = out[0] - targets[k].x;
        const double ry = out[1] - targets[k].y;
        const double r2 = rx * rx + ry * ry;
        const double sig = cfg.use_slack ? slack.sigma(k) : 1.0;
        epoch_loss += sig * r2 - (cfg.use_slack ? cfg.alpha_slack * sig : 0.0);
        backward_accumulate(model.net, cache,
                            {2.0 * sig * rx * inv, 2.0 * sig * ry * inv}, tape);
        if (cfg.use_slack) {
          const double dsig = sig * (1.0 - sig);
          slack.lambda_n[k] -= cfg.slack_lr * dsig * (r2 - cfg.alpha_slack);
          slack.lambda_n[k] = std::clamp(slack.lambda_n[k], -12.0, 12.0);
        }
      }
      sgd_adam_step(model.net, tape, adam, cfg.lr);
      if (cfg.use_projection) {
        project_weights_warm(model.net, cfg.lambda, cfg.proj_iters, proj_states, proj_rng);
      }
    }
    epoch_loss /= double(n);
    if (!std::isfinite(epoch_loss)) {
      throw RuntimeFailure("fit_dynamics: loss diverged (last finite loss " +
                           std::to_string(last_finite) + ")");
    }
    last_finite = epoch_loss;
    model.report.epoch_losses.push_back(epoch_loss);
  }

  // A final tight projection so the certificate holds exactly at save time.
  if (cfg.use_projection) project_weights_warm(model.net, cfg.lambda, 100, proj_states, proj_rng);

  std::vector<double> residuals(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 pred = predict_displacement(model, tuples[k].state, tuples[k].action);
    const Goal from = phi(maze, tuples[k].state);
    residuals[k] = std::hypot(tuples[k].goal_next.x - from.x - pred.x,
                              tuples[k].goal_next.y - from.y - pred.y);
  }
  model.report.epsilon = percentile(residuals, 95.0);
  model.report.layer_norms = layer_spectral_norms(model.net);
  return FitDynamicsResult{std::move(model), std::move(slack)};
}

// Empirical local Lipschitz constant of the model in goal space: the largest
// finite-difference slope under position perturbations of the given radius,
// probed over >= 32 evenly spaced directions.
inline double estimate_local_lipschitz(const DynamicsModel& m,
                                       const std::vector<std::pair<EnvState, Action>>& probes,
                                       double radius, int n_dirs = 64) {
  if (!(radius > 0.0)) throw ConfigError("estimate_local_lipschitz: radius must be positive");
  n_dirs = std::max(n_dirs, 32);
  double worst = 0.0;
  for (const auto& [s, a] : probes) {
    const Vec2 base = predict_displacement(m, s, a);
    for (int d = 0; d < n_dirs; ++d) {
      const double ang = 2.0 * 3.14159265358979323846 * double(d) / double(n_dirs);
      EnvState p = s;
      p.x += radius * std::cos(ang);
      p.y += radius * std::sin(ang);
      const Vec2 out = predict_displacement(m, p, a);
      worst = std::max(worst, std::hypot(out.x - base.x, out.y - base.y) / radius);
    }
  }
  return worst;
}

// Product-of-norms bound translated to goal units (input scaling on the
// position features, output scaling on the displacement).
inline double lipschitz_product_bound(const DynamicsModel& m) {
  double prod = 1.0;
  for (double s : m.report.layer_norms) prod *= s;
  if (m.feat.kind == MazeKind::continuous) {
    prod *= std::max(m.feat.out_std_x, m.feat.out_std_y) /
            std::min(m.feat.in_std[0], m.feat.in_std[1]);
  } else {
    prod *= std::max(m.feat.out_std_x, m.feat.out_std_y);
  }
  return prod;
}

struct LipschitzCertificate {
  double epsilon = 0.0;              // 95th percentile training residual
  double k_env = 0.0;                // assumed true-dynamics local constant
  double delta = 0.0;                // measured local constant of the model
  double bound_violation_rate = 0.0; // held-out fraction violating the bound
  std::size_t n_checked = 0;
  std::vector<double> layer_norms;
};

// Checks the model-smoothness bound
//   ||f(s,a) - fhat(s,a)|| <= eps + (K + Delta) * ||phi(s) - g||
// on held-out tuples, with eps from training residuals and Delta measured
// around held-out probes.
inline LipschitzCertificate verify_theorem1(const MazeSpec& maze, const DynamicsModel& m,
                                            const std::vector<TransitionTuple>& held_out,
                                            double k_env, double probe_radius = 0.1,
                                            std::size_t max_probes = 256) {
  if (held_out.empty()) throw ValidationError("verify_theorem1: empty held-out set");
  LipschitzCertificate cert;
  cert.epsilon = m.report.epsilon;
  cert.k_env = k_env;
  cert.layer_norms = m.report.layer_norms;

  std::vector<std::pair<EnvState, Action>> probes;
  const std::size_t stride = std::max<std::size_t>(1, held_out.size() / max_probes);
  for (std::size_t k = 0; k < held_out.size(); k += stride) {
    probes.emplace_back(held_out[k].state, held_out[k].action);
  }
  cert.delta = estimate_local_lipschitz(m, probes, probe_radius);

  std::size_t violations = 0;
  for (const auto& tup : held_out) {
    const Goal from = phi(maze, tup.state);
    const Goal next = phi(maze, step(maze, tup.state, tup.action));
    const Vec2 truth{next.x - from.x, next.y - from.y};
    const Vec2 pred = predict_displacement(m, tup.state, tup.action);
    const double lhs = std::hypot(truth.x - pred.x, truth.y - pred.y);
    const double gap = std::hypot(from.x - tup.goal_next.x, from.y - tup.goal_next.y);
    if (lhs > cert.epsilon + (k_env + cert.delta) * gap) ++violations;
  }
  cert.n_checked = held_out.size();
  cert.bound_violation_rate = double(violations) / double(held_out.size());
  return cert;
}

inline nlohmann::json dynamics_to_json(const DynamicsModel& m) {
  nlohmann::json j;
  j["type"] = "mgda_dynamics";
  j["lambda"] = m.lambda;
  j["projected"] = m.projected;
  j["net"] = mlp_to_json(m.net);
  j["feat"] = {{"kind", m.feat.kind == MazeKind::discrete ? "discrete" : "continuous"},
               {"rows", m.feat.rows},
               {"cols", m.feat.cols},
               {"in_mean", m.feat.in_mean},
               {"in_std", m.feat.in_std},
               {"out_std_x", m.feat.out_std_x},
               {"out_std_y", m.feat.out_std_y}};
  j["report"] = {{"epoch_losses", m.report.epoch_losses},
                 {"epsilon", m.report.epsilon},
                 {"layer_norms", m.report.layer_norms}};
  return j;
}

inline DynamicsModel dynamics_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "mgda_dynamics") throw ParseError("dynamics: missing type header");
  DynamicsModel m;
  m.lambda = j.at("lambda").get<double>();
  m.projected = j.at("projected").get<bool>();
  m.net = mlp_from_json(j.at("net"));
  const auto& f = j.at("feat");
  m.feat.kind = f.at("kind").get<std::string>() == "discrete" ? MazeKind::discrete
                                                              : MazeKind::continuous;
  m.feat.rows = f.at("rows").get<int>();
  m.feat.cols = f.at("cols").get<int>();
  m.feat.in_mean = f.at("in_mean").get<std::vector<double>>();
  m.feat.in_std = f.at("in_std").get<std::vector<double>>();
  m.feat.out_std_x = f.at("out_std_x").get<double>();
  m.feat.out_std_y = f.at("out_std_y").get<double>();
  const auto& r = j.at("report");
  m.report.epoch_losses = r.at("epoch_losses").get<std::vector<double>>();
  m.report.epsilon = r.at("epsilon").get<double>();
  m.report.layer_norms = r.at("layer_norms").get<std::vector<double>>();
  return m;
}

inline nlohmann::json certificate_to_json(const LipschitzCertificate& c) {
  return nlohmann::json{{"type", "mgda_lipschitz_certificate"},
                        {"epsilon", c.epsilon},
                        {"k_env", c.k_env},
                        {"delta", c.delta},
                        {"bound_violation_rate", c.bound_violation_rate},
                        {"n_checked", c.n_checked},
                        {"layer_norms", c.layer_norms}};
}

}  // namespace mgda
