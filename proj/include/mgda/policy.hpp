#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgda/augment.hpp"
#include "mgda/dataset.hpp"
#include "mgda/errors.hpp"
#include "mgda/maze.hpp"
#include "mgda/mlp.hpp"
#include "mgda/rng.hpp"

namespace mgda {

// Relabeling weight w of the supervised objective. Two representative
// schemes: uniform (plain imitation of relabeled data) and discount
// (gamma^(i-t), favouring goals close in time).
struct WeightScheme {
  enum class Kind { uniform, discount };
  Kind kind = Kind::uniform;
  double gamma = 0.99;

  void validate() const {
    if (kind == Kind::discount && !(gamma > 0.0 && gamma < 1.0)) {
      throw ConfigError("weight scheme: gamma must be in (0,1)");
    }
  }
};

inline WeightScheme weight_scheme_from_name(const std::string& name, double gamma = 0.99) {
  WeightScheme ws;
  ws.gamma = gamma;
  if (name == "uniform") {
    ws.kind = WeightScheme::Kind::uniform;
  } else if (name == "discount") {
    ws.kind = WeightScheme::Kind::discount;
  } else {
    throw ConfigError("unknown weight scheme '" + name + "'");
  }
  ws.validate();
  return ws;
}

inline double weight(const WeightScheme& ws, int t, int i) {
  if (i < t) throw ValidationError("weight: relabel index i must satisfy i >= t");
  if (ws.kind == WeightScheme::Kind::uniform) return 1.0;
  return std::pow(ws.gamma, double(i - t));
}

struct PolicyFeaturizer {
  MazeKind kind = MazeKind::continuous;
  int rows = 0, cols = 0;
  std::vector<double> s_mean, s_std;  // (x, y, vx, vy)
  std::vector<double> g_mean, g_std;  // (gx, gy)

  int input_dim() const {
    return kind == MazeKind::continuous ? 6 : 2 * rows * cols;
  }

  std::vector<double> features(const EnvState& s, const Goal& g) const {
    if (kind == MazeKind::continuous) {
      return {(s.x - s_mean[0]) / s_std[0],  (s.y - s_mean[1]) / s_std[1],
              (s.vx - s_mean[2]) / s_std[2], (s.vy - s_mean[3]) / s_std[3],
              (g.x - g_mean[0]) / g_std[0],  (g.y - g_mean[1]) / g_std[1]};
    }
    std::vector<double> f(std::size_t(input_dim()), 0.0);
    f[std::size_t(s.cj) * std::size_t(cols) + std::size_t(s.ci)] = 1.0;
    f[std::size_t(rows * cols) + std::size_t(int(std::lround(g.y))) * std::size_t(cols) +
      std::size_t(int(std::lround(g.x)))] = 1.0;
    return f;
  }
};

inline PolicyFeaturizer fit_policy_featurizer(const OfflineDataset& ds) {
  PolicyFeaturizer feat;
  feat.kind = ds.maze.kind;
  feat.rows = ds.maze.rows();
  feat.cols = ds.maze.cols();
  if (ds.maze.kind == MazeKind::discrete) return feat;
  feat.s_mean.assign(4, 0.0);
  feat.s_std.assign(4, 0.0);
  feat.g_mean.assign(2, 0.0);
  feat.g_std.assign(2, 0.0);
  std::size_t n = 0;
  for (const auto& traj : ds.trajectories) {
    for (const auto& s : traj.states) {
      const double raw[4] = {s.x, s.y, s.vx, s.vy};
      for (int k = 0; k < 4; ++k) feat.s_mean[std::size_t(k)] += raw[k];
      feat.g_mean[0] += s.x;
      feat.g_mean[1] += s.y;
      ++n;
    }
  }
  for (auto& m : feat.s_mean) m /= double(n);
  for (auto& m : feat.g_mean) m /= double(n);
  for (const auto& traj : ds.trajectories) {
    for (const auto& s : traj.states) {
      const double raw[4] = {s.x, s.y, s.vx, s.vy};
      for (int k = 0; k < 4; ++k) {
        const double d = raw[k] - feat.s_mean[std::size_t(k)];
        feat.s_std[std::size_t(k)] += d * d;
      }
      const double gx = s.x - feat.g_mean[0], gy = s.y - feat.g_mean[1];
      feat.g_std[0] += gx * gx;
      feat.g_std[1] += gy * gy;
    }
  }
  for (auto& s : feat.s_std) s = std::max(std::sqrt(s / double(n)), 1e-6);
  for (auto& s : feat.g_std) s = std::max(std::sqrt(s / double(n)), 1e-6);
  return feat;
}

struct Policy {
  Mlp net;
  PolicyFeaturizer feat;
  std::string maze_name;
};

// Fixed variance of the Gaussian likelihood behind the continuous loss; it
// turns the weighted log-likelihood into a weighted regression.
constexpr double kPolicyVariance = 0.1;

struct GcwslLoss {
  double loss = 0.0;
  GradientTape tape;
};

// Weighted negative log-likelihood of the logged actions: squared error for
// the continuous head, cross-entropy for the discrete head. Returns the
// batch-mean loss and exact parameter gradients.
inline GcwslLoss gcwsl_loss(const Policy& p, const std::vector<AugmentedSample>& batch,
                            const WeightScheme& ws) {
  if (batch.empty()) throw ValidationError("gcwsl_loss: empty batch");
  GcwslLoss out{0.0, GradientTape(p.net)};
  ForwardCache cache;
  const double inv = 1.0 / double(batch.size());
  for (const auto& sample : batch) {
    const double w = weight(ws, sample.base.t, sample.base.i);
    const auto x = p.feat.features(sample.base.state, sample.goal);
    const auto pred = forward_cached(p.net, x, cache);
    if (p.feat.kind == MazeKind::continuous) {
      const double dx = pred[0] - sample.base.action.fx;
      const double dy = pred[1] - sample.base.action.fy;
      out.loss += w * 0.5 * (dx * dx + dy * dy) / kPolicyVariance * inv;
      backward_accumulate(p.net, cache,
                          {w * dx / kPolicyVariance * inv, w * dy / kPolicyVariance * inv},
                          out.tape);
    } else {
      const int target = int(sample.base.action.move);
      double mx = pred[0];
      for (double v : pred) mx = std::max(mx, v);
      double z = 0.0;
      for (double v : pred) z += std::exp(v - mx);
      std::vector<double> up(pred.size());
      for (std::size_t k = 0; k < pred.size(); ++k) {
        const double prob = std::exp(pred[k] - mx) / z;
        up[k] = w * (prob - (int(k) == target ? 1.0 : 0.0)) * inv;
      }
      out.loss += w * (mx + std::log(z) - pred[std::size_t(target)]) * inv;
      backward_accumulate(p.net, cache, up, out.tape);
    }
  }
  if (!std::isfinite(out.loss)) throw RuntimeFailure("gcwsl_loss: non-finite loss");
  return out;
}

// Deterministic evaluation head: clamped mean force, or argmax logits with
// lowest-index tie-break.
inline Action act(const Policy& p, const EnvState& s, const Goal& g) {
  const auto out = forward(p.net, p.feat.features(s, g));
  if (p.feat.kind == MazeKind::continuous) return make_force(out[0], out[1]);
  int best = 0;
  for (int k = 1; k < int(out.size()); ++k) {
    if (out[std::size_t(k)] > out[std::size_t(best)]) best = k;
  }
  return make_move(Move(best));
}

struct TrainPolicyConfig {
  int steps = 20000;
  int batch = 256;
  double lr = 3e-4;
  std::vector<int> hidden = {64, 64};
  std::optional<double> relabel_gamma;  // geometric relabel tilt; uniform when unset
  std::uint64_t seed = 1;
};

struct TrainedPolicy {
  Policy policy;
  std::vector<double> loss_curve;
};

// The full training iteration: sample relabeled batch, apply the goal
// augmentation strategy in place, take one optimizer step on the weighted
// supervised objective.
inline TrainedPolicy train_policy(const AugmentContext& ctx, const WeightScheme& ws,
                                  const TrainPolicyConfig& cfg) {
  ctx.require_ready();
  ctx.cfg.validate();
  ws.validate();
  if (cfg.steps < 0 || cfg.batch < 1) throw ConfigError("train: bad step/batch configuration");
  const OfflineDataset& ds = *ctx.ds;

  TrainedPolicy out;
  out.policy.feat = fit_policy_featurizer(ds);
  out.policy.maze_name = ds.maze.name;

  Rng root(cfg.seed);
  Rng init_rng = root.derive(1);
  Rng batch_rng = root.derive(2);
  Rng aug_rng = root.derive(3);

  std::vector<int> dims;
  dims.push_back(out.policy.feat.input_dim());
  for (int h : cfg.hidden) dims.push_back(h);
  dims.push_back(ds.maze.kind == MazeKind::continuous ? 2 : kNumMoves);
  out.policy.net = make_mlp(dims, Activation::tanh, init_rng);

  AdamState adam(out.policy.net);
  out.loss_curve.reserve(std::size_t(cfg.steps));
  for (int it = 0; it < cfg.steps; ++it) {
    std::vector<AugmentedSample> batch;
    batch.reserve(std::size_t(cfg.batch));
    for (int b = 0; b < cfg.batch; ++b) {
      const RelabeledSample s = sample_one_relabeled(ds, cfg.relabel_gamma, batch_rng);
      batch.push_back(apply_strategy(ctx, s, aug_rng));
    }
    GcwslLoss res = gcwsl_loss(out.policy, batch, ws);
    sgd_adam_step(out.policy.net, res.tape, adam, cfg.lr);
    out.loss_curve.push_back(res.loss);
  }
  return out;
}

inline nlohmann::json policy_to_json(const Policy& p) {
  nlohmann::json j;
  j["type"] = "mgda_policy";
  j["maze_name"] = p.maze_name;
  j["net"] = mlp_to_json(p.net);
  j["feat"] = {{"kind", p.feat.kind == MazeKind::discrete ? "discrete" : "continuous"},
               {"rows", p.feat.rows},
               {"cols", p.feat.cols},
               {"s_mean", p.feat.s_mean},
               {"s_std", p.feat.s_std},
               {"g_mean", p.feat.g_mean},
               {"g_std", p.feat.g_std}};
  return j;
}

inline Policy policy_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "mgda_policy") throw ParseError("policy: missing type header");
  Policy p;
  p.maze_name = j.at("maze_name").get<std::string>();
  p.net = mlp_from_json(j.at("net"));
  const auto& f = j.at("feat");
  p.feat.kind = f.at("kind").get<std::string>() == "discrete" ? MazeKind::discrete
                                                              : MazeKind::continuous;
  p.feat.rows = f.at("rows").get<int>();
  p.feat.cols = f.at("cols").get<int>();
  p.feat.s_mean = f.at("s_mean").get<std::vector<double>>();
  p.feat.s_std = f.at("s_std").get<std::vector<double>>();
  p.feat.g_mean = f.at("g_mean").get<std::vector<double>>();
  p.feat.g_std = f.at("g_std").get<std::vector<double>>();
  return p;
}

}  // namespace mgda
