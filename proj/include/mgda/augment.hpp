#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgda/dataset.hpp"
#include "mgda/dynamics.hpp"
#include "mgda/errors.hpp"
#include "mgda/kmeans.hpp"
#include "mgda/maze.hpp"
#include "mgda/rng.hpp"

namespace mgda {

enum class Strategy { none, sgda, tgda, mgda };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::none: return "none";
    case Strategy::sgda: return "sgda";
    case Strategy::tgda: return "tgda";
    default: return "mgda";
  }
}

inline Strategy strategy_from_name(const std::string& name) {
  if (name == "none") return Strategy::none;
  if (name == "sgda") return Strategy::sgda;
  if (name == "tgda") return Strategy::tgda;
  if (name == "mgda") return Strategy::mgda;
  throw ConfigError("unknown strategy '" + name + "'");
}

// Which (state, action) the one-step acceptance test queries the model at.
// candidate_action uses the candidate's own logged action; literal_alg1 uses
// the sampled transition's (s_t, a_t).
enum class ReachCheck { candidate_action, literal_alg1 };

struct AugmentConfig {
  Strategy strategy = Strategy::none;
  double eps_prob = 0.5;  // probability of augmenting a goal
  double delta = 0.5;     // one-step acceptance threshold
  ReachCheck reach_check = ReachCheck::candidate_action;
  int retries = 8;  // candidate draws before falling back to the original goal

  void validate() const {
    if (eps_prob < 0.0 || eps_prob > 1.0) throw ConfigError("augment: eps_prob must be in [0,1]");
    if (!(delta > 0.0)) throw ConfigError("augment: delta must be positive");
    if (retries < 1) throw ConfigError("augment: retries must be >= 1");
  }
};

enum class Provenance { original, sgda, tgda, mgda };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::original: return "original";
    case Provenance::sgda: return "sgda";
    case Provenance::tgda: return "tgda";
    default: return "mgda";
  }
}

struct AugmentedSample {
  RelabeledSample base;
  Goal goal;  // equals base.goal when provenance == original
  Provenance provenance = Provenance::original;
  int source_traj = -1;  // trajectory the replacement goal came from
  int source_t = -1;     // member / nearby-state time index
};

inline AugmentedSample keep_original(const RelabeledSample& sample) {
  AugmentedSample out;
  out.base = sample;
  out.goal = sample.goal;
  out.provenance = Provenance::original;
  return out;
}

// Swapped goal data augmentation: a goal drawn uniformly from a uniformly
// random different trajectory.
inline AugmentedSample sgda(const RelabeledSample& sample, const OfflineDataset& ds,
                            double eps_prob, Rng& rng) {
  if (ds.trajectories.size() < 2) return keep_original(sample);
  if (eps_prob <= 0.0 || !rng.bernoulli(eps_prob)) return keep_original(sample);
  std::size_t other = rng.index(ds.trajectories.size() - 1);
  if (other >= std::size_t(sample.traj_index)) ++other;
  const Trajectory& traj = ds.trajectories[other];
  const std::size_t t = rng.index(traj.states.size());
  AugmentedSample out;
  out.base = sample;
  out.goal = phi(ds.maze, traj.states[t]);
  out.provenance = Provenance::sgda;
  out.source_traj = int(other);
  out.source_t = int(t);
  return out;
}

// Temporal goal data augmentation: a random member of the goal's cluster,
// then a goal from strictly later in that member's trajectory (the terminal
// goal itself when the member is terminal).
inline AugmentedSample tgda(const RelabeledSample& sample, const OfflineDataset& ds,
                            const ClusterIndex& ci, double eps_prob, Rng& rng) {
  if (eps_prob <= 0.0 || !rng.bernoulli(eps_prob)) return keep_original(sample);
  const int k = assign(ci, sample.goal);
  const auto& members = ci.members[std::size_t(k)];
  if (members.empty()) return keep_original(sample);
  const auto [mtraj, mt] = members[rng.index(members.size())];
  const Trajectory& traj = ds.trajectories[std::size_t(mtraj)];
  const int T = traj.horizon();
  const int gi = mt >= T ? T : mt + 1 + int(rng.index(std::size_t(T - mt)));
  AugmentedSample out;
  out.base = sample;
  out.goal = phi(ds.maze, traj.states[std::size_t(gi)]);
  out.provenance = Provenance::tgda;
  out.source_traj = mtraj;
  out.source_t = mt;
  return out;
}

// One-step acceptance rule shared by the sampler and the distribution check:
// the candidate's predicted next goal must land within delta of the goal.
inline bool mgda_accepts(const DynamicsModel& model, const AugmentConfig& cfg,
                         const MazeSpec& maze, const RelabeledSample& sample, const Goal& goal,
                         const EnvState& cand_state, const Action& cand_action) {
  const Vec2 d = cfg.reach_check == ReachCheck::candidate_action
                     ? predict_displacement(model, cand_state, cand_action)
                     : predict_displacement(model, sample.state, sample.action);
  const Goal from = phi(maze, cand_state);
  return std::hypot(goal.x - from.x - d.x, goal.y - from.y - d.y) < cfg.delta;
}

// Model-based goal data augmentation: candidates from the goal's cluster are
// accepted as nearby states only if they one-step-reach the goal under the
// learned model; the augmented goal comes from later in the accepted
// candidate's trajectory. Falls back to the original goal after cfg.retries
// failed candidates.
inline AugmentedSample mgda(const RelabeledSample& sample, const OfflineDataset& ds,
                            const ClusterIndex& ci, const DynamicsModel& model,
                            const AugmentConfig& cfg, Rng& rng) {
  if (cfg.eps_prob <= 0.0 || !rng.bernoulli(cfg.eps_prob)) return keep_original(sample);
  const int k = assign(ci, sample.goal);
  const auto& members = ci.members[std::size_t(k)];
  if (members.empty()) return keep_original(sample);
  for (int attempt = 0; attempt < cfg.retries; ++attempt) {
    const auto [utraj, ut] = members[rng.index(members.size())];
    const Trajectory& traj = ds.trajectories[std::size_t(utraj)];
    const int T = traj.horizon();
    if (ut >= T) continue;  // terminal member: no logged action, nothing later
    const EnvState& u = traj.states[std::size_t(ut)];
    const Action& au = traj.actions[std::size_t(ut)];
    if (!mgda_accepts(model, cfg, ds.maze, sample, sample.goal, u, au)) continue;
    const int gi = ut + 1 + int(rng.index(std::size_t(T - ut)));
    AugmentedSample out;
    out.base = sample;
    out.goal = phi(ds.maze, traj.states[std::size_t(gi)]);
    out.provenance = Provenance::mgda;
    out.source_traj = utraj;
    out.source_t = ut;
    return out;
  }
  return keep_original(sample);
}

// Everything a strategy may need; tgda requires the index, mgda also the
// model.
struct AugmentContext {
  const OfflineDataset* ds = nullptr;
  const ClusterIndex* ci = nullptr;
  const DynamicsModel* model = nullptr;
  AugmentConfig cfg;

  void require_ready() const {
    if (ds == nullptr) throw ConfigError("augment: dataset missing");
    if ((cfg.strategy == Strategy::tgda || cfg.strategy == Strategy::mgda) && ci == nullptr) {
      throw ConfigError("augment: strategy needs a fitted cluster index; run cluster first");
    }
    if (cfg.strategy == Strategy::mgda && model == nullptr) {
      throw ConfigError("augment: mgda needs a trained dynamics model; run fit-dynamics first");
    }
  }
};

inline AugmentedSample apply_strategy(const AugmentContext& ctx, const RelabeledSample& sample,
                                      Rng& rng) {
  switch (ctx.cfg.strategy) {
    case Strategy::none: return keep_original(sample);
    case Strategy::sgda: return sgda(sample, *ctx.ds, ctx.cfg.eps_prob, rng);
    case Strategy::tgda: return tgda(sample, *ctx.ds, *ctx.ci, ctx.cfg.eps_prob, rng);
    default: return mgda(sample, *ctx.ds, *ctx.ci, *ctx.model, ctx.cfg, rng);
  }
}

struct PrincipleReport {
  std::string strategy;
  std::size_t n_draws = 0;
  std::size_t n_augmented = 0;
  bool defined = false;  // false when no sample was augmented
  double diversity = 0.0;
  double optimality = 0.0;       // among reachable augmented goals
  double optimality_all = 0.0;   // unreachable goals counted as non-optimal
  double reachability = 0.0;
  double yield = 0.0;

  bool diversity_ok() const { return defined && diversity > 0.0; }
  bool optimality_ok() const { return defined && optimality >= 0.9; }
  bool reachability_ok() const { return defined && reachability >= 0.95; }
};

// Scores a strategy against the three augmentation principles with exact
// grid oracles (BFS reachability, shortest-path membership for the logged
// action). Optimality is computed among reachable augmented goals so the two
// principles stay independent; the coupled variant is reported alongside.
inline PrincipleReport audit_principles(const AugmentContext& ctx, std::size_t n_draws, Rng& rng) {
  ctx.require_ready();
  const OfflineDataset& ds = *ctx.ds;
  if (ds.maze.kind != MazeKind::discrete) {
    throw ValidationError("audit_principles: only discrete mazes are supported");
  }
  PrincipleReport rep;
  rep.strategy = strategy_name(ctx.cfg.strategy);
  rep.n_draws = n_draws;

  std::map<std::pair<int, int>, std::vector<int>> dist_cache;
  const auto dist_field = [&](int i, int j) -> const std::vector<int>& {
    const auto key = std::make_pair(i, j);
    auto it = dist_cache.find(key);
    if (it == dist_cache.end()) it = dist_cache.emplace(key, bfs_distances(ds.maze, i, j)).first;
    return it->second;
  };
  const auto dist_at = [&](const std::vector<int>& f, int i, int j) {
    return f[std::size_t(j) * std::size_t(ds.maze.cols()) + std::size_t(i)];
  };

  std::size_t reachable = 0, optimal = 0;
  std::map<std::pair<int, int>, std::set<std::pair<std::pair<int, int>, int>>> per_state;
  for (std::size_t d = 0; d < n_draws; ++d) {
    const RelabeledSample sample = sample_one_relabeled(ds, std::nullopt, rng);
    const AugmentedSample aug = apply_strategy(ctx, sample, rng);
    if (aug.provenance == Provenance::original) continue;
    rep.n_augmented += 1;

    const int si = sample.state.ci, sj = sample.state.cj;
    const int gi = int(std::lround(aug.goal.x)), gj = int(std::lround(aug.goal.y));
    per_state[{si, sj}].insert({{gi, gj}, aug.source_traj});

    const auto& field = dist_field(si, sj);
    const int dg = dist_at(field, gi, gj);
    if (dg < 0) continue;  // unreachable
    reachable += 1;
    if (dg == 0) {
      optimal += 1;
      continue;
    }
    const EnvState next = step(ds.maze, sample.state, sample.action);
    const auto& gfield = dist_field(gi, gj);
    if (dist_at(gfield, next.ci, next.cj) == dg - 1) optimal += 1;
  }

  if (rep.n_augmented == 0) return rep;
  rep.defined = true;
  rep.yield = double(rep.n_augmented) / double(n_draws);
  rep.reachability = double(reachable) / double(rep.n_augmented);
  rep.optimality = reachable > 0 ? double(optimal) / double(reachable) : 0.0;
  rep.optimality_all = double(optimal) / double(rep.n_augmented);

  std::size_t diverse = 0;
  for (const auto& [cell, goals] : per_state) {
    std::set<std::pair<int, int>> distinct_goals;
    std::set<int> distinct_sources;
    for (const auto& [gcell, src] : goals) {
      distinct_goals.insert(gcell);
      distinct_sources.insert(src);
    }
    if (distinct_goals.size() >= 2 && distinct_sources.size() >= 2) ++diverse;
  }
  rep.diversity = double(diverse) / double(per_state.size());
  return rep;
}

inline nlohmann::json principle_report_to_json(const PrincipleReport& r) {
  return nlohmann::json{{"type", "mgda_principle_report"},
                        {"strategy", r.strategy},
                        {"n_draws", r.n_draws},
                        {"n_augmented", r.n_augmented},
                        {"defined", r.defined},
                        {"diversity", r.diversity},
                        {"optimality", r.optimality},
                        {"optimality_all", r.optimality_all},
                        {"reachability", r.reachability},
                        {"yield", r.yield}};
}

}  // namespace mgda
