#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgda/augment.hpp"
#include "mgda/dataset.hpp"
#include "mgda/errors.hpp"
#include "mgda/maze.hpp"
#include "mgda/parallel.hpp"
#include "mgda/policy.hpp"
#include "mgda/rng.hpp"

namespace mgda {

struct EvalPair {
  EnvState start;
  Goal goal;
  enum class Kind { in_distribution, stitching } kind = Kind::in_distribution;
};

struct EvalReport {
  double success_rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_episodes = 0;
  std::vector<int> outcomes;  // per pair, 0/1
};

// Percentile bootstrap over per-pair outcomes: 1000 seeded resamples,
// [2.5%, 97.5%] of the resampled means.
inline void bootstrap_ci(EvalReport& rep, int resamples, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = rep.outcomes.size();
  std::vector<double> means(std::size_t(resamples), 0.0);
  for (int r = 0; r < resamples; ++r) {
    int hits = 0;
    for (std::size_t k = 0; k < n; ++k) hits += rep.outcomes[rng.index(n)];
    means[std::size_t(r)] = double(hits) / double(n);
  }
  std::sort(means.begin(), means.end());
  const auto rank = [&](double p) {
    std::size_t idx = std::size_t(std::ceil(p * double(resamples)));
    if (idx > 0) --idx;
    return std::min(idx, means.size() - 1);
  };
  rep.ci_low = means[rank(0.025)];
  rep.ci_high = means[rank(0.975)];
}

// Rolls out the frozen policy on each pair; success iff the sparse reward
// fires at any step within the horizon.
inline EvalReport rollout_success(const Policy& p, const MazeSpec& spec,
                                  const std::vector<EvalPair>& pairs, int t_max, double delta,
                                  int bootstrap_resamples = 1000, std::uint64_t seed = 7,
                                  int jobs = 1) {
  EvalReport rep;
  rep.n_episodes = pairs.size();
  rep.outcomes.assign(pairs.size(), 0);
  parallel_for(pairs.size(), jobs, [&](std::size_t k) {
    EnvState s = pairs[k].start;
    int hit = reward(spec, s, pairs[k].goal, delta);
    for (int t = 0; t < t_max && hit == 0; ++t) {
      s = step(spec, s, act(p, s, pairs[k].goal));
      hit = reward(spec, s, pairs[k].goal, delta);
    }
    rep.outcomes[k] = hit;
  });
  int hits = 0;
  for (int o : rep.outcomes) hits += o;
  rep.success_rate = pairs.empty() ? 0.0 : double(hits) / double(pairs.size());
  if (!pairs.empty() && bootstrap_resamples > 0) bootstrap_ci(rep, bootstrap_resamples, seed);
  return rep;
}

namespace detail {

inline EnvState pair_start_state(const MazeSpec& spec, int i, int j, Rng& rng) {
  if (spec.kind == MazeKind::discrete) return make_cell_state(i, j);
  const double x = (i + 0.2 + 0.6 * rng.uniform01()) * spec.cell_size;
  const double y = (j + 0.2 + 0.6 * rng.uniform01()) * spec.cell_size;
  return make_cont_state(x, y);
}

inline Goal pair_goal_point(const MazeSpec& spec, int i, int j, Rng& rng) {
  if (spec.kind == MazeKind::discrete) return Goal{double(i), double(j)};
  return Goal{(i + 0.2 + 0.6 * rng.uniform01()) * spec.cell_size,
              (j + 0.2 + 0.6 * rng.uniform01()) * spec.cell_size};
}

}  // namespace detail

// Start in one leg's start region, goal in an adjacent leg's end region, with
// two certifications per pair: BFS reachability and the stitching gap (no
// single trajectory passes within delta of both endpoints).
inline std::vector<EvalPair> make_stitching_pairs(const MazeSpec& spec, const OfflineDataset& ds,
                                                  int n_pairs, double delta, std::uint64_t seed) {
  if (ds.legs.size() < 2) {
    throw ConfigError("make_stitching_pairs: dataset has a single leg; stitching pairs need >= 2");
  }
  // Ordered adjacency: A's end region meets B's start region.
  std::vector<std::pair<std::size_t, std::size_t>> adjacent;
  for (std::size_t a = 0; a < ds.legs.size(); ++a) {
    for (std::size_t b = 0; b < ds.legs.size(); ++b) {
      if (a == b || ds.legs[a].id == ds.legs[b].id) continue;
      bool meets = false;
      for (const auto& e : ds.legs[a].end_cells) {
        for (const auto& s : ds.legs[b].start_cells) {
          if (e == s) meets = true;
        }
      }
      if (meets) adjacent.emplace_back(a, b);
    }
  }
  if (adjacent.empty()) {
    throw ConfigError("make_stitching_pairs: no adjacent leg pairs share an intersection cell");
  }

  Rng rng(seed);
  std::vector<EvalPair> pairs;
  const int budget = n_pairs * 500;
  for (int attempt = 0; attempt < budget && int(pairs.size()) < n_pairs; ++attempt) {
    const auto [a, b] = adjacent[rng.index(adjacent.size())];
    const auto& sc = ds.legs[a].start_cells[rng.index(ds.legs[a].start_cells.size())];
    const auto& gc = ds.legs[b].end_cells[rng.index(ds.legs[b].end_cells.size())];
    EvalPair pair;
    pair.kind = EvalPair::Kind::stitching;
    pair.start = detail::pair_start_state(spec, sc.first, sc.second, rng);
    pair.goal = detail::pair_goal_point(spec, gc.first, gc.second, rng);
    if (!bfs_reachable(spec, phi(spec, pair.start), pair.goal).reachable) continue;

    const Goal start_goal = phi(spec, pair.start);
    bool gap_ok = true;
    for (const auto& traj : ds.trajectories) {
      bool near_start = false, near_goal = false;
      for (const auto& s : traj.states) {
        const Goal g = phi(spec, s);
        if (distance(g, start_goal) < delta) near_start = true;
        if (distance(g, pair.goal) < delta) near_goal = true;
        if (near_start && near_goal) break;
      }
      if (near_start && near_goal) {
        gap_ok = false;
        break;
      }
    }
    if (gap_ok) pairs.push_back(pair);
  }
  if (int(pairs.size()) < n_pairs) {
    std::string legs;
    for (const auto& leg : ds.legs) legs += (legs.empty() ? "" : ", ") + leg.id;
    throw ConfigError("make_stitching_pairs: exhausted attempts; legs [" + legs +
                      "] admit no stitching-gap pairs");
  }
  return pairs;
}

// Pairs drawn like the relabeled training distribution (same trajectory,
// goal at or after the start); the imitation sanity check.
inline std::vector<EvalPair> make_in_distribution_pairs(const OfflineDataset& ds, int n_pairs,
                                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EvalPair> pairs;
  pairs.reserve(std::size_t(n_pairs));
  for (int k = 0; k < n_pairs; ++k) {
    const RelabeledSample s = sample_one_relabeled(ds, std::nullopt, rng);
    EvalPair pair;
    pair.kind = EvalPair::Kind::in_distribution;
    pair.start = s.state;
    pair.goal = s.goal;
    pairs.push_back(pair);
  }
  return pairs;
}

// Exact discounted state occupancy for a tabular behaviour policy on a
// discrete maze:
//   p_plus(g | s, a) = (1-gamma) * sum_t gamma^t P(s_t = g | s_0 = s, a_0 = a)
// with subsequent actions from the policy. Computed by iterating the
// transition matrix until gamma^t < 1e-12.
struct OccupancyTable {
  double gamma = 0.9;
  std::vector<std::pair<int, int>> cells;           // free cells
  std::vector<std::vector<double>> by_state_action; // [cell*kNumMoves+a][goal cell]
  std::vector<std::vector<double>> by_state;        // [cell][goal cell], action from policy

  std::size_t cell_index(int i, int j) const {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (cells[k].first == i && cells[k].second == j) return k;
    }
    throw ValidationError("occupancy: cell not free");
  }
};

inline OccupancyTable exact_occupancy(const MazeSpec& spec, const Controller& behavior,
                                      double gamma) {
  if (spec.kind != MazeKind::discrete) {
    throw ValidationError("exact_occupancy: only discrete mazes are supported");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("exact_occupancy: gamma must be in (0,1)");
  if (behavior.kind != Controller::Kind::tabular) {
    throw ConfigError("exact_occupancy: behaviour policy must be tabular");
  }
  OccupancyTable table;
  table.gamma = gamma;
  table.cells = spec.free_cells();
  const std::size_t n = table.cells.size();
  std::vector<std::vector<std::size_t>> next(n, std::vector<std::size_t>(kNumMoves));
  for (std::size_t c = 0; c < n; ++c) {
    for (int a = 0; a < kNumMoves; ++a) {
      const EnvState s = make_cell_state(table.cells[c].first, table.cells[c].second);
      const EnvState nxt = step(spec, s, make_move(Move(a)));
      next[c][std::size_t(a)] = table.cell_index(nxt.ci, nxt.cj);
    }
  }
  const auto probs_at = [&](std::size_t c) -> const std::vector<double>& {
    const auto [i, j] = table.cells[c];
    return behavior.move_probs[std::size_t(j) * std::size_t(spec.cols()) + std::size_t(i)];
  };
  const auto push = [&](const std::vector<double>& d) {
    std::vector<double> out(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      if (d[c] == 0.0) continue;
      const auto& pr = probs_at(c);
      for (int a = 0; a < kNumMoves; ++a) out[next[c][std::size_t(a)]] += d[c] * pr[std::size_t(a)];
    }
    return out;
  };
  const auto accumulate = [&](std::vector<double> d) {
    std::vector<double> occ(n, 0.0);
    double scale = 1.0;
    while (scale >= 1e-12) {
      for (std::size_t c = 0; c < n; ++c) occ[c] += scale * d[c];
      scale *= gamma;
      d = push(d);
    }
    for (auto& v : occ) v *= 1.0 - gamma;
    return occ;
  };

  table.by_state.resize(n);
  table.by_state_action.resize(n * std::size_t(kNumMoves));
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> e(n, 0.0);
    e[c] = 1.0;
    table.by_state[c] = accumulate(e);
    for (int a = 0; a < kNumMoves; ++a) {
      // t = 0 contributes the start cell; the forced action shapes t >= 1.
      std::vector<double> d1(n, 0.0);
      d1[next[c][std::size_t(a)]] = 1.0;
      std::vector<double> occ(n, 0.0);
      occ[c] += 1.0;
      double scale = gamma;
      std::vector<double> d = d1;
      while (scale >= 1e-12) {
        for (std::size_t k = 0; k < n; ++k) occ[k] += scale * d[k];
        scale *= gamma;
        d = push(d);
      }
      for (auto& v : occ) v *= 1.0 - gamma;
      table.by_state_action[c * std::size_t(kNumMoves) + std::size_t(a)] = std::move(occ);
    }
  }
  return table;
}

struct Theorem2Report {
  double gamma = 0.9;
  int clusters = 0;
  std::size_t n_samples = 0;
  bool filtered = true;
  double eps_k = 0.0;        // max intra-cluster cutoff distance
  double l1 = 0.0;           // measured over within-cluster reachable pairs
  double l2 = 0.0;           // measured over within-cluster unreachable pairs
  double max_deviation = 0.0;
  double mc_se = 0.0;        // max per-cell standard error at the oracle values
  double bound_constant = 2.0;
  std::vector<double> p_mgda;
  std::vector<double> p_1step;

  double bound() const { return bound_constant * eps_k * l1 + 3.0 * mc_se; }
  bool within_bound() const { return max_deviation <= bound(); }
};

struct Theorem2Setup {
  std::vector<Controller> behaviors;  // tabular; mixture weights are uniform
  std::pair<int, int> anchor_cell;
  Move anchor_action = Move::right;
  double gamma = 0.9;
  std::size_t n_samples = 100000;
  bool filtered = true;  // apply the one-step model acceptance rule
  std::uint64_t seed = 11;
};

// Compares the goal distribution induced by the model-based augmentation
// sampler against the exact one-step composition of discounted occupancies:
//   p_1step(g | s, a) = sum_sn pbar(sn | s, a) * pbar(g | sn)
// with pbar the uniform mixture over the behaviour policies. The sampler
// draws the original goal from a geometric tail of a fresh behaviour rollout
// anchored at (s, a), replaces it by an accepted cluster member (the
// model-filter step the bound is about), and draws the augmented goal from a
// geometric tail from that member.
inline Theorem2Report theorem2_check(const MazeSpec& spec, const OfflineDataset& ds,
                                     const ClusterIndex& ci, const DynamicsModel& model,
                                     const AugmentConfig& cfg, const Theorem2Setup& setup) {
  if (spec.kind != MazeKind::discrete) {
    throw ValidationError("theorem2_check: only discrete mazes are supported");
  }
  if (setup.behaviors.empty()) throw ConfigError("theorem2_check: need behaviour policies");

  Theorem2Report rep;
  rep.gamma = setup.gamma;
  rep.clusters = ci.C();
  rep.n_samples = setup.n_samples;
  rep.filtered = setup.filtered;
  rep.eps_k = ci.max_eps_k();

  std::vector<OccupancyTable> tables;
  for (const auto& b : setup.behaviors) tables.push_back(exact_occupancy(spec, b, setup.gamma));
  const OccupancyTable& t0 = tables.front();
  const std::size_t n = t0.cells.size();
  const double ph = 1.0 / double(setup.behaviors.size());

  const std::size_t anchor = t0.cell_index(setup.anchor_cell.first, setup.anchor_cell.second);
  const std::size_t arow = anchor * std::size_t(kNumMoves) + std::size_t(int(setup.anchor_action));

  std::vector<double> first(n, 0.0);  // pbar(sn | s, a)
  for (const auto& t : tables) {
    for (std::size_t c = 0; c < n; ++c) first[c] += ph * t.by_state_action[arow][c];
  }
  std::vector<std::vector<double>> tail(n, std::vector<double>(n, 0.0));  // pbar(g | sn)
  for (const auto& t : tables) {
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t g = 0; g < n; ++g) tail[c][g] += ph * t.by_state[c][g];
    }
  }
  rep.p_1step.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t g = 0; g < n; ++g) rep.p_1step[g] += first[c] * tail[c][g];
  }

  // L1/L2: occupancy flatness across same-cluster cell pairs, split by
  // mutual BFS reachability.
  std::vector<int> cell_cluster(n);
  for (std::size_t c = 0; c < n; ++c) {
    cell_cluster[c] = assign(ci, Goal{double(t0.cells[c].first), double(t0.cells[c].second)});
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b || cell_cluster[a] != cell_cluster[b]) continue;
      const Goal ga{double(t0.cells[a].first), double(t0.cells[a].second)};
      const Goal gb{double(t0.cells[b].first), double(t0.cells[b].second)};
      const double gap = std::abs(first[a] - first[b]) / distance(ga, gb);
      if (bfs_reachable(spec, ga, gb).reachable) {
        rep.l1 = std::max(rep.l1, gap);
      } else {
        rep.l2 = std::max(rep.l2, gap);
      }
    }
  }

  // Monte-Carlo over the augmentation sampler.
  Rng rng(setup.seed);
  const int tail_cap = int(std::ceil(std::log(1e-12) / std::log(setup.gamma)));
  const auto rollout_tail = [&](std::size_t start, const Controller& b, int steps) {
    EnvState s = make_cell_state(t0.cells[start].first, t0.cells[start].second);
    int wp = 0;
    for (int t = 0; t < steps; ++t) {
      s = step(spec, s, detail::controller_action(spec, b, s, wp, 0.0, rng));
    }
    return t0.cell_index(s.ci, s.cj);
  };

  std::vector<std::size_t> hist(n, 0);
  RelabeledSample anchor_sample;  // the literal_alg1 query point, if configured
  anchor_sample.state = make_cell_state(setup.anchor_cell.first, setup.anchor_cell.second);
  anchor_sample.action = make_move(setup.anchor_action);
  std::size_t accepted = 0;
  while (accepted < setup.n_samples) {
    const Controller& bh = setup.behaviors[rng.index(setup.behaviors.size())];
    const int t_goal = std::min(rng.geometric(setup.gamma), tail_cap);
    std::size_t u;
    if (t_goal == 0) {
      u = anchor;
    } else {
      EnvState s = step(spec, anchor_sample.state, anchor_sample.action);
      int wp = 0;
      for (int t = 1; t < t_goal; ++t) {
        s = step(spec, s, detail::controller_action(spec, bh, s, wp, 0.0, rng));
      }
      u = t0.cell_index(s.ci, s.cj);
    }
    const Goal u_goal{double(t0.cells[u].first), double(t0.cells[u].second)};
    anchor_sample.goal = u_goal;

    // Candidate retries stay inside the cluster so acceptance odds never
    // reweight the first-stage distribution across u.
    const auto& members = ci.members[std::size_t(assign(ci, u_goal))];
    int cand_traj = -1, cand_t = -1;
    for (int tries = 0; tries < 4096; ++tries) {
      const auto [mtraj, mt] = members[rng.index(members.size())];
      const Trajectory& traj = ds.trajectories[std::size_t(mtraj)];
      if (mt >= traj.horizon()) continue;
      if (setup.filtered &&
          !mgda_accepts(model, cfg, spec, anchor_sample, u_goal, traj.states[std::size_t(mt)],
                        traj.actions[std::size_t(mt)])) {
        continue;
      }
      cand_traj = mtraj;
      cand_t = mt;
      break;
    }
    if (cand_traj < 0) continue;  // no acceptable member; redraw the chain

    const EnvState& sn = ds.trajectories[std::size_t(cand_traj)].states[std::size_t(cand_t)];
    const std::size_t sn_cell = t0.cell_index(sn.ci, sn.cj);
    const Controller& bt = setup.behaviors[rng.index(setup.behaviors.size())];
    const int t_tail = std::min(rng.geometric(setup.gamma), tail_cap);
    const std::size_t g = rollout_tail(sn_cell, bt, t_tail);
    hist[g] += 1;
    accepted += 1;
  }

  rep.p_mgda.assign(n, 0.0);
  for (std::size_t g = 0; g < n; ++g) {
    rep.p_mgda[g] = double(hist[g]) / double(setup.n_samples);
    rep.max_deviation = std::max(rep.max_deviation, std::abs(rep.p_mgda[g] - rep.p_1step[g]));
    const double p = rep.p_1step[g];
    rep.mc_se = std::max(rep.mc_se, std::sqrt(p * (1.0 - p) / double(setup.n_samples)));
  }
  return rep;
}

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
  return nlohmann::json{{"type", "mgda_eval_report"},
                        {"success_rate", r.success_rate},
                        {"ci_low", r.ci_low},
                        {"ci_high", r.ci_high},
                        {"n_episodes", r.n_episodes},
                        {"outcomes", r.outcomes}};
}

inline nlohmann::json theorem2_report_to_json(const Theorem2Report& r) {
  return nlohmann::json{{"type", "mgda_theorem2_report"},
                        {"gamma", r.gamma},
                        {"clusters", r.clusters},
                        {"n_samples", r.n_samples},
                        {"filtered", r.filtered},
                        {"eps_k", r.eps_k},
                        {"l1", r.l1},
                        {"l2", r.l2},
                        {"max_deviation", r.max_deviation},
                        {"mc_se", r.mc_se},
                        {"bound_constant", r.bound_constant},
                        {"bound", r.bound()},
                        {"within_bound", r.within_bound()},
                        {"p_mgda", r.p_mgda},
                        {"p_1step", r.p_1step}};
}

}  // namespace mgda
