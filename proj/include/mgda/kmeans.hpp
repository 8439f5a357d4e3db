#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mgda/dataset.hpp"
#include "mgda/errors.hpp"
#include "mgda/maze.hpp"
#include "mgda/rng.hpp"

namespace mgda {

struct KmeansResult {
  std::vector<Goal> centroids;
  std::vector<int> assignment;     // per point, nearest centroid (ties: lowest id)
  std::vector<double> eps_k;       // exact max pairwise distance per cluster
  std::vector<double> objective;   // Lloyd objective per iteration (non-increasing)
};

namespace detail {

inline double sqdist(const Goal& a, const Goal& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline int nearest_centroid(const std::vector<Goal>& centroids, const Goal& p) {
  int best = 0;
  double best_d = sqdist(centroids[0], p);
  for (int k = 1; k < int(centroids.size()); ++k) {
    const double d = sqdist(centroids[std::size_t(k)], p);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace detail

// Lloyd iterations from k-means++ seeds, run to an assignment fixpoint.
inline KmeansResult kmeans_fit(const std::vector<Goal>& points, int C, int max_iters,
                               std::uint64_t seed) {
  if (C < 1) throw ConfigError("kmeans: C must be >= 1");
  {
    std::vector<std::pair<double, double>> distinct;
    distinct.reserve(points.size());
    for (const auto& p : points) distinct.emplace_back(p.x, p.y);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (std::size_t(C) > distinct.size()) {
      throw ConfigError("kmeans: C=" + std::to_string(C) + " exceeds " +
                        std::to_string(distinct.size()) + " distinct points");
    }
  }

  Rng rng(seed);
  KmeansResult res;

  // k-means++ seeding
  res.centroids.push_back(points[rng.index(points.size())]);
  std::vector<double> d2(points.size());
  while (int(res.centroids.size()) < C) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : res.centroids) best = std::min(best, detail::sqdist(c, points[i]));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      res.centroids.push_back(points[rng.index(points.size())]);
      continue;
    }
    double u = rng.uniform01() * total;
    std::size_t pick = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      u -= d2[i];
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    res.centroids.push_back(points[pick]);
  }

  res.assignment.assign(points.size(), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double obj = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int k = detail::nearest_centroid(res.centroids, points[i]);
      obj += detail::sqdist(res.centroids[std::size_t(k)], points[i]);
      if (k != res.assignment[i]) {
        res.assignment[i] = k;
        changed = true;
      }
    }
    if (!res.objective.empty() && obj > res.objective.back() + 1e-9) {
      throw RuntimeFailure("kmeans: objective increased, iteration " + std::to_string(iter));
    }
    res.objective.push_back(obj);
    if (!changed) break;

    std::vector<Goal> sums(std::size_t(C), Goal{0.0, 0.0});
    std::vector<int> counts(std::size_t(C), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sums[std::size_t(res.assignment[i])].x += points[i].x;
      sums[std::size_t(res.assignment[i])].y += points[i].y;
      counts[std::size_t(res.assignment[i])] += 1;
    }
    for (int k = 0; k < C; ++k) {
      if (counts[std::size_t(k)] > 0) {
        res.centroids[std::size_t(k)] = Goal{sums[std::size_t(k)].x / counts[std::size_t(k)],
                                             sums[std::size_t(k)].y / counts[std::size_t(k)]};
      } else {
        // Re-seed an empty cluster on the point farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
          const double d = detail::sqdist(res.centroids[std::size_t(res.assignment[i])], points[i]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        res.centroids[std::size_t(k)] = points[far];
      }
    }
  }

  // Final assignment fixpoint pass (centroids may have moved on the last
  // iteration) and exact per-cluster diameters.
  for (std::size_t i = 0; i < points.size(); ++i) {
    res.assignment[i] = detail::nearest_centroid(res.centroids, points[i]);
  }
  res.eps_k.assign(std::size_t(C), 0.0);
  std::vector<std::vector<std::size_t>> by_cluster;
  by_cluster.resize(std::size_t(C));
  for (std::size_t i = 0; i < points.size(); ++i) {
    by_cluster[std::size_t(res.assignment[i])].push_back(i);
  }
  for (int k = 0; k < C; ++k) {
    const auto& ids = by_cluster[std::size_t(k)];
    double worst = 0.0;
    for (std::size_t a = 0; a < ids.size(); ++a) {
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        worst = std::max(worst, detail::sqdist(points[ids[a]], points[ids[b]]));
      }
    }
    res.eps_k[std::size_t(k)] = std::sqrt(worst);
  }
  return res;
}

// The CLUSTER function over a dataset: every state occurrence is indexed in
// goal space (phi of the state) with its (trajectory, time) key.
struct ClusterIndex {
  std::vector<Goal> centroids;
  std::vector<double> eps_k;
  std::vector<std::vector<int>> assignment;                     // [traj][t], t in 0..T
  std::vector<std::vector<std::pair<int, int>>> members;        // [cluster] -> (traj, t)

  int C() const { return int(centroids.size()); }

  double max_eps_k() const {
    double m = 0.0;
    for (double e : eps_k) m = std::max(m, e);
    return m;
  }
};

inline int assign(const ClusterIndex& ci, const Goal& p) {
  if (ci.centroids.empty()) throw ValidationError("assign: cluster index is not fitted");
  return detail::nearest_centroid(ci.centroids, p);
}

inline ClusterIndex build_cluster_index(const OfflineDataset& ds, int C, int max_iters,
                                        std::uint64_t seed) {
  std::vector<Goal> points;
  std::vector<std::pair<int, int>> keys;
  for (std::size_t k = 0; k < ds.trajectories.size(); ++k) {
    const auto& traj = ds.trajectories[k];
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
      points.push_back(phi(ds.maze, traj.states[t]));
      keys.emplace_back(int(k), int(t));
    }
  }
  const KmeansResult res = kmeans_fit(points, C, max_iters, seed);
  ClusterIndex ci;
  ci.centroids = res.centroids;
  ci.eps_k = res.eps_k;
  ci.assignment.resize(ds.trajectories.size());
  for (std::size_t k = 0; k < ds.trajectories.size(); ++k) {
    ci.assignment[k].assign(ds.trajectories[k].states.size(), -1);
  }
  ci.members.resize(std::size_t(C));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [traj, t] = keys[i];
    ci.assignment[std::size_t(traj)][std::size_t(t)] = res.assignment[i];
    ci.members[std::size_t(res.assignment[i])].emplace_back(traj, t);
  }
  return ci;
}

inline nlohmann::json cluster_index_to_json(const ClusterIndex& ci) {
  nlohmann::json j;
  nlohmann::json cents = nlohmann::json::array();
  for (const auto& c : ci.centroids) cents.push_back(nlohmann::json::array({c.x, c.y}));
  j["type"] = "mgda_cluster_index";
  j["centroids"] = cents;
  j["eps_k"] = ci.eps_k;
  j["assignment"] = ci.assignment;
  return j;
}

inline ClusterIndex cluster_index_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "mgda_cluster_index") {
    throw ParseError("cluster index: missing type header");
  }
  ClusterIndex ci;
  for (const auto& c : j.at("centroids")) {
    ci.centroids.push_back(Goal{c.at(0).get<double>(), c.at(1).get<double>()});
  }
  ci.eps_k = j.at("eps_k").get<std::vector<double>>();
  ci.assignment = j.at("assignment").get<std::vector<std::vector<int>>>();
  ci.members.resize(ci.centroids.size());
  for (std::size_t k = 0; k < ci.assignment.size(); ++k) {
    for (std::size_t t = 0; t < ci.assignment[k].size(); ++t) {
      ci.members[std::size_t(ci.assignment[k][t])].emplace_back(int(k), int(t));
    }
  }
  return ci;
}

}  // namespace mgda
