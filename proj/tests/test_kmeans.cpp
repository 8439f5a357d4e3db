#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mgda/config.hpp"
#include "mgda/kmeans.hpp"
#include "oracles.hpp"

using namespace mgda;

TEST_CASE("C = 1 yields the mean of all points") {
  const std::vector<Goal> pts = {{0, 0}, {2, 0}, {0, 2}, {6, 6}};
  const KmeansResult res = kmeans_fit(pts, 1, 50, 1);
  CHECK(res.centroids[0].x == Catch::Approx(2.0));
  CHECK(res.centroids[0].y == Catch::Approx(2.0));
  CHECK(res.eps_k[0] == Catch::Approx(std::sqrt(72.0)));
}

TEST_CASE("kmeans rejects more clusters than distinct points") {
  const std::vector<Goal> pts = {{0, 0}, {0, 0}, {1, 1}};
  CHECK_THROWS_AS(kmeans_fit(pts, 3, 50, 1), ConfigError);
  CHECK_THROWS_AS(kmeans_fit(pts, 0, 50, 1), ConfigError);
  CHECK_NOTHROW(kmeans_fit(pts, 2, 50, 1));
}

TEST_CASE("two well-separated blobs are recovered exactly") {
  Rng rng(5);
  std::vector<Goal> pts;
  for (int k = 0; k < 6; ++k) pts.push_back({rng.uniform01() * 0.5, rng.uniform01() * 0.5});
  for (int k = 0; k < 6; ++k) {
    pts.push_back({10.0 + rng.uniform01() * 0.5, 10.0 + rng.uniform01() * 0.5});
  }
  const KmeansResult res = kmeans_fit(pts, 2, 100, 2);
  std::vector<int> oracle_assign;
  const double oracle_sse = oracles::brute_force_two_clustering(pts, &oracle_assign);
  CHECK(res.objective.back() == Catch::Approx(oracle_sse).epsilon(1e-9));
  for (std::size_t i = 1; i < 6; ++i) CHECK(res.assignment[i] == res.assignment[0]);
  for (std::size_t i = 7; i < 12; ++i) CHECK(res.assignment[i] == res.assignment[6]);
  CHECK(res.assignment[0] != res.assignment[6]);
}

TEST_CASE("objective is non-increasing across Lloyd iterations") {
  Rng rng(7);
  std::vector<Goal> pts;
  for (int k = 0; k < 300; ++k) pts.push_back({rng.uniform01() * 8.0, rng.uniform01() * 8.0});
  const KmeansResult res = kmeans_fit(pts, 7, 100, 3);
  for (std::size_t it = 1; it < res.objective.size(); ++it) {
    CHECK(res.objective[it] <= res.objective[it - 1] + 1e-9);
  }
}

TEST_CASE("eps_k equals the exact max pairwise distance (brute force)") {
  Rng rng(9);
  std::vector<Goal> pts;
  for (int k = 0; k < 150; ++k) pts.push_back({rng.uniform01() * 5.0, rng.uniform01() * 5.0});
  const KmeansResult res = kmeans_fit(pts, 4, 100, 4);
  for (int k = 0; k < 4; ++k) {
    double worst = 0.0;
    for (std::size_t a = 0; a < pts.size(); ++a) {
      for (std::size_t b = 0; b < pts.size(); ++b) {
        if (res.assignment[a] == k && res.assignment[b] == k) {
          worst = std::max(worst, distance(pts[a], pts[b]));
        }
      }
    }
    CHECK(res.eps_k[std::size_t(k)] == Catch::Approx(worst));
  }
}

TEST_CASE("assign: centroid hit, tie-break to the lowest id, fixpoint") {
  ClusterIndex ci;
  ci.centroids = {{10, 10}, {-10, -10}, {2, 3}, {9, 9}, {6, -6}, {2, -3}};
  // exact centroid
  CHECK(assign(ci, Goal{9, 9}) == 3);
  // equidistant between clusters 2 (2,3) and 5 (2,-3): lowest id wins
  CHECK(assign(ci, Goal{2, 0}) == 2);

  Rng rng(11);
  std::vector<Goal> pts;
  for (int k = 0; k < 200; ++k) pts.push_back({rng.uniform01() * 6.0, rng.uniform01() * 6.0});
  const KmeansResult res = kmeans_fit(pts, 5, 100, 12);
  ClusterIndex fitted;
  fitted.centroids = res.centroids;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(assign(fitted, pts[i]) == res.assignment[i]);
  }
  ClusterIndex unfitted;
  CHECK_THROWS_AS(assign(unfitted, Goal{0, 0}), ValidationError);
}

TEST_CASE("kmeans is deterministic under a fixed seed") {
  Rng rng(13);
  std::vector<Goal> pts;
  for (int k = 0; k < 400; ++k) pts.push_back({rng.normal(), rng.normal()});
  const KmeansResult a = kmeans_fit(pts, 9, 100, 77);
  const KmeansResult b = kmeans_fit(pts, 9, 100, 77);
  CHECK(a.assignment == b.assignment);
  for (std::size_t k = 0; k < a.centroids.size(); ++k) {
    CHECK(a.centroids[k].x == b.centroids[k].x);
    CHECK(a.centroids[k].y == b.centroids[k].y);
  }
}

TEST_CASE("cluster index over a dataset covers every state occurrence") {
  const MazeSpec maze = builtin_maze("open5", MazeKind::discrete);
  const OfflineDataset ds = collect(maze, theorem2_behaviors(maze), 20, 15, 0.0, 3);
  const ClusterIndex ci = build_cluster_index(ds, 4, 100, 5);
  std::size_t total = 0;
  for (const auto& members : ci.members) total += members.size();
  CHECK(total == 20 * 16);
  for (std::size_t k = 0; k < ds.trajectories.size(); ++k) {
    for (std::size_t t = 0; t < ds.trajectories[k].states.size(); ++t) {
      const int c = ci.assignment[k][t];
      REQUIRE(c >= 0);
      CHECK(c == assign(ci, phi(maze, ds.trajectories[k].states[t])));
    }
  }
  const ClusterIndex back = cluster_index_from_json(cluster_index_to_json(ci));
  CHECK(back.assignment == ci.assignment);
  CHECK(back.eps_k == ci.eps_k);
}
