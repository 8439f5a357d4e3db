#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mgda/augment.hpp"
#include "mgda/config.hpp"
#include "mgda/dataset.hpp"
#include "mgda/dynamics.hpp"
#include "mgda/errors.hpp"
#include "mgda/evaluate.hpp"
#include "mgda/io.hpp"
#include "mgda/kmeans.hpp"
#include "mgda/maze.hpp"
#include "mgda/policy.hpp"
#include "mgda/report.hpp"

namespace {

using namespace mgda;

struct CliState {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::optional<std::string> strategy;
  std::optional<std::string> weight_scheme;
};

RunConfig resolve_config(const CliState& cli) {
  Json merged = config_to_json(RunConfig{});
  if (!cli.config_path.empty()) {
    Json file;
    try {
      file = Json::parse(read_text_file(cli.config_path));
    } catch (const Json::exception& e) {
      throw ParseError("config file: " + std::string(e.what()));
    }
    merged = apply_overrides(merged, {});
    for (auto& [section, body] : file.items()) {
      for (auto& [key, value] : body.items()) merged[section][key] = value;
    }
  }
  merged = apply_overrides(merged, cli.overrides);
  if (cli.seed) merged["run"]["seed"] = *cli.seed;
  if (cli.out) merged["run"]["out"] = *cli.out;
  if (cli.jobs) merged["run"]["jobs"] = *cli.jobs;
  if (cli.strategy) merged["augment"]["strategy"] = *cli.strategy;
  if (cli.weight_scheme) merged["weights"]["scheme"] = *cli.weight_scheme;
  return config_from_json(merged);
}

int resolve_jobs(const RunConfig& cfg) {
  if (cfg.jobs > 0) return cfg.jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

std::string out_path(const RunConfig& cfg, const std::string& file) {
  return (std::filesystem::path(cfg.out) / file).string();
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::map<std::string, std::string>& inputs) {
  const Json manifest = make_manifest(command, config_to_json(cfg), inputs);
  write_text_file(out_path(cfg, "manifest_" + command + ".json"), manifest.dump(2) + "\n");
}

void require_artifact(const std::string& path, const std::string& producer) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("missing '" + path + "'; run " + producer + " first");
  }
}

std::string dataset_path(const RunConfig& cfg) { return out_path(cfg, "dataset.jsonl"); }
std::string dynamics_path(const RunConfig& cfg) { return out_path(cfg, "dynamics.json"); }
std::string clusters_path(const RunConfig& cfg) { return out_path(cfg, "clusters.json"); }
std::string policy_path(const RunConfig& cfg, const std::string& strategy) {
  return out_path(cfg, "policy_" + strategy + ".json");
}

// Held-out split for the certificate: every 10th trajectory.
void split_tuples(const OfflineDataset& ds, std::vector<TransitionTuple>& train,
                  std::vector<TransitionTuple>& held_out) {
  for (const auto& tup : transition_tuples(ds)) {
    (tup.traj_index % 10 == 9 ? held_out : train).push_back(tup);
  }
}

int cmd_gen_data(const RunConfig& cfg) {
  const MazeSpec maze = resolve_maze(cfg);
  const auto controllers =
      builtin_controllers(cfg.legs, maze, cfg.controller_kp, cfg.controller_kd);
  const OfflineDataset ds =
      collect(maze, controllers, cfg.n_traj, cfg.horizon, cfg.noise, cfg.seed);
  save_dataset(ds, dataset_path(cfg));
  write_manifest(cfg, "gen-data", {});
  std::cerr << "gen-data: " << ds.trajectories.size() << " trajectories, "
            << ds.transition_count() << " transitions -> " << dataset_path(cfg) << "\n";
  return 0;
}

int cmd_fit_dynamics(const RunConfig& cfg) {
  require_artifact(dataset_path(cfg), "gen-data");
  const OfflineDataset ds = load_dataset(dataset_path(cfg));
  std::vector<TransitionTuple> train, held_out;
  split_tuples(ds, train, held_out);

  FitDynamicsConfig fit;
  fit.lambda = cfg.lambda;
  fit.alpha_slack = cfg.alpha_slack;
  fit.epochs = cfg.dyn_epochs;
  fit.lr = cfg.dyn_lr;
  fit.batch = cfg.dyn_batch;
  fit.hidden = cfg.dyn_hidden;
  fit.use_projection = cfg.dyn_projection;
  fit.use_slack = cfg.dyn_slack;
  fit.seed = cfg.seed;
  const FitDynamicsResult res = fit_dynamics(ds.maze, train, fit);
  write_text_file(dynamics_path(cfg), dynamics_to_json(res.model).dump() + "\n");

  const LipschitzCertificate cert =
      verify_theorem1(ds.maze, res.model, held_out, resolve_k_env(cfg, ds.maze));
  write_text_file(out_path(cfg, "certificate.json"), certificate_to_json(cert).dump(2) + "\n");
  write_manifest(cfg, "fit-dynamics", {{"dataset", dataset_path(cfg)}});
  std::cerr << "fit-dynamics: eps=" << cert.epsilon << " delta=" << cert.delta
            << " violation_rate=" << cert.bound_violation_rate << "\n";
  return 0;
}

int cmd_cluster(const RunConfig& cfg) {
  require_artifact(dataset_path(cfg), "gen-data");
  const OfflineDataset ds = load_dataset(dataset_path(cfg));
  const ClusterIndex ci =
      build_cluster_index(ds, resolve_clusters(cfg), cfg.kmeans_iters, cfg.seed);
  write_text_file(clusters_path(cfg), cluster_index_to_json(ci).dump() + "\n");
  write_manifest(cfg, "cluster", {{"dataset", dataset_path(cfg)}});
  std::cerr << "cluster: C=" << ci.C() << " max_eps_k=" << ci.max_eps_k() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  require_artifact(dataset_path(cfg), "gen-data");
  const OfflineDataset ds = load_dataset(dataset_path(cfg));
  const AugmentConfig aug = make_augment_config(cfg);

  ClusterIndex ci;
  DynamicsModel model;
  AugmentContext ctx;
  ctx.ds = &ds;
  ctx.cfg = aug;
  std::map<std::string, std::string> inputs{{"dataset", dataset_path(cfg)}};
  if (aug.strategy == Strategy::tgda || aug.strategy == Strategy::mgda) {
    require_artifact(clusters_path(cfg), "cluster");
    ci = cluster_index_from_json(Json::parse(read_text_file(clusters_path(cfg))));
    ctx.ci = &ci;
    inputs["clusters"] = clusters_path(cfg);
  }
  if (aug.strategy == Strategy::mgda) {
    require_artifact(dynamics_path(cfg), "fit-dynamics");
    model = dynamics_from_json(Json::parse(read_text_file(dynamics_path(cfg))));
    ctx.model = &model;
    inputs["dynamics"] = dynamics_path(cfg);
  }

  TrainPolicyConfig train_cfg;
  train_cfg.steps = cfg.train_steps;
  train_cfg.batch = cfg.train_batch;
  train_cfg.lr = cfg.train_lr;
  train_cfg.hidden = cfg.policy_hidden;
  train_cfg.seed = cfg.seed;
  const WeightScheme ws = weight_scheme_from_name(cfg.weight_scheme, cfg.weight_gamma);
  const TrainedPolicy trained = train_policy(ctx, ws, train_cfg);
  write_text_file(policy_path(cfg, cfg.strategy), policy_to_json(trained.policy).dump() + "\n");
  write_manifest(cfg, "train", inputs);
  std::cerr << "train[" << cfg.strategy << "]: first loss "
            << (trained.loss_curve.empty() ? 0.0 : trained.loss_curve.front()) << ", last loss "
            << (trained.loss_curve.empty() ? 0.0 : trained.loss_curve.back()) << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  require_artifact(dataset_path(cfg), "gen-data");
  require_artifact(policy_path(cfg, cfg.strategy), "train");
  const OfflineDataset ds = load_dataset(dataset_path(cfg));
  const Policy policy =
      policy_from_json(Json::parse(read_text_file(policy_path(cfg, cfg.strategy))));
  const int t_max = resolve_t_max(cfg);
  const int jobs = resolve_jobs(cfg);

  const auto stitch_pairs = make_stitching_pairs(ds.maze, ds, cfg.n_pairs, cfg.delta, cfg.seed);
  const auto indist_pairs = make_in_distribution_pairs(ds, cfg.n_pairs, cfg.seed + 1);
  const EvalReport stitch =
      rollout_success(policy, ds.maze, stitch_pairs, t_max, cfg.delta, cfg.bootstrap, cfg.seed, jobs);
  const EvalReport indist =
      rollout_success(policy, ds.maze, indist_pairs, t_max, cfg.delta, cfg.bootstrap, cfg.seed, jobs);

  Json out{{"strategy", cfg.strategy},
           {"stitching", eval_report_to_json(stitch)},
           {"in_distribution", eval_report_to_json(indist)}};
  write_text_file(out_path(cfg, "eval_" + cfg.strategy + ".json"), out.dump(2) + "\n");
  std::string csv = csv_join({"strategy", "kind", "success_rate", "ci_low", "ci_high", "episodes"});
  csv += csv_join({cfg.strategy, "stitching", fmt_double(stitch.success_rate),
                   fmt_double(stitch.ci_low), fmt_double(stitch.ci_high),
                   std::to_string(stitch.n_episodes)});
  csv += csv_join({cfg.strategy, "in_distribution", fmt_double(indist.success_rate),
                   fmt_double(indist.ci_low), fmt_double(indist.ci_high),
                   std::to_string(indist.n_episodes)});
  write_text_file(out_path(cfg, "eval_" + cfg.strategy + ".csv"), csv);

  std::map<std::string, std::vector<BarSeries>> chart;
  chart[cfg.maze_name] = {
      BarSeries{"stitching", stitch.success_rate, stitch.ci_low, stitch.ci_high},
      BarSeries{"in_distribution", indist.success_rate, indist.ci_low, indist.ci_high}};
  write_text_file(out_path(cfg, "eval_" + cfg.strategy + ".svg"),
                  bar_chart_svg("success rate: " + cfg.strategy, {cfg.maze_name}, chart));
  write_manifest(cfg, "eval",
                 {{"dataset", dataset_path(cfg)}, {"policy", policy_path(cfg, cfg.strategy)}});
  std::cerr << "eval[" << cfg.strategy << "]: stitching " << stitch.success_rate
            << ", in-distribution " << indist.success_rate << "\n";
  return 0;
}

int cmd_audit(const RunConfig& cfg) {
  require_artifact(dataset_path(cfg), "gen-data");
  require_artifact(clusters_path(cfg), "cluster");
  require_artifact(dynamics_path(cfg), "fit-dynamics");
  const OfflineDataset ds = load_dataset(dataset_path(cfg));
  const ClusterIndex ci = cluster_index_from_json(Json::parse(read_text_file(clusters_path(cfg))));
  const DynamicsModel model =
      dynamics_from_json(Json::parse(read_text_file(dynamics_path(cfg))));

  Json all = Json::array();
  std::string csv = csv_join(
      {"strategy", "diversity", "optimality", "reachability", "yield", "n_augmented"});
  std::cerr << "principle audit (" << cfg.maze_name << "):\n";
  std::cerr << "  strategy   diversity  optimality  reachability\n";
  for (const Strategy strat : {Strategy::sgda, Strategy::tgda, Strategy::mgda}) {
    AugmentContext ctx;
    ctx.ds = &ds;
    ctx.ci = &ci;
    ctx.model = &model;
    ctx.cfg = make_augment_config(cfg);
    ctx.cfg.strategy = strat;
    Rng rng(cfg.seed);
    const PrincipleReport rep = audit_principles(ctx, 10000, rng);
    all.push_back(principle_report_to_json(rep));
    csv += csv_join({rep.strategy, fmt_double(rep.diversity), fmt_double(rep.optimality),
                     fmt_double(rep.reachability), fmt_double(rep.yield),
                     std::to_string(rep.n_augmented)});
    const auto mark = [](bool ok) { return ok ? "yes" : "NO "; };
    std::fprintf(stderr, "  %-9s  %s %.3f  %s %.3f   %s %.3f\n", rep.strategy.c_str(),
                 mark(rep.diversity_ok()), rep.diversity, mark(rep.optimality_ok()),
                 rep.optimality, mark(rep.reachability_ok()), rep.reachability);
  }
  write_text_file(out_path(cfg, "audit.json"), all.dump(2) + "\n");
  write_text_file(out_path(cfg, "audit.csv"), csv);
  write_manifest(cfg, "audit",
                 {{"dataset", dataset_path(cfg)},
                  {"clusters", clusters_path(cfg)},
                  {"dynamics", dynamics_path(cfg)}});
  return 0;
}

int cmd_theorems(const RunConfig& cfg) {
  // Model smoothness bound on the configured artifacts.
  require_artifact(dataset_path(cfg), "gen-data");
  require_artifact(dynamics_path(cfg), "fit-dynamics");
  const OfflineDataset ds = load_dataset(dataset_path(cfg));
  const DynamicsModel model =
      dynamics_from_json(Json::parse(read_text_file(dynamics_path(cfg))));
  std::vector<TransitionTuple> train, held_out;
  split_tuples(ds, train, held_out);
  const LipschitzCertificate cert =
      verify_theorem1(ds.maze, model, held_out, resolve_k_env(cfg, ds.maze));
  write_text_file(out_path(cfg, "theorem1.json"), certificate_to_json(cert).dump(2) + "\n");
  std::cerr << "theorem1: violation_rate=" << cert.bound_violation_rate << " (eps=" << cert.epsilon
            << ", K=" << cert.k_env << ", delta=" << cert.delta << ")\n";

  // Distribution approximation on its canonical discrete instance.
  const MazeSpec grid = builtin_maze("open5", MazeKind::discrete);
  const auto behaviors = theorem2_behaviors(grid);
  const OfflineDataset dgrid = collect(grid, behaviors, 300, 120, 0.0, cfg.seed + 100);
  const ClusterIndex ci = build_cluster_index(dgrid, 4, cfg.kmeans_iters, cfg.seed + 101);
  FitDynamicsConfig fit;
  fit.epochs = 60;
  fit.lr = 5e-3;
  fit.hidden = {64};
  fit.seed = cfg.seed + 102;
  const FitDynamicsResult dyn = fit_dynamics(grid, transition_tuples(dgrid), fit);

  Theorem2Setup setup;
  setup.behaviors = behaviors;
  setup.anchor_cell = {1, 1};
  setup.anchor_action = Move::right;
  setup.gamma = cfg.occupancy_gamma;
  setup.n_samples = cfg.theorem2_samples;
  setup.seed = cfg.seed + 103;
  AugmentConfig aug = make_augment_config(cfg);
  const Theorem2Report rep = theorem2_check(grid, dgrid, ci, dyn.model, aug, setup);
  write_text_file(out_path(cfg, "theorem2.json"), theorem2_report_to_json(rep).dump(2) + "\n");
  write_manifest(cfg, "theorems",
                 {{"dataset", dataset_path(cfg)}, {"dynamics", dynamics_path(cfg)}});
  std::cerr << "theorem2: max_dev=" << rep.max_deviation << " bound=" << rep.bound()
            << " (eps_k=" << rep.eps_k << ", L1=" << rep.l1 << ")\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  const std::vector<int> sizes = {std::max(1, cfg.n_traj / 4), cfg.n_traj, cfg.n_traj * 4};
  const std::vector<std::string> strategies = {"none", "sgda", "tgda", "mgda"};
  std::string csv = csv_join({"n_traj", "none", "sgda", "tgda", "mgda"});
  std::map<std::string, std::vector<BarSeries>> chart;
  std::vector<std::string> size_labels;

  for (const int size : sizes) {
    const MazeSpec maze = resolve_maze(cfg);
    const auto controllers =
        builtin_controllers(cfg.legs, maze, cfg.controller_kp, cfg.controller_kd);
    const OfflineDataset ds = collect(maze, controllers, size, cfg.horizon, cfg.noise, cfg.seed);
    std::vector<TransitionTuple> train, held_out;
    split_tuples(ds, train, held_out);
    FitDynamicsConfig fit;
    fit.lambda = cfg.lambda;
    fit.alpha_slack = cfg.alpha_slack;
    fit.epochs = cfg.dyn_epochs;
    fit.lr = cfg.dyn_lr;
    fit.batch = cfg.dyn_batch;
    fit.hidden = cfg.dyn_hidden;
    fit.seed = cfg.seed;
    const FitDynamicsResult dyn = fit_dynamics(maze, train, fit);
    const ClusterIndex ci =
        build_cluster_index(ds, resolve_clusters(cfg), cfg.kmeans_iters, cfg.seed);
    const auto pairs = make_stitching_pairs(maze, ds, cfg.n_pairs, cfg.delta, cfg.seed);
    const WeightScheme ws = weight_scheme_from_name(cfg.weight_scheme, cfg.weight_gamma);

    std::vector<std::string> row{std::to_string(size)};
    std::vector<BarSeries> bars;
    for (const auto& strat : strategies) {
      AugmentContext ctx;
      ctx.ds = &ds;
      ctx.ci = &ci;
      ctx.model = &dyn.model;
      ctx.cfg = make_augment_config(cfg);
      ctx.cfg.strategy = strategy_from_name(strat);
      TrainPolicyConfig train_cfg;
      train_cfg.steps = cfg.train_steps;
      train_cfg.batch = cfg.train_batch;
      train_cfg.lr = cfg.train_lr;
      train_cfg.hidden = cfg.policy_hidden;
      train_cfg.seed = cfg.seed;
      const TrainedPolicy trained = train_policy(ctx, ws, train_cfg);
      const EvalReport rep = rollout_success(trained.policy, maze, pairs, resolve_t_max(cfg),
                                             cfg.delta, cfg.bootstrap, cfg.seed, resolve_jobs(cfg));
      row.push_back(fmt_double(rep.success_rate));
      bars.push_back(BarSeries{strat, rep.success_rate, rep.ci_low, rep.ci_high});
      std::cerr << "sweep: n_traj=" << size << " " << strat << " -> " << rep.success_rate << "\n";
    }
    csv += csv_join(row);
    chart[std::to_string(size)] = bars;
    size_labels.push_back(std::to_string(size));
  }
  write_text_file(out_path(cfg, "sweep.csv"), csv);
  write_text_file(out_path(cfg, "sweep.svg"),
                  bar_chart_svg("stitching success by dataset size", size_labels, chart));
  write_manifest(cfg, "sweep", {});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"goal data augmentation workbench for offline goal-conditioned learning"};
  app.require_subcommand(1);

  CliState cli;
  app.add_option("--config", cli.config_path, "JSON config file");
  app.add_option("--set", cli.overrides, "dotted config override, e.g. dynamics.lr=0.001");
  app.add_option("--seed", cli.seed, "run seed");
  app.add_option("--out", cli.out, "output directory");
  app.add_option("--jobs", cli.jobs, "worker cap for parallel stages");
  app.add_option("--strategy", cli.strategy, "augmentation strategy: none|sgda|tgda|mgda");
  app.add_option("--weight-scheme", cli.weight_scheme, "weight scheme: uniform|discount");

  int (*handler)(const RunConfig&) = nullptr;
  app.add_subcommand("gen-data", "collect the scripted offline dataset")
      ->callback([&] { handler = cmd_gen_data; });
  app.add_subcommand("fit-dynamics", "train the one-step residual model and certify it")
      ->callback([&] { handler = cmd_fit_dynamics; });
  app.add_subcommand("cluster", "fit the k-means index over goal space")
      ->callback([&] { handler = cmd_cluster; });
  app.add_subcommand("train", "train the goal-conditioned policy with the chosen strategy")
      ->callback([&] { handler = cmd_train; });
  app.add_subcommand("eval", "stitching + in-distribution rollout evaluation")
      ->callback([&] { handler = cmd_eval; });
  app.add_subcommand("audit", "principle audit matrix over sgda/tgda/mgda")
      ->callback([&] { handler = cmd_audit; });
  app.add_subcommand("theorems", "model-smoothness certificate and sampler-distribution check")
      ->callback([&] { handler = cmd_theorems; });
  app.add_subcommand("sweep", "dataset-size x strategy success grid")
      ->callback([&] { handler = cmd_sweep; });

  CLI11_PARSE(app, argc, argv);
  try {
    const RunConfig cfg = resolve_config(cli);
    std::filesystem::create_directories(cfg.out);
    return handler(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
}
