// Command-line front end: train / eval / plot / oracle / regions over a JSON
// experiment configuration. Exit codes: 0 success, 1 configuration error,
// 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cbtrl/config.hpp"
#include "cbtrl/oracle.hpp"
#include "cbtrl/plot.hpp"
#include "cbtrl/report.hpp"
#include "cbtrl/serialize.hpp"

namespace {

using namespace cbtrl;

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

ExperimentConfig load(const CliOptions& opt) {
  ExperimentConfig cfg = load_config(opt.config_path);
  if (opt.seed_set) cfg.train.seed = opt.seed;
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  return cfg;
}

RunArtifacts run_method(const ExperimentConfig& cfg, const Bench& bench) {
  if (cfg.method == "cbtrl") return run_cbtrl(bench.task, cfg.train);
  if (cfg.method == "btrl")
    return run_baseline(bench.task, cfg.train, BaselineKind::BTRL);
  if (cfg.method == "bt_penalty")
    return run_baseline(bench.task, cfg.train, BaselineKind::BTPenalty);
  return run_baseline(bench.task, cfg.train, BaselineKind::StandardRL);
}

// The task whose tree matches the trained policy: the flat method evaluates
// on the degenerate single-leaf tree.
Task eval_task(const ExperimentConfig& cfg, const Bench& bench) {
  return cfg.method == "flat" ? make_flat_task(bench.task, "flat")
                              : bench.task;
}

void snapshot_config(const CliOptions& opt, const std::string& dir) {
  std::ifstream src(opt.config_path, std::ios::binary);
  std::ofstream dst(dir + "/config.snapshot", std::ios::binary);
  dst << src.rdbuf();
}

int cmd_train(const CliOptions& opt) {
  ExperimentConfig cfg = load(opt);
  Bench bench = make_bench(cfg);
  RunArtifacts art = run_method(cfg, bench);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir + "/controllers");
  fs::create_directories(cfg.out_dir + "/estimators");
  fs::create_directories(cfg.out_dir + "/logs");
  snapshot_config(opt, cfg.out_dir);
  for (const auto& [name, controller] : art.policy.controllers)
    save_controller(*controller, cfg.out_dir + "/controllers/" + name + ".bin");
  for (size_t i = 0; i < art.policy.estimators.size(); ++i) {
    auto tab = std::dynamic_pointer_cast<TabularEstimator>(
        art.policy.estimators[i]);
    if (tab)
      save_estimator(*tab, cfg.out_dir + "/estimators/C" +
                               std::to_string(i + 1) + ".bin");
  }
  write_curve_csv(art.curve, cfg.out_dir + "/logs/curve.csv");

  std::printf("trained %s on %s: %ld environment steps\n", cfg.method.c_str(),
              cfg.env.c_str(), art.total_steps);
  for (const auto& r : art.ranks) {
    std::printf("  rank %d (%s):%s%s", r.rank, r.controller.c_str(),
                r.constrained ? " constrained" : " unconstrained",
                r.skipped ? ", skipped (mask-unreachable)" : "");
    for (const auto& [atom, n] : r.training_violations)
      std::printf(" train_violations[%s]=%ld", atom.c_str(), n);
    std::printf("\n");
  }
  return 0;
}

int cmd_eval(const CliOptions& opt) {
  ExperimentConfig cfg = load(opt);
  Bench bench = make_bench(cfg);
  RunArtifacts art = run_method(cfg, bench);
  Task task = eval_task(cfg, bench);
  auto report = evaluate(task, art.policy, cfg.eval_episodes, cfg.train.seed);

  std::filesystem::create_directories(cfg.out_dir);
  std::vector<MethodReport> methods = {{cfg.method, report}};
  emit_report(methods, task.violation_atoms, ReportFormat::Csv,
              cfg.out_dir + "/report.csv");
  emit_report(methods, task.violation_atoms, ReportFormat::TextTable,
              cfg.out_dir + "/report.txt");
  std::ostringstream table;
  emit_report(methods, task.violation_atoms, ReportFormat::TextTable, table);
  std::fputs(table.str().c_str(), stdout);
  return 0;
}

int cmd_plot(const CliOptions& opt) {
  ExperimentConfig cfg = load(opt);
  Bench bench = make_bench(cfg);
  if (cfg.train.eval_every <= 0) cfg.train.eval_every = 500;
  RunArtifacts art = run_method(cfg, bench);
  Task task = eval_task(cfg, bench);

  std::filesystem::create_directories(cfg.out_dir);
  save_svg(
      [&](std::ostream& os) {
        plot_learning_curve({{cfg.method, art.curve}}, os);
      },
      cfg.out_dir + "/learning_curve.svg");
  std::printf("wrote %s/learning_curve.svg\n", cfg.out_dir.c_str());

  if (cfg.env == "grid2d") {
    std::vector<std::pair<std::string, std::vector<State>>> paths;
    Rng rng(cfg.train.seed);
    for (int i = 0; i < 5; ++i) {
      std::vector<State> traj;
      Rng episode_rng = rng.split(static_cast<std::uint64_t>(i));
      run_episode(task, art.policy, episode_rng, &traj);
      paths.emplace_back(cfg.method + " #" + std::to_string(i), traj);
    }
    save_svg(
        [&](std::ostream& os) { plot_trajectories(cfg.grid, paths, os); },
        cfg.out_dir + "/trajectories.svg");
    std::printf("wrote %s/trajectories.svg\n", cfg.out_dir.c_str());

    const auto& grid = static_cast<const Env2dGrid&>(*bench.env);
    for (size_t i = 0; i < art.policy.estimators.size(); ++i) {
      if (!art.policy.estimators[i]) continue;
      std::string path = cfg.out_dir + "/feasibility_C" +
                         std::to_string(i + 1) + ".svg";
      save_svg(
          [&](std::ostream& os) {
            plot_feasibility_heatmap(grid, *art.policy.estimators[i], os);
          },
          path);
      std::printf("wrote %s\n", path.c_str());
    }
  }
  return 0;
}

int cmd_oracle(const CliOptions& opt) {
  ExperimentConfig cfg = load(opt);
  Bench bench = make_bench(cfg);
  const Env& env = *bench.env;
  if (!env.enumerable())
    throw Error("oracle checks need an enumerable environment");
  EnumeratedMdp mdp = build_mdp(env, terminal_region(bench.task));
  auto encoder = [&env](const State& s) { return env.encode(s); };

  bool all_ok = true;
  for (int j = 1; j <= bench.task.n_ranks(); ++j) {
    Region c = convergence_set(*bench.task.tree, bench.task.ordering, j);
    auto label = make_label(c);
    TabularEstimator est =
        solve_tabular(mdp, label, cfg.train.gamma_feasibility,
                      cfg.train.feasibility_tol, encoder,
                      "C" + std::to_string(j));

    std::vector<char> failure(mdp.states.size());
    std::vector<double> labels(mdp.states.size());
    for (size_t s = 0; s < mdp.states.size(); ++s) {
      labels[s] = label(mdp.states[s]);
      failure[s] = labels[s] < 0 ? 1 : 0;
    }
    auto kernel = oracle::viability_kernel(mdp, failure);
    auto v_ref = oracle::feasibility_fixed_point(
        mdp, labels, cfg.train.gamma_feasibility, cfg.train.feasibility_tol);

    long kernel_mismatch = 0;
    double max_dev = 0.0;
    for (StateId s = 0; s < mdp.n_states(); ++s) {
      if ((est.value_at(s) >= 0) != (kernel[static_cast<size_t>(s)] != 0))
        ++kernel_mismatch;
      max_dev = std::max(
          max_dev, std::fabs(est.value_at(s) - v_ref[static_cast<size_t>(s)]));
    }
    bool ok = kernel_mismatch == 0 && max_dev < 1e-6;
    all_ok = all_ok && ok;
    std::printf("rank %d: kernel sign mismatches %ld, solver deviation %.3g"
                " -> %s\n",
                j, kernel_mismatch, max_dev, ok ? "ok" : "FAIL");
  }
  if (!all_ok) throw Error("oracle cross-check failed");
  return 0;
}

int cmd_regions(const CliOptions& opt) {
  ExperimentConfig cfg = load(opt);
  Bench bench = make_bench(cfg);
  const Env& env = *bench.env;
  if (!env.enumerable())
    throw Error("region enumeration needs an enumerable environment");
  std::vector<State> states;
  for (StateId s = 0; s < env.state_count(); ++s)
    states.push_back(env.decode(s));
  const Task& task = bench.task;
  auto count = [&](const Region& r) {
    long n = 0;
    for (const auto& s : states)
      if (r.eval(s)) ++n;
    return n;
  };
  std::printf("%ld enumerable states\n", static_cast<long>(states.size()));
  for (int j = 1; j <= task.n_ranks(); ++j) {
    NodeId leaf = task.ordering.leaves[static_cast<size_t>(j - 1)];
    const std::string& name = task.tree->node(leaf).name;
    std::printf("rank %d, behavior %s:\n", j, name.c_str());
    std::printf("  I_%s: %ld states\n", name.c_str(),
                count(influence_region(*task.tree, leaf)));
    std::printf("  O_%s: %ld states\n", name.c_str(),
                count(operating_region(*task.tree, leaf)));
    std::printf("  C_%s: %ld states\n", name.c_str(),
                count(convergence_set(*task.tree, task.ordering, j)));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constrained behavior-tree reinforcement learning"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions opt;
  app.add_option("--config", opt.config_path, "experiment configuration file")
      ->required();
  app.add_option("--seed", opt.seed, "override the configured RNG seed")
      ->each([&opt](const std::string&) { opt.seed_set = true; });
  app.add_option("--out", opt.out_dir, "override the configured output dir");

  auto* train = app.add_subcommand("train", "train the configured method");
  auto* eval = app.add_subcommand("eval", "train, evaluate and emit reports");
  auto* plot = app.add_subcommand("plot", "train and emit SVG plots");
  auto* oracle = app.add_subcommand("oracle", "run brute-force cross-checks");
  auto* regions =
      app.add_subcommand("regions", "enumerate the tree's region calculus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (train->parsed()) return cmd_train(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (plot->parsed()) return cmd_plot(opt);
    if (oracle->parsed()) return cmd_oracle(opt);
    if (regions->parsed()) return cmd_regions(opt);
  } catch (const cbtrl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    // configuration problems (unreadable or malformed config) are exit 1
    return std::string(e.what()).find("config file") != std::string::npos ? 1
                                                                          : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
