#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "cbtrl/config.hpp"
#include "cbtrl/plot.hpp"
#include "cbtrl/report.hpp"

using namespace cbtrl;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const char* name)
      : path(std::string("/tmp/cbtrl_test_") + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

EvalReport sample_report() {
  EvalReport r;
  EpisodeMetrics a;
  a.outcome = Outcome::Success;
  a.ret = -3.5;
  a.steps = 40;
  a.switches = 2;
  a.violations["safe"] = 3;
  EpisodeMetrics b;
  b.outcome = Outcome::Timeout;
  b.ret = -9.0;
  b.steps = 100;
  b.switches = 0;
  b.violations["safe"] = 0;
  r.episodes = {a, b};
  return r;
}

size_t count_lines(const std::string& s) {
  size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("emit_report csv") {
  SUBCASE("empty report is header-only") {
    std::ostringstream os;
    emit_report({}, {"safe"}, ReportFormat::Csv, os);
    CHECK(count_lines(os.str()) == 1);
    CHECK(os.str() ==
          "method,episodes,success_rate,mean_return,std_return,mean_steps,"
          "mean_switches,viol_safe,viol_safe_pct_episodes\n");
  }

  SUBCASE("one method gives one data row") {
    std::ostringstream os;
    emit_report({{"cbtrl", sample_report()}}, {"safe"}, ReportFormat::Csv, os);
    CHECK(count_lines(os.str()) == 2);
    auto row = os.str().substr(os.str().find('\n') + 1);
    CHECK(row.substr(0, 6) == "cbtrl,");
    // 2 episodes, 1 success, 3 violations in 1 of 2 episodes
    CHECK(row.find(",0.5,") != std::string::npos);
    CHECK(row.find(",3,50") != std::string::npos);
  }

  SUBCASE("violation percent counts episodes, not events") {
    EvalReport r = sample_report();
    r.episodes[0].violations["safe"] = 17;  // still one violating episode
    std::ostringstream os;
    emit_report({{"m", r}}, {"safe"}, ReportFormat::Csv, os);
    CHECK(os.str().find(",17,50") != std::string::npos);
  }

  SUBCASE("two emissions are byte-identical") {
    std::ostringstream a, b;
    auto methods = std::vector<MethodReport>{{"cbtrl", sample_report()},
                                             {"btrl", sample_report()}};
    emit_report(methods, {"safe"}, ReportFormat::Csv, a);
    emit_report(methods, {"safe"}, ReportFormat::Csv, b);
    CHECK(a.str() == b.str());
  }

  SUBCASE("unwritable path throws") {
    CHECK_THROWS_AS(emit_report({}, {}, ReportFormat::Csv,
                                std::string("/nonexistent/dir/report.csv")),
                    Error);
  }
}

TEST_CASE("emit_report text table aligns columns") {
  std::ostringstream os;
  emit_report({{"cbtrl", sample_report()}}, {"safe"}, ReportFormat::TextTable,
              os);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(header.substr(0, 6) == "method");
  CHECK(row.substr(0, 5) == "cbtrl");
  CHECK(header.find("viol_safe") != std::string::npos);
}

TEST_CASE("curve csv schema") {
  std::vector<CurvePoint> curve = {{2, 100, 5000, -3.0, 0.5, 0.25}};
  std::ostringstream os;
  write_curve_csv(curve, os);
  CHECK(os.str() ==
        "env_steps,episode,rank,mean_return,std_return,success_rate\n"
        "5000,100,2,-3,0.5,0.25\n");
}

TEST_CASE("trajectory csv round-trips full precision") {
  TransitionRecord r;
  r.state = {0.1, 0.2};
  r.action = 3;
  r.reward = -1.0 / 3.0;
  r.next_state = {0.30000000000000004, 0.2};
  std::ostringstream os;
  write_trajectory_csv({r}, os);
  CHECK(os.str().find("0.30000000000000004") != std::string::npos);
  CHECK(os.str().find("-0.33333333333333331") != std::string::npos);
  CHECK(count_lines(os.str()) == 2);
}

TEST_CASE("learning curve svg") {
  SUBCASE("empty logs throw") {
    std::ostringstream os;
    CHECK_THROWS_AS(plot_learning_curve({}, os), Error);
    CHECK_THROWS_AS(plot_learning_curve({{"m", {}}}, os), Error);
  }

  SUBCASE("single point emits a marker") {
    std::vector<CurveSeries> s = {{"cbtrl", {{2, 10, 500, -1.0, 0.1, 0.0}}}};
    std::ostringstream os;
    plot_learning_curve(s, os);
    CHECK(os.str().find("<svg") != std::string::npos);
    CHECK(os.str().find("<circle") != std::string::npos);
    CHECK(os.str().rfind("</svg>\n") != std::string::npos);
  }

  SUBCASE("band and line per series, deterministic") {
    std::vector<CurveSeries> s = {
        {"a",
         {{2, 10, 50000, -2.0, 0.5, 0.1}, {2, 20, 500000, -1.0, 0.2, 0.9}}}};
    std::ostringstream x, y;
    plot_learning_curve(s, x);
    plot_learning_curve(s, y);
    CHECK(x.str() == y.str());
    CHECK(x.str().find("<polygon") != std::string::npos);
    CHECK(x.str().find("<polyline") != std::string::npos);
  }
}

TEST_CASE("trajectory svg draws the world geometry") {
  Env2dParams p;
  std::vector<std::pair<std::string, std::vector<State>>> paths = {
      {"run", {{0.5, 0.25, 0, 0}, {0.5, 0.3, 0, 0.05}}}};
  std::ostringstream os;
  plot_trajectories(p, paths, os);
  CHECK(os.str().find("<circle") != std::string::npos);  // goal disc
  CHECK(os.str().find("<polyline") != std::string::npos);
  CHECK_THROWS_AS(plot_trajectories(p, {}, os), Error);
}

TEST_CASE("feasibility heatmap marks the zero level set") {
  Env2dGrid grid({}, 10, 10, 3);
  EnumeratedMdp mdp = build_mdp(grid, Region::never());
  Region c = grid.atom("safe");
  auto est = solve_tabular(mdp, make_label(c), 0.99, 1e-6, grid.encoder(), "C");
  std::ostringstream os;
  plot_feasibility_heatmap(grid, est, os);
  CHECK(os.str().find("<rect") != std::string::npos);
  // the doomed slope region guarantees both signs exist, so the level set
  // must be drawn
  CHECK(os.str().find("stroke-width=\"2\"") != std::string::npos);
}

TEST_CASE("config loader") {
  SUBCASE("missing file names the path") {
    CHECK_THROWS_WITH_AS(load_config("/tmp/cbtrl_no_such.json"),
                         doctest::Contains("/tmp/cbtrl_no_such.json"), Error);
  }

  SUBCASE("defaults and overrides") {
    TempFile f("config.json");
    std::ofstream(f.path) << R"({
      "env": "grid2d",
      "env_params": {"grid": [12, 12, 3], "horizon": 120},
      "method": "bt_penalty",
      "train": {"epsilon": 0.25, "penalty_lambda": 2.5},
      "seed": 9,
      "out_dir": "/tmp/artifacts"
    })";
    ExperimentConfig cfg = load_config(f.path);
    CHECK(cfg.env == "grid2d");
    CHECK(cfg.nx == 12);
    CHECK(cfg.grid.horizon == 120);
    CHECK(cfg.grid.v_max == 0.2);  // untouched default
    CHECK(cfg.method == "bt_penalty");
    CHECK(cfg.train.epsilon == 0.25);
    CHECK(cfg.train.penalty_lambda == 2.5);
    // unset train keys keep the benchmark defaults
    CHECK(cfg.train.episodes_per_rank == grid2d_train_config().episodes_per_rank);
    CHECK(cfg.train.seed == 9);
    CHECK(cfg.out_dir == "/tmp/artifacts");

    Bench b = make_bench(cfg);
    CHECK(b.env->state_count() == 12 * 12 * 3 * 3);
    CHECK(b.task.n_ranks() == 2);
  }

  SUBCASE("unknown keys are rejected") {
    TempFile f("config_bad.json");
    std::ofstream(f.path) << R"({"env": "grid2d", "epsilon": 0.5})";
    CHECK_THROWS_WITH_AS(load_config(f.path), doctest::Contains("epsilon"),
                         Error);
  }

  SUBCASE("malformed json names the path") {
    TempFile f("config_syntax.json");
    std::ofstream(f.path) << "{not json";
    CHECK_THROWS_WITH_AS(load_config(f.path),
                         doctest::Contains(f.path.c_str()), Error);
  }

  SUBCASE("warehouse config builds its bench") {
    TempFile f("config_wh.json");
    std::ofstream(f.path) << R"({"env": "warehouse", "method": "btrl"})";
    ExperimentConfig cfg = load_config(f.path);
    Bench b = make_bench(cfg);
    CHECK(b.task.n_ranks() == 4);
    CHECK(cfg.train.episodes_per_rank ==
          warehouse_train_config().episodes_per_rank);
  }
}

TEST_CASE("dwell times accumulate per audited condition") {
  Env2dGrid grid({}, 12, 12, 3);
  Task task = make_task(grid, grid2d_tree_text(),
                        OrderingPattern::BackwardChained,
                        {{"Safety", "safety"}, {"Goal", "goal"}},
                        grid.start_sampler(), {"safe"}, "at_goal");
  BTPolicy policy;
  auto encoder = grid.encoder();
  for (const char* name : {"Safety", "Goal"})
    policy.controllers[name] = std::make_shared<QTableController>(
        name, grid.state_count(), grid.action_count(), encoder);
  Rng rng(1);
  EpisodeMetrics m = run_episode(task, policy, rng);
  CHECK(m.dwell.count("safe") == 1);
  CHECK(m.dwell["safe"] <= m.steps);
  CHECK(m.dwell["safe"] > 0);  // starts in the safe region
}
