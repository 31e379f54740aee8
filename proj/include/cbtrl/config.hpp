#pragma once

// JSON experiment configuration. One document describes the environment,
// the tree, the method and the training hyperparameters; unknown keys are
// rejected so typos fail loudly. Documented keys:
//
//   env            "grid2d" | "warehouse"
//   env_params     grid2d: dt, v_max, a_max, unsafe [x0,y0,x1,y1],
//                  slope [x0,y0,x1,y1], start [x0,y0,x1,y1], goal [x,y],
//                  goal_radius, drift [x,y], horizon, flat_safety_weight,
//                  reciprocal_goal_reward, grid [nx,ny,nv]
//                  warehouse: map [row strings], route [[x,y]...], horizon,
//                  step_cost, bump_penalty, shaping, event_bonus
//   tree           tree text; omitted = the benchmark tree for the env
//   ordering       "backward_chained" | "implicit_sequence"
//   rewards        controller name -> env reward name
//   method         "cbtrl" | "btrl" | "bt_penalty" | "flat"
//   train          alpha, gamma, q_init, epsilon, episodes_per_rank,
//                  eval_every, eval_episodes, gamma_feasibility,
//                  feasibility_tol, margin, penalty_lambda,
//                  base_restart_fraction, train_horizon
//   seed           RNG seed (the CLI's --seed overrides it)
//   eval_episodes  episode count for the eval subcommand
//   out_dir        artifact directory (the CLI's --out overrides it)

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbtrl/bench.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

struct ExperimentConfig {
  std::string env = "grid2d";
  Env2dParams grid;
  int nx = 40, ny = 40, nv = 5;
  WarehouseParams warehouse;
  std::string tree;  // empty = benchmark default for the env
  std::string ordering;
  std::map<std::string, std::string> rewards;
  std::string method = "cbtrl";
  TrainConfig train;
  int eval_episodes = 100;
  std::string out_dir = ".";
};

namespace detail_config {

using nlohmann::json;

inline void expect_keys(const json& j, const std::vector<std::string>& known,
                        const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) throw Error("unknown key '" + key + "' in " + where);
  }
}

inline Rect get_rect(const json& j) {
  if (!j.is_array() || j.size() != 4)
    throw Error("rectangles are [x0, y0, x1, y1] arrays");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>()};
}

inline void parse_grid2d_params(const json& j, ExperimentConfig& cfg) {
  expect_keys(j,
              {"dt", "v_max", "a_max", "unsafe", "slope", "start", "goal",
               "goal_radius", "drift", "horizon", "flat_safety_weight",
               "reciprocal_goal_reward", "grid"},
              "env_params");
  Env2dParams& p = cfg.grid;
  if (j.count("dt")) p.dt = j["dt"].get<double>();
  if (j.count("v_max")) p.v_max = j["v_max"].get<double>();
  if (j.count("a_max")) p.a_max = j["a_max"].get<double>();
  if (j.count("unsafe")) p.unsafe = get_rect(j["unsafe"]);
  if (j.count("slope")) p.slope = get_rect(j["slope"]);
  if (j.count("start")) p.start = get_rect(j["start"]);
  if (j.count("goal")) {
    p.goal_x = j["goal"][0].get<double>();
    p.goal_y = j["goal"][1].get<double>();
  }
  if (j.count("goal_radius")) p.goal_radius = j["goal_radius"].get<double>();
  if (j.count("drift")) {
    p.drift_x = j["drift"][0].get<double>();
    p.drift_y = j["drift"][1].get<double>();
  }
  if (j.count("horizon")) p.horizon = j["horizon"].get<int>();
  if (j.count("flat_safety_weight"))
    p.flat_safety_weight = j["flat_safety_weight"].get<double>();
  if (j.count("reciprocal_goal_reward"))
    p.reciprocal_goal_reward = j["reciprocal_goal_reward"].get<bool>();
  if (j.count("grid")) {
    cfg.nx = j["grid"][0].get<int>();
    cfg.ny = j["grid"][1].get<int>();
    cfg.nv = j["grid"][2].get<int>();
  }
}

inline void parse_warehouse_params(const json& j, ExperimentConfig& cfg) {
  expect_keys(j,
              {"map", "route", "horizon", "step_cost", "bump_penalty",
               "shaping", "event_bonus"},
              "env_params");
  WarehouseParams& p = cfg.warehouse;
  if (j.count("map")) p.map = j["map"].get<std::vector<std::string>>();
  if (j.count("route")) {
    p.route.clear();
    for (const auto& cell : j["route"])
      p.route.emplace_back(cell[0].get<int>(), cell[1].get<int>());
  }
  if (j.count("horizon")) p.horizon = j["horizon"].get<int>();
  if (j.count("step_cost")) p.step_cost = j["step_cost"].get<double>();
  if (j.count("bump_penalty")) p.bump_penalty = j["bump_penalty"].get<double>();
  if (j.count("shaping")) p.shaping = j["shaping"].get<double>();
  if (j.count("event_bonus")) p.event_bonus = j["event_bonus"].get<double>();
}

inline void parse_train(const json& j, TrainConfig& t) {
  expect_keys(j,
              {"alpha", "gamma", "q_init", "epsilon", "episodes_per_rank",
               "eval_every", "eval_episodes", "gamma_feasibility",
               "feasibility_tol", "margin", "penalty_lambda",
               "base_restart_fraction", "train_horizon"},
              "train");
  if (j.count("alpha")) t.q.alpha = j["alpha"].get<double>();
  if (j.count("gamma")) t.q.gamma = j["gamma"].get<double>();
  if (j.count("q_init")) t.q.init = j["q_init"].get<double>();
  if (j.count("epsilon")) t.epsilon = j["epsilon"].get<double>();
  if (j.count("episodes_per_rank"))
    t.episodes_per_rank = j["episodes_per_rank"].get<long>();
  if (j.count("eval_every")) t.eval_every = j["eval_every"].get<int>();
  if (j.count("eval_episodes")) t.eval_episodes = j["eval_episodes"].get<int>();
  if (j.count("gamma_feasibility"))
    t.gamma_feasibility = j["gamma_feasibility"].get<double>();
  if (j.count("feasibility_tol"))
    t.feasibility_tol = j["feasibility_tol"].get<double>();
  if (j.count("margin")) t.margin = j["margin"].get<double>();
  if (j.count("penalty_lambda"))
    t.penalty_lambda = j["penalty_lambda"].get<double>();
  if (j.count("base_restart_fraction"))
    t.base_restart_fraction = j["base_restart_fraction"].get<double>();
  if (j.count("train_horizon")) t.train_horizon = j["train_horizon"].get<int>();
}

}  // namespace detail_config

inline ExperimentConfig load_config(const std::string& path) {
  using detail_config::json;
  std::ifstream is(path);
  if (!is) throw Error("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw Error("config file '" + path + "': " + e.what());
  }
  try {
    ExperimentConfig cfg;
    detail_config::expect_keys(j,
                               {"env", "env_params", "tree", "ordering",
                                "rewards", "method", "train", "seed",
                                "eval_episodes", "out_dir"},
                               "config");
    if (j.count("env")) cfg.env = j["env"].get<std::string>();
    if (cfg.env != "grid2d" && cfg.env != "warehouse")
      throw Error("env must be 'grid2d' or 'warehouse'");
    cfg.train = cfg.env == "grid2d" ? grid2d_train_config()
                                    : warehouse_train_config();
    if (j.count("env_params")) {
      if (cfg.env == "grid2d")
        detail_config::parse_grid2d_params(j["env_params"], cfg);
      else
        detail_config::parse_warehouse_params(j["env_params"], cfg);
    }
    if (j.count("tree")) cfg.tree = j["tree"].get<std::string>();
    if (j.count("ordering")) {
      cfg.ordering = j["ordering"].get<std::string>();
      if (cfg.ordering != "backward_chained" &&
          cfg.ordering != "implicit_sequence")
        throw Error("ordering must be 'backward_chained' or"
                    " 'implicit_sequence'");
    }
    if (j.count("rewards"))
      cfg.rewards = j["rewards"].get<std::map<std::string, std::string>>();
    if (j.count("method")) cfg.method = j["method"].get<std::string>();
    if (cfg.method != "cbtrl" && cfg.method != "btrl" &&
        cfg.method != "bt_penalty" && cfg.method != "flat")
      throw Error("method must be one of cbtrl, btrl, bt_penalty, flat");
    if (j.count("train")) detail_config::parse_train(j["train"], cfg.train);
    if (j.count("seed")) cfg.train.seed = j["seed"].get<std::uint64_t>();
    if (j.count("eval_episodes"))
      cfg.eval_episodes = j["eval_episodes"].get<int>();
    if (j.count("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    return cfg;
  } catch (const json::exception& e) {
    throw Error("config file '" + path + "': " + e.what());
  } catch (const Error& e) {
    throw Error("config file '" + path + "': " + e.what());
  }
}

// Builds the environment and task a configuration describes. Custom trees
// default the ordering to the recognized pattern for the env's benchmark.
inline Bench make_bench(const ExperimentConfig& cfg) {
  if (cfg.env == "grid2d") {
    if (cfg.tree.empty() && cfg.rewards.empty())
      return make_grid2d_bench(cfg.grid, cfg.nx, cfg.ny, cfg.nv);
    auto env = std::make_shared<Env2dGrid>(cfg.grid, cfg.nx, cfg.ny, cfg.nv);
    auto pattern = cfg.ordering == "implicit_sequence"
                       ? OrderingPattern::ImplicitSequence
                       : OrderingPattern::BackwardChained;
    Task task = make_task(
        *env, cfg.tree.empty() ? grid2d_tree_text() : cfg.tree, pattern,
        cfg.rewards.empty()
            ? std::map<std::string, std::string>{{"Safety", "safety"},
                                                 {"Goal", "goal"}}
            : cfg.rewards,
        env->start_sampler(), {"safe"}, "at_goal");
    return {env, std::move(task)};
  }
  if (cfg.tree.empty() && cfg.rewards.empty())
    return make_warehouse_bench(cfg.warehouse);
  auto env = std::make_shared<Warehouse>(cfg.warehouse);
  auto pattern = cfg.ordering == "backward_chained"
                     ? OrderingPattern::BackwardChained
                     : OrderingPattern::ImplicitSequence;
  Task task = make_task(
      *env, cfg.tree.empty() ? warehouse_tree_text() : cfg.tree, pattern,
      cfg.rewards.empty()
          ? std::map<std::string, std::string>{{"Move", "move"},
                                               {"Grasp", "grasp"},
                                               {"Place", "place"}}
          : cfg.rewards,
      env->start_sampler(), {"safe", "have_item"});
  return {env, std::move(task)};
}

}  // namespace cbtrl
