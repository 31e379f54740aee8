#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cbtrl/eval.hpp"
#include "cbtrl/feasibility.hpp"
#include "cbtrl/mdp.hpp"
#include "cbtrl/rl.hpp"
#include "cbtrl/serialize.hpp"

namespace cbtrl {

struct TrainConfig {
  QUpdateConfig q{0.1, 0.95};
  double epsilon = 0.2;
  long episodes_per_rank = 3000;
  // Fraction of episodes restarting from the task's base distribution; the
  // rest restart uniformly over the rank's reachable operating states for
  // coverage. Ranks the base support misses always restart uniformly.
  double base_restart_fraction = 0.0;
  // Step cap for training rollouts; 0 means the environment's episode
  // horizon. Longer rollouts amortize restarts during training without
  // touching evaluation semantics.
  int train_horizon = 0;
  int eval_every = 0;  // 0 disables periodic greedy evaluation
  int eval_episodes = 20;

  double gamma_feasibility = 0.99;
  double feasibility_tol = 1e-9;
  double margin = 0.0;

  double penalty_lambda = 5.0;  // penalty-baseline constraint weight

  std::uint64_t seed = 0;
  int induce_attempt_cap = 2000;  // episodes, not steps

  // Fitted-estimator path (sampled datasets instead of exact solves).
  bool fitted = false;
  long dataset_transitions = 30000;
  FitConfig fit;
  FeatureFn features;
  int n_features = 0;
};

struct CurvePoint {
  int rank = 0;
  long episode = 0;  // cumulative across ranks
  long steps = 0;    // cumulative environment steps across ranks
  double mean_return = 0.0;
  double std_return = 0.0;
  double success_rate = 0.0;
};

struct RankInfo {
  int rank = 0;
  NodeId leaf = -1;
  std::string controller;
  bool constrained = false;
  // True when masked execution provably never hands control to this rank,
  // so its controller needs no training at all.
  bool skipped = false;
  std::uint64_t dataset_hash = 0;  // fitted path only
  size_t dataset_size = 0;
  // Audited-condition losses observed during this rank's training rollouts.
  std::map<std::string, long> training_violations;
};

struct RunArtifacts {
  BTPolicy policy;
  std::vector<CurvePoint> curve;
  std::vector<RankInfo> ranks;
  long total_steps = 0;  // environment steps spent across all training

  long training_violations(const std::string& atom) const {
    long n = 0;
    for (const auto& r : ranks) {
      auto it = r.training_violations.find(atom);
      if (it != r.training_violations.end()) n += it->second;
    }
    return n;
  }
};

enum class BaselineKind { StandardRL, BTRL, BTPenalty };

// Episode-terminating region: task success or a non-Running tree status.
inline Region terminal_region(const Task& task) {
  auto tree = task.tree;
  auto success = task.success;
  return Region::atom("terminal", [tree, success](const State& s) {
    return success.eval(s) || tree->tick(s).status != ReturnStatus::Running;
  });
}

// Degenerate single-behavior task for the flat baseline: one controller,
// always active, driven by the named environment reward. Success and
// auditing are inherited from the structured task it stands in for.
inline Task make_flat_task(const Task& like, const std::string& reward_name) {
  Task t;
  t.env = like.env;
  t.tree = std::make_shared<BehaviorTree>(
      parse_tree("(act Flat)", like.env->atoms()));
  t.ordering = derive_ordering(*t.tree, OrderingPattern::BackwardChained);
  t.rewards = {{"Flat", reward_name}};
  t.success = like.success;
  t.base_start = like.base_start;
  t.violation_atoms = like.violation_atoms;
  return t;
}

// Runs the tree greedily from the base distribution until control reaches
// the given rank, and returns the state where it does. This is the induced
// initial distribution of a partially trained prefix. Throws with a
// diagnostic if the rank is not reached within the episode cap.
inline State induce_initial_states(const Task& task, const BTPolicy& policy,
                                   int rank, Rng& rng, int attempt_cap,
                                   double epsilon = 0.0) {
  const Env& env = *task.env;
  for (int attempt = 0; attempt < attempt_cap; ++attempt) {
    State s = reset(env, task.base_start, rng);
    for (int t = 0; t < env.horizon(); ++t) {
      if (task.success.eval(s)) break;
      auto tick = task.tree->tick(s);
      if (tick.status != ReturnStatus::Running) break;
      const NodeId leaf = *tick.active_behavior;
      const int r = select_constraint(*task.tree, task.ordering, leaf);
      if (r == rank) return s;
      const auto& controller = policy.controllers.at(task.tree->node(leaf).name);
      std::optional<ActionMask> am;
      if (policy.masked())
        am = hierarchical_mask(policy.estimators, r, s, policy.margin);
      ActionId a;
      if (epsilon > 0.0 && rng.next_double() < epsilon)
        a = static_cast<ActionId>(rng.next_int(env.action_count()));
      else
        a = controller->greedy(s, am ? &*am : nullptr);
      s = env.step(s, a);
    }
  }
  throw Error("could not induce an initial state for rank " +
              std::to_string(rank) + " within " + std::to_string(attempt_cap) +
              " episodes; the trained prefix never hands control to it");
}

namespace detail_pipeline {

struct Prepared {
  EnumeratedMdp mdp;
  std::vector<StateId> base_support;  // sampled base-distribution states
  std::vector<char> reachable;        // forward closure of the base support
  std::vector<Region> convergence;    // per rank
  std::vector<Region> operating;      // per rank
  std::vector<std::vector<StateId>> starts;  // restart states per rank
};

// Forward closure of sampled base states under arbitrary action sequences.
// Training restricts its uniform restarts to this set, so effort is spent
// only on states an episode could ever visit.
inline std::vector<char> reachable_states(const EnumeratedMdp& mdp,
                                          const Env& env,
                                          const StateSampler& base, Rng& rng,
                                          int base_samples,
                                          std::vector<StateId>& support) {
  std::vector<char> seen(static_cast<size_t>(mdp.n_states()), 0);
  std::vector<StateId> frontier;
  for (int i = 0; i < base_samples; ++i) {
    StateId s = env.encode(reset(env, base, rng));
    if (!seen[static_cast<size_t>(s)]) {
      seen[static_cast<size_t>(s)] = 1;
      frontier.push_back(s);
    }
  }
  support = frontier;
  while (!frontier.empty()) {
    StateId s = frontier.back();
    frontier.pop_back();
    if (mdp.terminal[s]) continue;
    for (ActionId a = 0; a < mdp.n_actions; ++a) {
      StateId n = mdp.next(s, a);
      if (!seen[static_cast<size_t>(n)]) {
        seen[static_cast<size_t>(n)] = 1;
        frontier.push_back(n);
      }
    }
  }
  return seen;
}

inline Prepared prepare(const Task& task, Rng& rng, int base_samples = 256) {
  const Env& env = *task.env;
  if (!env.enumerable())
    throw Error("training requires an enumerable environment");
  Prepared p;
  p.mdp = build_mdp(env, terminal_region(task));
  p.reachable = reachable_states(p.mdp, env, task.base_start, rng,
                                 base_samples, p.base_support);
  const int m = task.n_ranks();
  for (int j = 1; j <= m; ++j) {
    p.convergence.push_back(
        convergence_set(*task.tree, task.ordering, j));
    p.operating.push_back(operating_region(
        *task.tree, task.ordering.leaves[static_cast<size_t>(j - 1)]));
    std::vector<StateId> starts;
    for (StateId s = 0; s < p.mdp.n_states(); ++s)
      if (p.reachable[static_cast<size_t>(s)] && !p.mdp.terminal[s] &&
          p.operating.back().eval(p.mdp.states[s]))
        starts.push_back(s);
    p.starts.push_back(std::move(starts));
  }
  return p;
}

inline std::map<std::string, std::shared_ptr<QTableController>>
make_controllers(const Task& task, double q_init) {
  std::map<std::string, std::shared_ptr<QTableController>> out;
  const Env& env = *task.env;
  auto encoder = [&env](const State& s) { return env.encode(s); };
  for (NodeId leaf : task.ordering.leaves) {
    const auto& name = task.tree->node(leaf).name;
    if (!out.count(name))
      out[name] = std::make_shared<QTableController>(
          name, env.state_count(), env.action_count(), encoder, q_init);
  }
  return out;
}

// Uniform-random-action rollouts from induced rank entry states; the raw
// material for a fitted feasibility solve.
inline std::vector<TransitionRecord> collect_dataset(
    const Task& task, const BTPolicy& policy, int rank, long transitions,
    Rng& rng, int attempt_cap, double epsilon) {
  const Env& env = *task.env;
  auto terminal = terminal_region(task);
  std::vector<TransitionRecord> data;
  data.reserve(static_cast<size_t>(transitions));
  while (static_cast<long>(data.size()) < transitions) {
    State s = induce_initial_states(task, policy, rank, rng, attempt_cap,
                                    epsilon);
    for (int t = 0; t < env.horizon() &&
                    static_cast<long>(data.size()) < transitions;
         ++t) {
      TransitionRecord rec;
      rec.state = s;
      rec.action = static_cast<ActionId>(rng.next_int(env.action_count()));
      rec.next_state = env.step(s, rec.action);
      rec.terminated = terminal.eval(rec.next_state);
      data.push_back(rec);
      if (rec.terminated) break;
      s = data.back().next_state;
    }
  }
  return data;
}

// Q-learning over episode segments confined to the rank's operating region.
// Leaving the region terminates the segment with a zero bootstrap, but not
// the episode: already-trained ranks play out their recovery greedily (those
// environment steps are real and count), and control may return for another
// segment. Only reaching a rank with no trained controller, a terminal
// state, or the horizon ends the episode. When an estimator is given both
// the behavior policy and the TD target range over its admissible set.
inline void train_rank(const Task& task, const TrainConfig& cfg,
                       const Prepared& prep, RunArtifacts& art, int rank,
                       const std::vector<char>& trained, long& episode_counter,
                       Rng& rng, const RewardFn& reward, RankInfo& info) {
  const Env& env = *task.env;
  const int j = rank;
  std::vector<StateId> starts = prep.starts[static_cast<size_t>(j - 1)];
  const bool masked = art.policy.masked();
  const auto& estimator =
      masked ? art.policy.estimators[static_cast<size_t>(j - 1)] : nullptr;
  if (estimator) {
    // Restart only from feasible states: from an infeasible start no policy
    // can keep the progress constraint, so effort there is wasted and any
    // violation would be the start's fault, not the controller's.
    std::vector<StateId> feasible;
    for (StateId s : starts)
      if (!mask(*estimator, env.decode(s), cfg.margin).empty())
        feasible.push_back(s);
    if (!feasible.empty()) starts = std::move(feasible);
  }
  if (starts.empty()) return;
  std::vector<StateId> base_starts;
  for (StateId s : prep.base_support)
    if (!prep.mdp.terminal[s] &&
        prep.operating[static_cast<size_t>(j - 1)].eval(env.decode(s)))
      base_starts.push_back(s);
  auto& controller =
      *art.policy.controllers.at(task.controller_name(j));
  auto rank_of_state = [&](const State& s) -> int {
    auto tick = task.tree->tick(s);
    if (tick.status != ReturnStatus::Running || task.success.eval(s)) return -1;
    return select_constraint(*task.tree, task.ordering, *tick.active_behavior);
  };
  std::vector<std::pair<std::string, Region>> audited;
  for (const auto& atom : task.violation_atoms)
    audited.emplace_back(atom, env.atom(atom));

  for (long ep = 0; ep < cfg.episodes_per_rank; ++ep, ++episode_counter) {
    const auto& pool = (!base_starts.empty() &&
                        rng.next_double() < cfg.base_restart_fraction)
                           ? base_starts
                           : starts;
    State s = env.decode(
        pool[static_cast<size_t>(rng.next_int(static_cast<int>(pool.size())))]);
    const int cap = cfg.train_horizon > 0 ? cfg.train_horizon : env.horizon();
    for (int t = 0; t < cap; ++t) {
      const int r_s = rank_of_state(s);
      if (r_s < 0) break;
      if (r_s != j && !trained[static_cast<size_t>(r_s)]) break;
      std::optional<ActionMask> am;
      if (masked)
        am = hierarchical_mask(art.policy.estimators, r_s, s, cfg.margin);
      ActionId a;
      if (r_s == j) {
        a = controller.act(s, rng, cfg.epsilon, am ? &*am : nullptr);
      } else {
        a = art.policy.controllers.at(task.controller_name(r_s))
                ->greedy(s, am ? &*am : nullptr);
      }
      State next = env.step(s, a);
      ++art.total_steps;
      if (!task.success.eval(next))
        for (const auto& [name, region] : audited)
          if (region.eval(s) && !region.eval(next))
            ++info.training_violations[name];
      if (r_s == j) {
        const double r = reward(s, a, next);
        const bool segment_end = rank_of_state(next) != j;
        std::optional<ActionMask> am_next;
        if (masked && !segment_end)
          am_next =
              hierarchical_mask(art.policy.estimators, j, next, cfg.margin);
        controller.update(s, a, r, next, segment_end, cfg.q,
                          am_next ? &*am_next : nullptr);
      }
      s = std::move(next);
    }
    if (cfg.eval_every > 0 && (ep + 1) % cfg.eval_every == 0) {
      auto report = evaluate(task, art.policy, cfg.eval_episodes,
                             cfg.seed ^ 0x9e3779b97f4a7c15ull ^
                                 static_cast<std::uint64_t>(episode_counter));
      art.curve.push_back({j, episode_counter + 1, art.total_steps,
                           report.mean_return(), report.std_return(),
                           report.success_rate()});
    }
  }
}

}  // namespace detail_pipeline

// Rank-by-rank training with feasibility masking: for each rank, solve (or
// fit) the feasibility estimate of its convergence set, then train its
// controller inside its operating region under the resulting action mask.
// Ranks whose convergence set covers the whole space get no estimator.
inline RunArtifacts run_cbtrl(const Task& task, const TrainConfig& cfg) {
  const Env& env = *task.env;
  Rng rng(cfg.seed);
  auto prep = detail_pipeline::prepare(task, rng);
  const int m = task.n_ranks();

  RunArtifacts art;
  art.policy.controllers = detail_pipeline::make_controllers(task, cfg.q.init);
  art.policy.estimators.assign(static_cast<size_t>(m), nullptr);
  art.policy.margin = cfg.margin;
  long episode_counter = 0;
  auto encoder = [&env](const State& s) { return env.encode(s); };

  // Feasibility estimators depend only on the tree and the dynamics, so
  // every rank's estimator is solved before any controller trains and the
  // full mask hierarchy is available from the first rollout on.
  std::vector<RankInfo> infos;
  for (int j = 1; j <= m; ++j) {
    RankInfo info;
    info.rank = j;
    info.leaf = task.ordering.leaves[static_cast<size_t>(j - 1)];
    info.controller = task.controller_name(j);

    const Region& c = prep.convergence[static_cast<size_t>(j - 1)];
    bool covers_everything = true;
    for (const auto& s : prep.mdp.states)
      if (!c.eval(s)) {
        covers_everything = false;
        break;
      }
    info.constrained = !covers_everything;

    if (info.constrained) {
      if (cfg.fitted) {
        if (!cfg.features || cfg.n_features <= 0)
          throw Error("fitted path needs a feature map in the train config");
        auto data = detail_pipeline::collect_dataset(
            task, art.policy, j, cfg.dataset_transitions, rng,
            cfg.induce_attempt_cap, cfg.epsilon);
        info.dataset_hash = hash_dataset(data);
        info.dataset_size = data.size();
        FitConfig fit_cfg = cfg.fit;
        fit_cfg.seed = rng.next_u64();
        auto fitted = fit(data, make_label(c), cfg.gamma_feasibility, fit_cfg,
                          env.action_count(), cfg.n_features, cfg.features,
                          "C" + std::to_string(j));
        art.policy.estimators[static_cast<size_t>(j - 1)] = fitted.estimator;
      } else {
        art.policy.estimators[static_cast<size_t>(j - 1)] =
            std::make_shared<TabularEstimator>(solve_tabular(
                prep.mdp, make_label(c), cfg.gamma_feasibility,
                cfg.feasibility_tol, encoder, "C" + std::to_string(j)));
      }
    }
    infos.push_back(std::move(info));
  }

  // Closure of the base support under mask-admissible actions. Ranks whose
  // operating region this closure never touches are marked skipped: masked
  // execution cannot hand control to them, so training their controllers
  // would spend environment steps a deployment never repays.
  {
    std::vector<char> seen(static_cast<size_t>(prep.mdp.n_states()), 0);
    std::vector<StateId> frontier;
    for (StateId s : prep.base_support)
      if (!seen[static_cast<size_t>(s)]) {
        seen[static_cast<size_t>(s)] = 1;
        frontier.push_back(s);
      }
    std::vector<char> active(static_cast<size_t>(m) + 1, 0);
    while (!frontier.empty()) {
      StateId sid = frontier.back();
      frontier.pop_back();
      if (prep.mdp.terminal[sid]) continue;
      const State& s = prep.mdp.states[sid];
      auto tick = task.tree->tick(s);
      if (tick.status != ReturnStatus::Running) continue;
      const int r = select_constraint(*task.tree, task.ordering,
                                      *tick.active_behavior);
      active[static_cast<size_t>(r)] = 1;
      auto am = hierarchical_mask(art.policy.estimators, r, s, cfg.margin);
      for (ActionId a = 0; a < prep.mdp.n_actions; ++a) {
        if (am && (am->empty() ? a != am->fallback : !am->allows(a))) continue;
        StateId n = prep.mdp.next(sid, a);
        if (!seen[static_cast<size_t>(n)]) {
          seen[static_cast<size_t>(n)] = 1;
          frontier.push_back(n);
        }
      }
    }
    for (auto& info : infos)
      info.skipped = !active[static_cast<size_t>(info.rank)];
  }

  std::vector<char> trained(static_cast<size_t>(m) + 1, 0);
  for (int j = 1; j <= m; ++j) {
    RankInfo& info = infos[static_cast<size_t>(j - 1)];
    if (!info.skipped) {
      auto reward = env_reward_fn(env, task.rewards.at(info.controller));
      detail_pipeline::train_rank(task, cfg, prep, art, j, trained,
                                  episode_counter, rng, reward, info);
      trained[static_cast<size_t>(j)] = 1;
    }
    art.ranks.push_back(std::move(info));
  }
  return art;
}

// Same training loops without feasibility masking. BTPenalty additionally
// subtracts lambda whenever a transition leaves the rank's convergence set;
// StandardRL collapses the tree to a single always-active controller on the
// environment's "flat" reward.
inline RunArtifacts run_baseline(const Task& task, const TrainConfig& cfg,
                                 BaselineKind kind) {
  if (kind == BaselineKind::StandardRL) {
    Task flat = make_flat_task(task, "flat");
    return run_baseline(flat, cfg, BaselineKind::BTRL);
  }
  const Env& env = *task.env;
  Rng rng(cfg.seed);
  auto prep = detail_pipeline::prepare(task, rng);
  const int m = task.n_ranks();

  RunArtifacts art;
  art.policy.controllers = detail_pipeline::make_controllers(task, cfg.q.init);
  art.policy.margin = cfg.margin;  // estimators stay empty: no masking
  long episode_counter = 0;
  std::vector<char> trained(static_cast<size_t>(m) + 1, 0);
  for (int j = 1; j <= m; ++j) {
    RankInfo info;
    info.rank = j;
    info.leaf = task.ordering.leaves[static_cast<size_t>(j - 1)];
    info.controller = task.controller_name(j);

    auto reward = env_reward_fn(env, task.rewards.at(info.controller));
    if (kind == BaselineKind::BTPenalty)
      reward = wrap_penalty(std::move(reward),
                            prep.convergence[static_cast<size_t>(j - 1)],
                            cfg.penalty_lambda);
    detail_pipeline::train_rank(task, cfg, prep, art, j, trained,
                                episode_counter, rng, reward, info);
    trained[static_cast<size_t>(j)] = 1;
    art.ranks.push_back(std::move(info));
  }
  return art;
}

// Attaches feasibility estimators to an already trained (unmasked) policy,
// so its greedy actions are filtered at execution time only.
inline RunArtifacts apply_posthoc_mask(
    RunArtifacts base,
    std::vector<std::shared_ptr<FeasibilityEstimator>> estimators,
    double margin = 0.0) {
  base.policy.estimators = std::move(estimators);
  base.policy.margin = margin;
  return base;
}

// The per-rank estimators of a CBTRL run, reusable for post-hoc masking.
inline std::vector<std::shared_ptr<FeasibilityEstimator>> estimators_of(
    const RunArtifacts& art) {
  return art.policy.estimators;
}

}  // namespace cbtrl
