#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cbtrl/env.hpp"
#include "cbtrl/feasibility.hpp"
#include "cbtrl/regions.hpp"
#include "cbtrl/rl.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

// A task binds an environment to a behavior tree, the controllers' reward
// functions, an initial-state distribution and the episode-ending success
// region. The flat baseline uses the degenerate one-leaf tree "(act ...)".
struct Task {
  const Env* env = nullptr;
  std::shared_ptr<BehaviorTree> tree;
  LeafOrdering ordering;
  std::map<std::string, std::string> rewards;  // controller name -> env reward
  Region success = Region::never();            // episode success
  StateSampler base_start;
  std::vector<std::string> violation_atoms;    // conditions audited in eval

  int n_ranks() const { return static_cast<int>(ordering.leaves.size()); }
  const std::string& controller_name(int rank) const {
    return tree->node(ordering.leaves[static_cast<size_t>(rank - 1)]).name;
  }
};

// success_atom "" takes the success region of the tree root (trees whose
// root can return Success); otherwise the named predicate ends the episode.
inline Task make_task(const Env& env, const std::string& tree_text,
                      OrderingPattern pattern,
                      std::map<std::string, std::string> rewards,
                      StateSampler base_start,
                      std::vector<std::string> violation_atoms,
                      const std::string& success_atom = "") {
  Task t;
  t.env = &env;
  t.tree = std::make_shared<BehaviorTree>(parse_tree(tree_text, env.atoms()));
  t.ordering = derive_ordering(*t.tree, pattern);
  t.rewards = std::move(rewards);
  t.success = success_atom.empty() ? success_region(t.tree->root())
                                   : env.atom(success_atom);
  t.base_start = std::move(base_start);
  t.violation_atoms = std::move(violation_atoms);
  for (NodeId leaf : t.ordering.leaves)
    if (!t.rewards.count(t.tree->node(leaf).name))
      throw Error("no reward registered for controller '" +
                  t.tree->node(leaf).name + "'");
  return t;
}

// Everything needed to run the tree closed-loop: trained controllers plus,
// optionally, one feasibility estimator per rank (null entries mean the
// rank is unconstrained).
struct BTPolicy {
  std::map<std::string, std::shared_ptr<QTableController>> controllers;
  std::vector<std::shared_ptr<FeasibilityEstimator>> estimators;
  double margin = 0.0;

  bool masked() const { return !estimators.empty(); }
};

enum class Outcome { Success, Failure, Timeout };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Failure: return "failure";
    default: return "timeout";
  }
}

struct EpisodeMetrics {
  Outcome outcome = Outcome::Timeout;
  double ret = 0.0;  // sum of the active controller's reward along the run
  int steps = 0;
  int switches = 0;  // active-leaf changes
  std::map<std::string, int> violations;  // per audited condition
  std::map<std::string, int> dwell;       // steps spent inside each condition
};

struct EvalReport {
  std::vector<EpisodeMetrics> episodes;

  double success_rate() const {
    if (episodes.empty()) return 0.0;
    double n = 0;
    for (const auto& e : episodes)
      if (e.outcome == Outcome::Success) n += 1;
    return n / episodes.size();
  }
  double mean_return() const {
    if (episodes.empty()) return 0.0;
    double acc = 0;
    for (const auto& e : episodes) acc += e.ret;
    return acc / episodes.size();
  }
  double std_return() const {
    if (episodes.size() < 2) return 0.0;
    double mu = mean_return(), acc = 0;
    for (const auto& e : episodes) acc += (e.ret - mu) * (e.ret - mu);
    return std::sqrt(acc / episodes.size());
  }
  double mean_steps() const {
    if (episodes.empty()) return 0.0;
    double acc = 0;
    for (const auto& e : episodes) acc += e.steps;
    return acc / episodes.size();
  }
  double mean_switches() const {
    if (episodes.empty()) return 0.0;
    double acc = 0;
    for (const auto& e : episodes) acc += e.switches;
    return acc / episodes.size();
  }
  int total_violations(const std::string& atom) const {
    int n = 0;
    for (const auto& e : episodes) {
      auto it = e.violations.find(atom);
      if (it != e.violations.end()) n += it->second;
    }
    return n;
  }
  // Episodes with at least one violation of the condition; a "% of episodes"
  // figure counts each episode once however many violations it had.
  int episodes_with_violation(const std::string& atom) const {
    int n = 0;
    for (const auto& e : episodes) {
      auto it = e.violations.find(atom);
      if (it != e.violations.end() && it->second > 0) ++n;
    }
    return n;
  }
};

// One greedy closed-loop episode. Records the visited states when a
// trajectory sink is supplied.
inline EpisodeMetrics run_episode(const Task& task, const BTPolicy& policy,
                                  Rng& rng,
                                  std::vector<State>* trajectory = nullptr) {
  const Env& env = *task.env;
  EpisodeMetrics m;
  for (const auto& atom : task.violation_atoms) {
    m.violations[atom] = 0;
    m.dwell[atom] = 0;
  }
  State s = reset(env, task.base_start, rng);
  if (trajectory) trajectory->push_back(s);
  NodeId prev_leaf = -1;
  for (int t = 0; t < env.horizon(); ++t) {
    if (task.success.eval(s)) {
      m.outcome = Outcome::Success;
      return m;
    }
    auto tick = task.tree->tick(s);
    if (tick.status == ReturnStatus::Success) {
      m.outcome = Outcome::Success;
      return m;
    }
    if (tick.status == ReturnStatus::Failure) {
      m.outcome = Outcome::Failure;
      return m;
    }
    const NodeId leaf = *tick.active_behavior;
    if (prev_leaf >= 0 && leaf != prev_leaf) ++m.switches;
    prev_leaf = leaf;
    const int rank = select_constraint(*task.tree, task.ordering, leaf);
    const auto& controller =
        policy.controllers.at(task.tree->node(leaf).name);

    std::optional<ActionMask> am;
    if (policy.masked())
      am = hierarchical_mask(policy.estimators, rank, s, policy.margin);
    const ActionId a = controller->greedy(s, am ? &*am : nullptr);
    State next = env.step(s, a);
    m.ret += env.reward(task.rewards.at(task.tree->node(leaf).name), s, a, next);
    ++m.steps;
    for (const auto& atom : task.violation_atoms)
      if (env.atom(atom).eval(s)) ++m.dwell[atom];
    // conditions released by reaching the success region are not violations
    // (placing an object ends the carry on purpose)
    if (!task.success.eval(next)) {
      for (const auto& atom : task.violation_atoms) {
        const Region r = env.atom(atom);
        if (r.eval(s) && !r.eval(next)) ++m.violations[atom];
      }
    }
    s = std::move(next);
    if (trajectory) trajectory->push_back(s);
  }
  m.outcome = Outcome::Timeout;
  return m;
}

// Greedy evaluation over independently seeded episodes.
inline EvalReport evaluate(const Task& task, const BTPolicy& policy,
                           int episodes, std::uint64_t seed) {
  EvalReport report;
  Rng master(seed);
  for (int i = 0; i < episodes; ++i) {
    Rng rng = master.split(static_cast<std::uint64_t>(i));
    report.episodes.push_back(run_episode(task, policy, rng));
  }
  return report;
}

}  // namespace cbtrl
