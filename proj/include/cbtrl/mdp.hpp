#pragma once

#include <string>
#include <vector>

#include "cbtrl/env.hpp"
#include "cbtrl/predicate.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

// Dense deterministic MDP over an exhaustive state enumeration. Terminal
// states self-loop, which makes them absorbing for every solver downstream.
struct EnumeratedMdp {
  int n_actions = 0;
  std::vector<State> states;
  std::vector<StateId> succ;  // [s * n_actions + a]
  std::vector<char> terminal;

  StateId n_states() const { return static_cast<StateId>(states.size()); }
  StateId next(StateId s, ActionId a) const {
    return succ[static_cast<size_t>(s) * n_actions + a];
  }
};

// Builds the dense MDP from an enumerable environment. States in the
// terminal region self-loop.
inline EnumeratedMdp build_mdp(const Env& env, const Region& terminal) {
  if (!env.enumerable()) throw Error("build_mdp requires an enumerable env");
  EnumeratedMdp mdp;
  mdp.n_actions = env.action_count();
  mdp.states = enumerate_states(env);
  const StateId n = static_cast<StateId>(mdp.states.size());
  mdp.succ.resize(static_cast<size_t>(n) * mdp.n_actions);
  mdp.terminal.resize(n);
  for (StateId s = 0; s < n; ++s) {
    mdp.terminal[s] = terminal.eval(mdp.states[s]) ? 1 : 0;
    for (ActionId a = 0; a < mdp.n_actions; ++a) {
      StateId nx = mdp.terminal[s] ? s : env.encode(env.step(mdp.states[s], a));
      mdp.succ[static_cast<size_t>(s) * mdp.n_actions + a] = nx;
    }
  }
  return mdp;
}

// Per-state bitset from a region predicate.
inline std::vector<char> materialize(const Region& region,
                                     const EnumeratedMdp& mdp) {
  return region.materialize(mdp.states);
}

// +-1 labels over the enumeration.
inline std::vector<double> materialize_labels(const Region& constraint,
                                              const EnumeratedMdp& mdp) {
  std::vector<double> l(mdp.states.size());
  for (size_t s = 0; s < mdp.states.size(); ++s)
    l[s] = constraint.eval(mdp.states[s]) ? 1.0 : -1.0;
  return l;
}

// Dense reward table for a named subtask reward.
inline std::vector<double> materialize_rewards(const Env& env,
                                               const std::string& name,
                                               const EnumeratedMdp& mdp) {
  std::vector<double> r(mdp.states.size() * mdp.n_actions, 0.0);
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.terminal[s]) continue;
    for (ActionId a = 0; a < mdp.n_actions; ++a) {
      StateId nx = mdp.next(s, a);
      r[static_cast<size_t>(s) * mdp.n_actions + a] =
          env.reward(name, mdp.states[s], a, mdp.states[nx]);
    }
  }
  return r;
}

}  // namespace cbtrl
