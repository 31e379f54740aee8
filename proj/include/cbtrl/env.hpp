#pragma once

#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cbtrl/predicate.hpp"
#include "cbtrl/rng.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

// Deterministic environment contract. Dynamics are pure functions of
// (state, action); episode bookkeeping lives in the rollout loops. Instances
// are immutable and safe to share across workers.
class Env {
 public:
  virtual ~Env() = default;

  virtual int action_count() const = 0;
  virtual int state_dim() const = 0;
  virtual int horizon() const = 0;

  virtual State step(const State& s, ActionId a) const = 0;

  // Whether a state lies inside the environment's valid box.
  virtual bool valid(const State& s) const = 0;

  // Atomic predicate table; BT description files bind against these names.
  virtual const std::map<std::string, Region>& atoms() const = 0;

  // Registered subtask reward functions.
  virtual double reward(const std::string& name, const State& s, ActionId a,
                        const State& next) const = 0;

  // Exhaustive state enumeration (discrete environments only).
  virtual bool enumerable() const { return false; }
  virtual StateId state_count() const {
    throw Error("environment is not enumerable");
  }
  virtual State decode(StateId) const {
    throw Error("environment is not enumerable");
  }
  virtual StateId encode(const State&) const {
    throw Error("environment is not enumerable");
  }

  void check_action(ActionId a) const {
    if (a < 0 || a >= action_count())
      throw Error("action " + std::to_string(a) + " out of range [0, " +
                  std::to_string(action_count()) + ")");
  }

  Region atom(const std::string& name) const {
    auto it = atoms().find(name);
    if (it == atoms().end()) throw Error("unknown predicate name '" + name + "'");
    return it->second;
  }
};

using StateSampler = std::function<State(Rng&)>;

// Draws an initial state and validates it against the environment box.
inline State reset(const Env& env, const StateSampler& sampler, Rng& rng) {
  State s = sampler(rng);
  if (!env.valid(s)) {
    std::ostringstream os;
    os << "initial-state sampler produced an out-of-bounds state (";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
    os << ")";
    throw Error(os.str());
  }
  return s;
}

inline StateSampler fixed_sampler(State s) {
  return [s = std::move(s)](Rng&) { return s; };
}

// Rejection-samples the base distribution until the predicate accepts.
inline StateSampler filtered_sampler(StateSampler base,
                                     std::function<bool(const State&)> keep,
                                     int max_tries = 10000) {
  return [base = std::move(base), keep = std::move(keep),
          max_tries](Rng& rng) {
    for (int i = 0; i < max_tries; ++i) {
      State s = base(rng);
      if (keep(s)) return s;
    }
    throw Error("filtered_sampler: no accepted state within " +
                std::to_string(max_tries) + " draws");
  };
}

// All enumerated states of a discrete environment.
inline std::vector<State> enumerate_states(const Env& env) {
  std::vector<State> out;
  out.reserve(static_cast<size_t>(env.state_count()));
  for (StateId i = 0; i < env.state_count(); ++i) out.push_back(env.decode(i));
  return out;
}

}  // namespace cbtrl
