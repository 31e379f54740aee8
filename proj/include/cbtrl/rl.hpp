#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cbtrl/env.hpp"
#include "cbtrl/feasibility.hpp"
#include "cbtrl/rng.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

using RewardFn = std::function<double(const State&, ActionId, const State&)>;

inline RewardFn env_reward_fn(const Env& env, std::string name) {
  return [&env, name = std::move(name)](const State& s, ActionId a,
                                        const State& next) {
    return env.reward(name, s, a, next);
  };
}

// Subtracts lambda whenever the successor state violates the condition.
// Baselines that fold constraints into the reward are built from this.
inline RewardFn wrap_penalty(RewardFn base, Region condition, double lambda) {
  return [base = std::move(base), condition = std::move(condition),
          lambda](const State& s, ActionId a, const State& next) {
    return base(s, a, next) - (condition.eval(next) ? 0.0 : lambda);
  };
}

// Greedy action source shared by training and evaluation. A null mask means
// every action is admissible; an empty mask falls back to its argmax action.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual int action_count() const = 0;
  virtual ActionId greedy(const State& s,
                          const ActionMask* m = nullptr) const = 0;
};

struct QUpdateConfig {
  double alpha = 0.1;
  double gamma = 0.95;
  // Initial Q value for every entry. Rewards that are negative everywhere
  // need a pessimistic value here: with zero init every unvisited action
  // looks better than any visited one, and an unvisited self-loop action
  // freezes the greedy policy in place.
  double init = 0.0;
};

class QTableController : public Policy {
 public:
  using Encoder = std::function<StateId(const State&)>;

  QTableController(std::string name, StateId n_states, int n_actions,
                   Encoder encoder, double q_init = 0.0)
      : name_(std::move(name)),
        n_states_(n_states),
        n_actions_(n_actions),
        q_(static_cast<size_t>(n_states) * n_actions, q_init),
        encoder_(std::move(encoder)) {}

  const std::string& name() const { return name_; }
  int action_count() const override { return n_actions_; }
  StateId n_states() const { return n_states_; }

  double q(StateId s, ActionId a) const {
    return q_[static_cast<size_t>(s) * n_actions_ + a];
  }
  std::vector<double> q_values(const State& s) const {
    auto base = q_.begin() + static_cast<size_t>(encoder_(s)) * n_actions_;
    return std::vector<double>(base, base + n_actions_);
  }

  // Argmax over admissible actions, lowest index on ties.
  ActionId greedy(const State& s, const ActionMask* m = nullptr) const override {
    if (m && m->empty()) return m->fallback;
    auto q = q_values(s);
    ActionId best = -1;
    double best_q = -std::numeric_limits<double>::infinity();
    for (ActionId a = 0; a < n_actions_; ++a) {
      if (m && !m->allows(a)) continue;
      if (q[a] > best_q) {
        best_q = q[a];
        best = a;
      }
    }
    return best;
  }

  // Epsilon-greedy over the admissible set; exploration never leaves it.
  ActionId act(const State& s, Rng& rng, double epsilon,
               const ActionMask* m = nullptr) const {
    if (m && m->empty()) return m->fallback;
    if (rng.next_double() < epsilon) {
      if (!m) return static_cast<ActionId>(rng.next_int(n_actions_));
      std::vector<ActionId> admissible;
      for (ActionId a = 0; a < n_actions_; ++a)
        if (m->allows(a)) admissible.push_back(a);
      return admissible[static_cast<size_t>(
          rng.next_int(static_cast<int>(admissible.size())))];
    }
    return greedy(s, m);
  }

  // One-step Q-learning update. The bootstrap max ranges over the successor
  // mask when given, so masked training never values forbidden continuations.
  // Returns the TD error.
  double update(const State& s, ActionId a, double reward, const State& next,
                bool terminated, const QUpdateConfig& cfg,
                const ActionMask* mask_next = nullptr) {
    double target = reward;
    if (!terminated) {
      double best = -std::numeric_limits<double>::infinity();
      auto qn = q_values(next);
      for (ActionId an = 0; an < n_actions_; ++an) {
        if (mask_next && !mask_next->empty() && !mask_next->allows(an))
          continue;
        best = std::max(best, qn[an]);
      }
      target += cfg.gamma * best;
    }
    double& cell = q_[static_cast<size_t>(encoder_(s)) * n_actions_ + a];
    const double td = target - cell;
    cell += cfg.alpha * td;
    return td;
  }

  std::vector<double>& table() { return q_; }
  const std::vector<double>& table() const { return q_; }
  const Encoder& encoder() const { return encoder_; }

 private:
  std::string name_;
  StateId n_states_;
  int n_actions_;
  std::vector<double> q_;
  Encoder encoder_;
};

}  // namespace cbtrl
