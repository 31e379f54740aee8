#pragma once

// Brute-force references used only by tests and acceptance runs. These are
// deliberately implemented with different iteration schemes than the solvers
// they cross-check (see feasibility.hpp).

#include <algorithm>
#include <cmath>
#include <vector>

#include "cbtrl/mdp.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl::oracle {

// Greatest fixed point: repeatedly remove states from which every action
// leads outside the current set or into the failure set. Returns the set of
// states from which failure is avoidable forever.
inline std::vector<char> viability_kernel(const EnumeratedMdp& mdp,
                                          const std::vector<char>& failure) {
  std::vector<char> in(mdp.states.size());
  for (size_t s = 0; s < in.size(); ++s) in[s] = failure[s] ? 0 : 1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (StateId s = 0; s < mdp.n_states(); ++s) {
      if (!in[s]) continue;
      bool escapable = false;
      for (ActionId a = 0; a < mdp.n_actions && !escapable; ++a)
        escapable = in[mdp.next(s, a)] != 0;
      if (!escapable) {
        in[s] = 0;
        changed = true;
      }
    }
  }
  return in;
}

struct ValueIterationResult {
  std::vector<double> value;
  std::vector<ActionId> policy;  // greedy, lowest-index tie-break
};

// Standard Bellman-optimality iteration to sup-norm tolerance. Terminal
// states have value 0; rewards are earned on the transition into them.
inline ValueIterationResult exact_value_iteration(
    const EnumeratedMdp& mdp, const std::vector<double>& reward, double gamma,
    double tol, int max_iter = 1000000) {
  const StateId n = mdp.n_states();
  std::vector<double> v(n, 0.0), v_next(n, 0.0);
  for (int it = 0; it < max_iter; ++it) {
    double residual = 0.0;
    for (StateId s = 0; s < n; ++s) {
      if (mdp.terminal[s]) {
        v_next[s] = 0.0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (ActionId a = 0; a < mdp.n_actions; ++a) {
        double q = reward[static_cast<size_t>(s) * mdp.n_actions + a] +
                   gamma * v[mdp.next(s, a)];
        best = std::max(best, q);
      }
      v_next[s] = best;
      residual = std::max(residual, std::fabs(best - v[s]));
    }
    v.swap(v_next);
    if (residual < tol) break;
  }
  ValueIterationResult out;
  out.value = v;
  out.policy.assign(n, 0);
  for (StateId s = 0; s < n; ++s) {
    if (mdp.terminal[s]) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (ActionId a = 0; a < mdp.n_actions; ++a) {
      double q = reward[static_cast<size_t>(s) * mdp.n_actions + a] +
                 gamma * v[mdp.next(s, a)];
      if (q > best) {
        best = q;
        out.policy[s] = a;
      }
    }
  }
  return out;
}

// Discounted reach-avoid fixed point, state-value form, solved with in-place
// Gauss-Seidel sweeps in reverse state order. Cross-checks the Q-table
// Jacobi solver in the feasibility module without sharing code with it.
inline std::vector<double> feasibility_fixed_point(const EnumeratedMdp& mdp,
                                                   const std::vector<double>& label,
                                                   double gamma, double tol,
                                                   int max_iter = 1000000) {
  const StateId n = mdp.n_states();
  std::vector<double> v(label);  // start from the labels
  for (int it = 0; it < max_iter; ++it) {
    double residual = 0.0;
    for (StateId s = n - 1; s >= 0; --s) {
      double updated;
      if (mdp.terminal[s]) {
        updated = label[s];
      } else {
        double best = -std::numeric_limits<double>::infinity();
        for (ActionId a = 0; a < mdp.n_actions; ++a)
          best = std::max(best, v[mdp.next(s, a)]);
        updated = (1.0 - gamma) * label[s] +
                  gamma * std::min(label[s], best);
      }
      residual = std::max(residual, std::fabs(updated - v[s]));
      v[s] = updated;
    }
    if (residual < tol) return v;
  }
  throw Error("feasibility_fixed_point did not converge");
}

}  // namespace cbtrl::oracle
