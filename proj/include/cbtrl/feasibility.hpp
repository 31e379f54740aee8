#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cbtrl/mdp.hpp"
#include "cbtrl/predicate.hpp"
#include "cbtrl/regions.hpp"
#include "cbtrl/rng.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

// +1 inside the constraint set, -1 outside. The +-1 codomain keeps the
// zero threshold of the action mask meaningful.
struct LabelFunction {
  Region region;
  double operator()(const State& s) const { return region.eval(s) ? 1.0 : -1.0; }
};

inline LabelFunction make_label(Region constraint) {
  return LabelFunction{std::move(constraint)};
}

// Mapping (state, action) -> feasibility value in [-1, 1].
class FeasibilityEstimator {
 public:
  virtual ~FeasibilityEstimator() = default;
  virtual int action_count() const = 0;
  virtual double gamma() const = 0;
  virtual const std::string& constraint_name() const = 0;
  virtual std::vector<double> q_values(const State& s) const = 0;

  double value(const State& s) const {
    auto q = q_values(s);
    return *std::max_element(q.begin(), q.end());
  }
};

struct ActionMask {
  std::vector<char> allowed;
  ActionId fallback = 0;  // argmax Q, for use when the mask is empty

  bool empty() const {
    return std::none_of(allowed.begin(), allowed.end(),
                        [](char c) { return c != 0; });
  }
  bool allows(ActionId a) const { return allowed[a] != 0; }
};

// Allowed set {u : Q(s,u) >= margin}. margin > 0 adds conservatism;
// default threshold is exactly 0.
inline ActionMask mask(const FeasibilityEstimator& est, const State& s,
                       double margin = 0.0) {
  auto q = est.q_values(s);
  ActionMask m;
  m.allowed.resize(q.size());
  double best = -std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < q.size(); ++a) {
    m.allowed[a] = q[a] >= margin ? 1 : 0;
    if (q[a] > best) {
      best = q[a];
      m.fallback = static_cast<ActionId>(a);
    }
  }
  return m;
}

// Mask for the active rank, degrading along the nested constraint chain:
// when no action can maintain C_rank, fall back to the largest lower-rank
// constraint that is still maintainable (C_1 last, typically plain safety).
// Only if every level is infeasible does the argmax fallback remain. Null
// estimator entries are unconstrained ranks and terminate the descent.
inline std::optional<ActionMask> hierarchical_mask(
    const std::vector<std::shared_ptr<FeasibilityEstimator>>& estimators,
    int rank, const State& s, double margin = 0.0) {
  std::optional<ActionMask> active;
  for (int j = rank; j >= 1; --j) {
    const auto& est = estimators[static_cast<size_t>(j - 1)];
    if (!est) return std::nullopt;  // trivially satisfiable: no restriction
    ActionMask m = mask(*est, s, margin);
    if (j == rank) active = m;
    if (!m.empty()) return m;
  }
  return active;  // every level infeasible: the rank's argmax fallback
}

// Rank of the active operating region. A controller shared across several
// behavior nodes masks with the constraint of the node that invoked it.
inline int select_constraint(const BehaviorTree& tree,
                             const LeafOrdering& ordering,
                             NodeId active_behavior) {
  const BTNode& n = tree.node(active_behavior);
  if (n.kind != NodeKind::Behavior)
    throw Error("node " + std::to_string(active_behavior) +
                " is not a behavior leaf");
  return ordering.rank_of(active_behavior);
}

// ---------------------------------------------------------------------------
// Tabular estimator: exact solution of the discounted reach-avoid Bellman
// equation over an enumerated MDP.
// ---------------------------------------------------------------------------

class TabularEstimator : public FeasibilityEstimator {
 public:
  using Encoder = std::function<StateId(const State&)>;

  TabularEstimator(std::string constraint, double gamma, StateId n_states,
                   int n_actions, Encoder encoder)
      : name_(std::move(constraint)),
        gamma_(gamma),
        n_states_(n_states),
        n_actions_(n_actions),
        q_(static_cast<size_t>(n_states) * n_actions, 0.0),
        encoder_(std::move(encoder)) {}

  int action_count() const override { return n_actions_; }
  double gamma() const override { return gamma_; }
  const std::string& constraint_name() const override { return name_; }

  std::vector<double> q_values(const State& s) const override {
    return q_row(encoder_(s));
  }

  std::vector<double> q_row(StateId s) const {
    auto begin = q_.begin() + static_cast<size_t>(s) * n_actions_;
    return std::vector<double>(begin, begin + n_actions_);
  }

  double q(StateId s, ActionId a) const {
    return q_[static_cast<size_t>(s) * n_actions_ + a];
  }
  double value_at(StateId s) const {
    auto row = q_row(s);
    return *std::max_element(row.begin(), row.end());
  }

  StateId n_states() const { return n_states_; }
  std::vector<double>& table() { return q_; }
  const std::vector<double>& table() const { return q_; }
  void set_encoder(Encoder e) { encoder_ = std::move(e); }

 private:
  std::string name_;
  double gamma_;
  StateId n_states_;
  int n_actions_;
  std::vector<double> q_;
  Encoder encoder_;
};

// Iterates Q <- (1-gamma) l(s) + gamma min(l(s), max_a' Q(s', a')) with
// synchronous Jacobi sweeps until the sup-norm residual drops below tol.
inline TabularEstimator solve_tabular(const EnumeratedMdp& mdp,
                                      const LabelFunction& label, double gamma,
                                      double tol,
                                      TabularEstimator::Encoder encoder,
                                      std::string constraint_name = "",
                                      int max_iter = 1000000) {
  if (gamma <= 0.0 || gamma >= 1.0) throw Error("solve_tabular: gamma must be in (0,1)");
  if (tol <= 0.0) throw Error("solve_tabular: tol must be positive");
  const StateId n = mdp.n_states();
  const int na = mdp.n_actions;
  std::vector<double> l(n);
  for (StateId s = 0; s < n; ++s) l[s] = label(mdp.states[s]);

  TabularEstimator est(std::move(constraint_name), gamma, n, na,
                       std::move(encoder));
  std::vector<double>& q = est.table();
  std::vector<double> q_next(q.size(), 0.0);
  std::vector<double> v(n, 0.0);
  for (StateId s = 0; s < n; ++s) {
    for (ActionId a = 0; a < na; ++a) q[static_cast<size_t>(s) * na + a] = l[s];
  }
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter && residual >= tol; ++it) {
    for (StateId s = 0; s < n; ++s) {
      const double* row = &q[static_cast<size_t>(s) * na];
      v[s] = *std::max_element(row, row + na);
    }
    residual = 0.0;
    for (StateId s = 0; s < n; ++s) {
      for (ActionId a = 0; a < na; ++a) {
        const size_t idx = static_cast<size_t>(s) * na + a;
        double updated;
        if (mdp.terminal[s]) {
          updated = l[s];
        } else {
          updated = (1.0 - gamma) * l[s] +
                    gamma * std::min(l[s], v[mdp.next(s, a)]);
        }
        residual = std::max(residual, std::fabs(updated - q[idx]));
        q_next[idx] = updated;
      }
    }
    q.swap(q_next);
  }
  if (residual >= tol)
    throw Error("solve_tabular: no convergence within the iteration cap");
  return est;
}

// ---------------------------------------------------------------------------
// Fitted estimator: linear model with per-action heads over a user-supplied
// (sparse) feature map, trained by SGD on the Bellman feasibility residual
// with a periodically synchronized target copy.
// ---------------------------------------------------------------------------

// Sparse feature vector: list of (index, value) pairs.
using SparseFeatures = std::vector<std::pair<int, double>>;
using FeatureFn = std::function<SparseFeatures(const State&)>;

struct FitConfig {
  int batch_size = 64;
  double learning_rate = 0.1;
  long steps = 200000;
  int target_sync = 500;  // SGD steps between target-copy syncs
  std::uint64_t seed = 0;
};

struct FitResult;

class FittedEstimator : public FeasibilityEstimator {
 public:
  FittedEstimator(std::string constraint, double gamma, int n_actions,
                  int n_features, FeatureFn features)
      : name_(std::move(constraint)),
        gamma_(gamma),
        n_actions_(n_actions),
        n_features_(n_features),
        weights_(static_cast<size_t>(n_actions) * n_features, 0.0),
        features_(std::move(features)) {}

  int action_count() const override { return n_actions_; }
  double gamma() const override { return gamma_; }
  const std::string& constraint_name() const override { return name_; }

  std::vector<double> q_values(const State& s) const override {
    return predict(features_(s), true);
  }

  // Raw (unclamped) output, used for the training gradient.
  std::vector<double> predict(const SparseFeatures& f, bool clamp) const {
    std::vector<double> q(n_actions_, 0.0);
    for (ActionId a = 0; a < n_actions_; ++a) {
      const double* w = &weights_[static_cast<size_t>(a) * n_features_];
      double acc = 0.0;
      for (const auto& [i, x] : f) acc += w[i] * x;
      q[a] = clamp ? std::clamp(acc, -1.0, 1.0) : acc;
    }
    return q;
  }

  int n_features() const { return n_features_; }
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  const FeatureFn& features() const { return features_; }

 private:
  std::string name_;
  double gamma_;
  int n_actions_;
  int n_features_;
  std::vector<double> weights_;
  FeatureFn features_;
};

struct FitResult {
  std::shared_ptr<FittedEstimator> estimator;
  double final_loss = 0.0;
};

// Minimizes the squared Bellman feasibility residual over minibatches.
// Terminated transitions bootstrap with the label of the successor state.
inline FitResult fit(const std::vector<TransitionRecord>& dataset,
                     const LabelFunction& label, double gamma,
                     const FitConfig& cfg, int n_actions, int n_features,
                     FeatureFn features, std::string constraint_name = "") {
  if (dataset.empty()) throw Error("fit: empty dataset");
  auto est = std::make_shared<FittedEstimator>(std::move(constraint_name),
                                               gamma, n_actions, n_features,
                                               features);
  FittedEstimator target = *est;

  // Precompute features and labels once; datasets are replayed many times.
  std::vector<SparseFeatures> feat(dataset.size()), feat_next(dataset.size());
  std::vector<double> lbl(dataset.size()), lbl_next(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) {
    feat[i] = features(dataset[i].state);
    feat_next[i] = features(dataset[i].next_state);
    lbl[i] = label(dataset[i].state);
    lbl_next[i] = label(dataset[i].next_state);
  }

  Rng rng(cfg.seed);
  double running_loss = 0.0;
  for (long step = 0; step < cfg.steps; ++step) {
    if (step % cfg.target_sync == 0) target.weights() = est->weights();
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const size_t i = static_cast<size_t>(rng.next_int(static_cast<int>(dataset.size())));
      const TransitionRecord& rec = dataset[i];
      double vnext;
      if (rec.terminated) {
        vnext = lbl_next[i];
      } else {
        auto qn = target.predict(feat_next[i], true);
        vnext = *std::max_element(qn.begin(), qn.end());
      }
      const double y = (1.0 - gamma) * lbl[i] +
                       gamma * std::min(lbl[i], vnext);
      auto q = est->predict(feat[i], false);
      const double err = q[rec.action] - y;
      batch_loss += err * err;
      double* w = &est->weights()[static_cast<size_t>(rec.action) *
                                  est->n_features()];
      const double scale = cfg.learning_rate * err / cfg.batch_size;
      for (const auto& [idx, x] : feat[i]) w[idx] -= scale * x;
    }
    running_loss = batch_loss / cfg.batch_size;
    if (!std::isfinite(running_loss))
      throw Error("fit: training loss diverged (non-finite)");
  }
  return FitResult{est, running_loss};
}

// One-hot feature map over an enumerable encoder; the tabular-equivalent
// approximator used in tests and for discretized worlds.
inline FeatureFn one_hot_features(TabularEstimator::Encoder encoder) {
  return [encoder = std::move(encoder)](const State& s) {
    return SparseFeatures{{static_cast<int>(encoder(s)), 1.0}};
  };
}

}  // namespace cbtrl
