#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cbtrl/env.hpp"
#include "cbtrl/predicate.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(double x, double y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
};

// Point-mass world on [0,1]^2 with a slope that drags the agent into the
// unsafe region. State: (px, py, vx, vy). The 25 discrete actions are
// accelerations: index 0 is the zero action, then 8 compass directions
// (45-degree steps starting east, counter-clockwise) x 3 magnitudes
// {a_max/3, 2 a_max/3, a_max} as 1 + dir*3 + mag.
struct Env2dParams {
  double dt = 0.1;
  double v_max = 0.2;
  double a_max = 1.0;
  // The slope sits under the western half of the unsafe band and conveys
  // into it, so every slope state is doomed; the eastern half of the band
  // has open floor beneath and can be crossed (at the price of entering
  // the unsafe area).
  Rect unsafe{0.10, 0.50, 0.90, 0.75};
  Rect slope{0.10, 0.35, 0.50, 0.50};

  bool in_unsafe(double x, double y) const { return unsafe.contains(x, y); }
  double goal_x = 0.5, goal_y = 0.85;
  double goal_radius = 0.06;
  double drift_x = 0.0, drift_y = 0.2;  // velocity imposed on the slope
  Rect start{0.40, 0.20, 0.60, 0.30};
  int horizon = 200;
  bool reciprocal_goal_reward = false;  // see reward("goal") below
  double progress_scale = 10.0;  // reward("progress") gain per unit of approach
  double step_cost = 0.01;       // reward("progress") per-step cost
  double flat_safety_weight = 0.4;  // reward("flat") weight of the safety term
};

class Env2d : public Env {
 public:
  explicit Env2d(Env2dParams p = {}) : p_(p) {
    atoms_ = {
        {"unsafe", Region::atom("unsafe",
                                [p](const State& s) {
                                  return p.in_unsafe(s[0], s[1]);
                                })},
        {"safe", Region::atom("safe",
                              [p](const State& s) {
                                return !p.in_unsafe(s[0], s[1]);
                              })},
        {"slope", Region::atom("slope",
                               [p](const State& s) {
                                 return p.slope.contains(s[0], s[1]);
                               })},
        {"at_goal", Region::atom("at_goal", [p](const State& s) {
           double dx = s[0] - p.goal_x, dy = s[1] - p.goal_y;
           return std::sqrt(dx * dx + dy * dy) <= p.goal_radius;
         })},
    };
  }

  const Env2dParams& params() const { return p_; }

  int action_count() const override { return 25; }
  int state_dim() const override { return 4; }
  int horizon() const override { return p_.horizon; }

  // Acceleration vector for an action id.
  void acceleration(ActionId a, double& ax, double& ay) const {
    check_action(a);
    if (a == 0) {
      ax = ay = 0.0;
      return;
    }
    const int dir = (a - 1) / 3;
    const int mag = (a - 1) % 3;
    const double angle = dir * (M_PI / 4.0);
    const double m = p_.a_max * (mag + 1) / 3.0;
    ax = m * std::cos(angle);
    ay = m * std::sin(angle);
  }

  State step(const State& s, ActionId a) const override {
    check_action(a);
    double vx, vy;
    if (p_.slope.contains(s[0], s[1])) {
      // commanded acceleration has no effect on the slope
      vx = p_.drift_x;
      vy = p_.drift_y;
    } else {
      double ax, ay;
      acceleration(a, ax, ay);
      vx = std::clamp(s[2] + ax * p_.dt, -p_.v_max, p_.v_max);
      vy = std::clamp(s[3] + ay * p_.dt, -p_.v_max, p_.v_max);
    }
    double px = std::clamp(s[0] + vx * p_.dt, 0.0, 1.0);
    double py = std::clamp(s[1] + vy * p_.dt, 0.0, 1.0);
    return {px, py, vx, vy};
  }

  bool valid(const State& s) const override {
    return s.size() == 4 && s[0] >= 0.0 && s[0] <= 1.0 && s[1] >= 0.0 &&
           s[1] <= 1.0 && std::fabs(s[2]) <= p_.v_max &&
           std::fabs(s[3]) <= p_.v_max && std::isfinite(s[0]) &&
           std::isfinite(s[1]) && std::isfinite(s[2]) && std::isfinite(s[3]);
  }

  const std::map<std::string, Region>& atoms() const override { return atoms_; }

  std::map<std::string, bool> flags(const State& s) const {
    std::map<std::string, bool> out;
    for (const auto& [name, region] : atoms_) out[name] = region.eval(s);
    return out;
  }

  double goal_distance(const State& s) const {
    double dx = s[0] - p_.goal_x, dy = s[1] - p_.goal_y;
    return std::sqrt(dx * dx + dy * dy);
  }

  double reward(const std::string& name, const State& s, ActionId /*a*/,
                const State& next) const override {
    if (name == "safety") {
      // -1 for each step spent in the unsafe area
      return p_.in_unsafe(s[0], s[1]) ? -1.0 : 0.0;
    }
    if (name == "goal") {
      const double d = goal_distance(next);
      const double diameter = std::sqrt(2.0);
      if (p_.reciprocal_goal_reward) {
        // saturating variant; zero at the goal, approach direction preserved
        return -d / (d + p_.goal_radius);
      }
      return -d / diameter;
    }
    if (name == "progress") {
      // potential-shaped: pays for closing distance to the goal, charges time
      return (goal_distance(s) - goal_distance(next)) * p_.progress_scale -
             p_.step_cost;
    }
    if (name == "flat") {
      // scalarized sum of both subtask costs: -1 while short of the goal
      // plus the weighted safety term for each step spent unsafe
      double r = 0.0;
      if (p_.in_unsafe(next[0], next[1])) r -= p_.flat_safety_weight;
      if (goal_distance(next) > p_.goal_radius) r -= 1.0;
      return r;
    }
    throw Error("unknown reward function '" + name + "'");
  }

  // Uniform start distribution: position in the start box, zero velocity.
  StateSampler start_sampler() const {
    Env2dParams p = p_;
    return [p](Rng& rng) {
      return State{rng.next_range(p.start.x0, p.start.x1),
                   rng.next_range(p.start.y0, p.start.y1), 0.0, 0.0};
    };
  }

 private:
  Env2dParams p_;
  std::map<std::string, Region> atoms_;
};

// Enumerable twin of Env2d on a uniform (nx, ny, nv, nv) grid. One step is
// the continuous dynamics from the grid point followed by nearest-grid-point
// rounding. Tabular learners and exact solvers run here; encode() doubles as
// the discretizer for arbitrary continuous states.
class Env2dGrid : public Env {
 public:
  using Encoder = std::function<StateId(const State&)>;

  Env2dGrid(Env2dParams p, int nx, int ny, int nv)
      : cont_(p), nx_(nx), ny_(ny), nv_(nv) {
    if (nx < 2 || ny < 2 || nv < 2 || nv % 2 == 0)
      throw Error("Env2dGrid: need nx, ny >= 2 and odd nv >= 3");
  }

  const Env2d& continuous() const { return cont_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nv() const { return nv_; }

  int action_count() const override { return cont_.action_count(); }
  int state_dim() const override { return 4; }
  int horizon() const override { return cont_.horizon(); }

  State step(const State& s, ActionId a) const override {
    return decode(encode(cont_.step(decode(encode(s)), a)));
  }

  bool valid(const State& s) const override { return cont_.valid(s); }
  const std::map<std::string, Region>& atoms() const override {
    return cont_.atoms();
  }
  double reward(const std::string& name, const State& s, ActionId a,
                const State& next) const override {
    return cont_.reward(name, s, a, next);
  }

  bool enumerable() const override { return true; }

  StateId state_count() const override {
    return static_cast<StateId>(nx_) * ny_ * nv_ * nv_;
  }

  State decode(StateId id) const override {
    const int iv_y = static_cast<int>(id % nv_);
    id /= nv_;
    const int iv_x = static_cast<int>(id % nv_);
    id /= nv_;
    const int iy = static_cast<int>(id % ny_);
    const int ix = static_cast<int>(id / ny_);
    const double vmax = cont_.params().v_max;
    return {static_cast<double>(ix) / (nx_ - 1),
            static_cast<double>(iy) / (ny_ - 1),
            -vmax + 2.0 * vmax * iv_x / (nv_ - 1),
            -vmax + 2.0 * vmax * iv_y / (nv_ - 1)};
  }

  StateId encode(const State& s) const override {
    const double vmax = cont_.params().v_max;
    const int ix = nearest(s[0], 0.0, 1.0, nx_);
    const int iy = nearest(s[1], 0.0, 1.0, ny_);
    const int ivx = nearest(s[2], -vmax, vmax, nv_);
    const int ivy = nearest(s[3], -vmax, vmax, nv_);
    return ((static_cast<StateId>(ix) * ny_ + iy) * nv_ + ivx) * nv_ + ivy;
  }

  Encoder encoder() const {
    return [this](const State& s) { return encode(s); };
  }

  // Start sampler snapped to the grid.
  StateSampler start_sampler() const {
    return [this, inner = cont_.start_sampler()](Rng& rng) {
      return decode(encode(inner(rng)));
    };
  }

 private:
  static int nearest(double v, double lo, double hi, int n) {
    double t = (std::clamp(v, lo, hi) - lo) / (hi - lo) * (n - 1);
    return static_cast<int>(std::lround(t));
  }

  Env2d cont_;
  int nx_, ny_, nv_;
};

}  // namespace cbtrl
