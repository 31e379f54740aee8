#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cbtrl/env.hpp"
#include "cbtrl/predicate.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

// Discrete pick-and-place world. The agent fetches an item and places it on
// the goal cell while a forklift patrols a fixed cyclic route. State:
// (agent_x, agent_y, item_x, item_y, carried, forklift_phase); while carried
// the item coordinates equal the agent's. Actions: 0..3 move N/S/E/W,
// 4 grasp, 5 release, 6 noop.
//
// Moving into a wall or shelf is a bump: the agent stays put and, if it is
// carrying, the item is knocked loose and dropped on the agent's cell.
// A free cell walled in on both perpendicular sides is a squeeze: passing
// through it empty-handed is fine, but entering it while carrying also
// knocks the item loose (it lands on the squeeze cell). In the default map
// the squeeze at (2,3) is the short gap through the shelf wall between the
// floor and the goal rows; the wide opening at (5,3)-(6,3) is the long,
// drop-free way around.
struct WarehouseParams {
  // '#' wall or shelf, '.' free, 'G' goal cell, 'I' item start cell.
  std::vector<std::string> map = {
      "########",
      "#.G....#",
      "#......#",
      "##.##..#",
      "#......#",
      "#......#",
      "#I.....#",
      "########",
  };
  // Forklift route, (x, y) cell coordinates, visited cyclically one cell
  // per step. Must be contiguous free cells.
  std::vector<std::pair<int, int>> route = {
      {3, 4}, {4, 4}, {5, 4}, {6, 4}, {6, 5},
      {6, 6}, {5, 6}, {4, 6}, {3, 6}, {3, 5},
  };
  int horizon = 100;
  double step_cost = 0.01;
  double bump_penalty = 0.05;
  double shaping = 0.1;     // per cell of progress toward the current target
  double event_bonus = 1.0; // successful grasp / successful placement
};

enum WarehouseAction : ActionId {
  kMoveN = 0,
  kMoveS = 1,
  kMoveE = 2,
  kMoveW = 3,
  kGrasp = 4,
  kRelease = 5,
  kNoop = 6,
};

class Warehouse : public Env {
 public:
  explicit Warehouse(WarehouseParams p = {}) : p_(std::move(p)) {
    h_ = static_cast<int>(p_.map.size());
    if (h_ == 0) throw Error("Warehouse: empty map");
    w_ = static_cast<int>(p_.map[0].size());
    free_index_.assign(static_cast<size_t>(w_) * h_, -1);
    goal_ = item_start_ = {-1, -1};
    for (int y = 0; y < h_; ++y) {
      if (static_cast<int>(p_.map[y].size()) != w_)
        throw Error("Warehouse: ragged map rows");
      for (int x = 0; x < w_; ++x) {
        char c = p_.map[y][x];
        if (c == '#') continue;
        if (c != '.' && c != 'G' && c != 'I')
          throw Error(std::string("Warehouse: bad map character '") + c + "'");
        free_index_[cell(x, y)] = static_cast<int>(free_cells_.size());
        free_cells_.push_back({x, y});
        if (c == 'G') goal_ = {x, y};
        if (c == 'I') item_start_ = {x, y};
      }
    }
    if (goal_.first < 0) throw Error("Warehouse: map has no goal cell 'G'");
    if (item_start_.first < 0) throw Error("Warehouse: map has no item cell 'I'");
    if (p_.route.empty()) throw Error("Warehouse: empty forklift route");
    for (size_t i = 0; i < p_.route.size(); ++i) {
      auto [x, y] = p_.route[i];
      if (!is_free(x, y)) throw Error("Warehouse: route cell is not free");
      auto [nx, ny] = p_.route[(i + 1) % p_.route.size()];
      if (std::abs(nx - x) + std::abs(ny - y) != 1)
        throw Error("Warehouse: route cells are not contiguous");
    }
    build_distances();
    build_atoms();
  }

  const WarehouseParams& params() const { return p_; }
  std::pair<int, int> goal() const { return goal_; }
  std::pair<int, int> item_start() const { return item_start_; }
  int free_cell_count() const { return static_cast<int>(free_cells_.size()); }
  int route_length() const { return static_cast<int>(p_.route.size()); }

  std::pair<int, int> forklift(int phase) const {
    return p_.route[static_cast<size_t>(phase)];
  }

  int action_count() const override { return 7; }
  int state_dim() const override { return 6; }
  int horizon() const override { return p_.horizon; }

  State step(const State& s, ActionId a) const override {
    check_action(a);
    int ax = at(s, 0), ay = at(s, 1), ix = at(s, 2), iy = at(s, 3);
    int carried = at(s, 4), phase = at(s, 5);
    if (a <= kMoveW) {
      static constexpr int dx[4] = {0, 0, 1, -1};
      static constexpr int dy[4] = {-1, 1, 0, 0};
      int tx = ax + dx[a], ty = ay + dy[a];
      if (is_free(tx, ty)) {
        ax = tx;
        ay = ty;
        if (carried) {
          ix = ax;
          iy = ay;
          if (squeeze(ax, ay)) carried = 0;  // knocked loose in the passage
        }
      } else if (carried) {
        // bump while carrying knocks the item loose at the agent's cell
        carried = 0;
        ix = ax;
        iy = ay;
      }
    } else if (a == kGrasp) {
      if (!carried && std::abs(ax - ix) + std::abs(ay - iy) <= 1) {
        carried = 1;
        ix = ax;
        iy = ay;
      }
    } else if (a == kRelease) {
      if (carried) {
        carried = 0;
        ix = ax;
        iy = ay;
      }
    }
    phase = (phase + 1) % route_length();
    return make_state(ax, ay, ix, iy, carried, phase);
  }

  bool valid(const State& s) const override {
    if (s.size() != 6) return false;
    for (double v : s)
      if (!std::isfinite(v) || v != std::floor(v)) return false;
    int carried = at(s, 4), phase = at(s, 5);
    if (carried != 0 && carried != 1) return false;
    if (phase < 0 || phase >= route_length()) return false;
    if (!is_free(at(s, 0), at(s, 1)) || !is_free(at(s, 2), at(s, 3)))
      return false;
    if (carried && (at(s, 0) != at(s, 2) || at(s, 1) != at(s, 3))) return false;
    return true;
  }

  const std::map<std::string, Region>& atoms() const override { return atoms_; }

  double reward(const std::string& name, const State& s, ActionId a,
                const State& next) const override {
    const double time_cost = -p_.step_cost;
    const bool bump = a <= kMoveW && at(s, 0) == at(next, 0) &&
                      at(s, 1) == at(next, 1);
    if (name == "move") {
      // progress toward the item when empty-handed, toward the goal when
      // carrying; the target is fixed by the source state so that dropping
      // the item never looks like progress
      auto target = at(s, 4) ? goal_ : std::make_pair(at(s, 2), at(s, 3));
      double before = dist(at(s, 0), at(s, 1), target.first, target.second);
      double after = dist(at(next, 0), at(next, 1), target.first, target.second);
      return p_.shaping * (before - after) - (bump ? p_.bump_penalty : 0.0) +
             time_cost;
    }
    if (name == "grasp") {
      const bool grasped = !at(s, 4) && at(next, 4);
      double before = item_distance(s), after = item_distance(next);
      return p_.shaping * (before - after) +
             (grasped ? p_.event_bonus : 0.0) -
             (bump ? p_.bump_penalty : 0.0) + time_cost;
    }
    if (name == "place") {
      const bool placed_now = placed(next) && !placed(s);
      double before = goal_distance(s), after = goal_distance(next);
      return p_.shaping * (before - after) +
             (placed_now ? p_.event_bonus : 0.0) -
             (bump ? p_.bump_penalty : 0.0) + time_cost;
    }
    if (name == "flat") {
      // -1 per unsatisfied condition (safe, item_placed) at the new state
      double r = 0.0;
      if (!safe(next)) r -= 1.0;
      if (!placed(next)) r -= 1.0;
      return r;
    }
    throw Error("unknown reward function '" + name + "'");
  }

  bool enumerable() const override { return true; }

  // agent free cell x (free cells + carried) item slot x forklift phase
  StateId state_count() const override {
    return static_cast<StateId>(free_cell_count()) * (free_cell_count() + 1) *
           route_length();
  }

  StateId encode(const State& s) const override {
    int agent = free_index_[cell(at(s, 0), at(s, 1))];
    int item = at(s, 4) ? free_cell_count()
                        : free_index_[cell(at(s, 2), at(s, 3))];
    return (static_cast<StateId>(agent) * (free_cell_count() + 1) + item) *
               route_length() +
           at(s, 5);
  }

  State decode(StateId id) const override {
    int phase = static_cast<int>(id % route_length());
    id /= route_length();
    int item = static_cast<int>(id % (free_cell_count() + 1));
    int agent = static_cast<int>(id / (free_cell_count() + 1));
    auto [ax, ay] = free_cells_[static_cast<size_t>(agent)];
    if (item == free_cell_count())
      return make_state(ax, ay, ax, ay, 1, phase);
    auto [ix, iy] = free_cells_[static_cast<size_t>(item)];
    return make_state(ax, ay, ix, iy, 0, phase);
  }

  std::function<StateId(const State&)> encoder() const {
    return [this](const State& s) { return encode(s); };
  }

  // Base episode distribution: item on its start cell, empty hands, uniform
  // forklift phase, agent uniform over cells safe for that phase.
  StateSampler start_sampler() const {
    return [this](Rng& rng) {
      for (;;) {
        int phase = rng.next_int(route_length());
        auto [ax, ay] =
            free_cells_[static_cast<size_t>(rng.next_int(free_cell_count()))];
        State s = make_state(ax, ay, item_start_.first, item_start_.second, 0,
                             phase);
        if (safe(s) && !placed(s)) return s;
      }
    };
  }

  bool safe(const State& s) const {
    auto [fx, fy] = forklift(at(s, 5));
    return std::max(std::abs(at(s, 0) - fx), std::abs(at(s, 1) - fy)) >= 2;
  }
  bool placed(const State& s) const {
    return !at(s, 4) && at(s, 2) == goal_.first && at(s, 3) == goal_.second;
  }

  // Shortest free-cell path length (4-neighbor), ignoring the forklift.
  double dist(int x0, int y0, int x1, int y1) const {
    return dist_[static_cast<size_t>(free_index_[cell(x0, y0)]) *
                     free_cell_count() +
                 free_index_[cell(x1, y1)]];
  }

 private:
  static int at(const State& s, int i) {
    return static_cast<int>(std::lround(s[static_cast<size_t>(i)]));
  }
  static State make_state(int ax, int ay, int ix, int iy, int carried,
                          int phase) {
    return {static_cast<double>(ax), static_cast<double>(ay),
            static_cast<double>(ix), static_cast<double>(iy),
            static_cast<double>(carried), static_cast<double>(phase)};
  }

  size_t cell(int x, int y) const {
    return static_cast<size_t>(y) * w_ + x;
  }
  bool is_free(int x, int y) const {
    return x >= 0 && x < w_ && y >= 0 && y < h_ && free_index_[cell(x, y)] >= 0;
  }

 public:
  bool squeeze(int x, int y) const {
    if (!is_free(x, y)) return false;
    return (!is_free(x - 1, y) && !is_free(x + 1, y)) ||
           (!is_free(x, y - 1) && !is_free(x, y + 1));
  }

 private:

  double item_distance(const State& s) const {
    return at(s, 4) ? 0.0 : dist(at(s, 0), at(s, 1), at(s, 2), at(s, 3));
  }
  double goal_distance(const State& s) const {
    // distance of the item (at the agent while carried) from the goal cell
    return dist(at(s, 2), at(s, 3), goal_.first, goal_.second);
  }

  void build_distances() {
    const int n = free_cell_count();
    dist_.assign(static_cast<size_t>(n) * n, 1e9);
    for (int src = 0; src < n; ++src) {
      std::deque<int> frontier = {src};
      dist_[static_cast<size_t>(src) * n + src] = 0.0;
      while (!frontier.empty()) {
        int cur = frontier.front();
        frontier.pop_front();
        auto [x, y] = free_cells_[static_cast<size_t>(cur)];
        const int dx[4] = {0, 0, 1, -1}, dy[4] = {-1, 1, 0, 0};
        for (int k = 0; k < 4; ++k) {
          if (!is_free(x + dx[k], y + dy[k])) continue;
          int nb = free_index_[cell(x + dx[k], y + dy[k])];
          size_t idx = static_cast<size_t>(src) * n + nb;
          if (dist_[idx] > 1e8) {
            dist_[idx] = dist_[static_cast<size_t>(src) * n + cur] + 1.0;
            frontier.push_back(nb);
          }
        }
      }
    }
  }

  void build_atoms() {
    auto route = p_.route;
    auto goal = goal_;
    atoms_ = {
        {"safe", Region::atom("safe",
                              [route](const State& s) {
                                auto [fx, fy] =
                                    route[static_cast<size_t>(at(s, 5))];
                                return std::max(std::abs(at(s, 0) - fx),
                                                std::abs(at(s, 1) - fy)) >= 2;
                              })},
        {"have_item",
         Region::atom("have_item", [](const State& s) { return at(s, 4) != 0; })},
        {"near_item", Region::atom("near_item",
                                   [](const State& s) {
                                     return !at(s, 4) &&
                                            std::abs(at(s, 0) - at(s, 2)) +
                                                    std::abs(at(s, 1) - at(s, 3)) <=
                                                1;
                                   })},
        {"at_goal", Region::atom("at_goal",
                                 [goal](const State& s) {
                                   return at(s, 0) == goal.first &&
                                          at(s, 1) == goal.second;
                                 })},
        {"item_placed", Region::atom("item_placed", [goal](const State& s) {
           return !at(s, 4) && at(s, 2) == goal.first && at(s, 3) == goal.second;
         })},
    };
  }

  WarehouseParams p_;
  int w_ = 0, h_ = 0;
  std::pair<int, int> goal_, item_start_;
  std::vector<int> free_index_;
  std::vector<std::pair<int, int>> free_cells_;
  std::vector<double> dist_;
  std::map<std::string, Region> atoms_;
};

// The benchmark tree for this world; leaf names bind to the controllers
// Move (shared), Grasp and Place.
inline std::string warehouse_tree_text() {
  return "(seq (cond safe) (fb (cond item_placed)"
         " (seq (cond have_item) (cond at_goal) (act Place))"
         " (seq (cond have_item) (act Move))"
         " (seq (cond near_item) (act Grasp))"
         " (act Move)))";
}

}  // namespace cbtrl
