#pragma once

// Pick-and-place tree over a 5-bit condition space, shared by the bt-core
// tests and the acceptance suite. State layout:
//   [0] safe  [1] item_placed  [2] have_item  [3] near_item  [4] at_goal

#include <map>
#include <string>
#include <vector>

#include "cbtrl/bt.hpp"
#include "cbtrl/predicate.hpp"
#include "cbtrl/regions.hpp"

namespace testutil {

inline cbtrl::Region bit(int i, std::string name) {
  return cbtrl::Region::atom(std::move(name), [i](const cbtrl::State& s) {
    return s[i] != 0.0;
  });
}

inline std::map<std::string, cbtrl::Region> analog_atoms() {
  return {
      {"safe", bit(0, "safe")},
      {"item_placed", bit(1, "item_placed")},
      {"have_item", bit(2, "have_item")},
      {"near_item", bit(3, "near_item")},
      {"at_goal", bit(4, "at_goal")},
  };
}

inline const char* analog_tree_text() {
  return "(seq (cond safe)"
         " (fb (cond item_placed)"
         "  (seq (cond have_item) (cond at_goal) (act Place))"
         "  (seq (cond have_item) (act Move))"
         "  (seq (cond near_item) (act Grasp))"
         "  (act Move)))";
}

inline cbtrl::BehaviorTree analog_tree() {
  return cbtrl::parse_tree(analog_tree_text(), analog_atoms());
}

// All 2^5 condition assignments.
inline std::vector<cbtrl::State> analog_states() {
  std::vector<cbtrl::State> states;
  for (int m = 0; m < 32; ++m) {
    cbtrl::State s(5);
    for (int b = 0; b < 5; ++b) s[b] = (m >> b) & 1 ? 1.0 : 0.0;
    states.push_back(s);
  }
  return states;
}

inline cbtrl::State analog_state(bool safe, bool placed, bool have, bool near,
                                 bool at_goal) {
  return {safe ? 1.0 : 0.0, placed ? 1.0 : 0.0, have ? 1.0 : 0.0,
          near ? 1.0 : 0.0, at_goal ? 1.0 : 0.0};
}

// Node ids in the analog tree (depth-first preorder).
struct AnalogIds {
  static constexpr int root = 0;
  static constexpr int safe_cond = 1;
  static constexpr int fallback = 2;
  static constexpr int place = 7;
  static constexpr int move_to_goal = 10;
  static constexpr int grasp = 13;
  static constexpr int move_to_item = 14;
};

}  // namespace testutil
