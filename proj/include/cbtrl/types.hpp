#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbtrl {

// Fixed-length real state vector. Discrete environments pack their cell
// coordinates into it so that predicates and controllers share one type.
using State = std::vector<double>;

using ActionId = int;
using NodeId = int;
using StateId = std::int64_t;

// One environment transition. The unit of replay datasets.
struct TransitionRecord {
  State state;
  ActionId action = 0;
  double reward = 0.0;
  State next_state;
  bool terminated = false;
  bool truncated = false;
  NodeId active_node = -1;
};

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cbtrl
