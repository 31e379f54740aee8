#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cbtrl/predicate.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

enum class ReturnStatus { Success, Failure, Running };

inline const char* to_string(ReturnStatus s) {
  switch (s) {
    case ReturnStatus::Success:
      return "Success";
    case ReturnStatus::Failure:
      return "Failure";
    case ReturnStatus::Running:
      return "Running";
  }
  return "?";
}

enum class NodeKind { Sequence, Fallback, Condition, Behavior };

// One tree node. Conditions carry a predicate; behaviors carry a controller
// name and a Running/Success/Failure status partition (default: Running
// everywhere). Composites own their children.
struct BTNode {
  NodeId id = -1;
  NodeKind kind = NodeKind::Behavior;
  std::string name;  // predicate name (Condition) or controller name (Behavior)
  Region condition;  // Condition only
  Region running = Region::always();
  Region success = Region::never();
  Region failure = Region::never();
  std::vector<BTNode> children;
};

inline BTNode seq(std::vector<BTNode> children) {
  BTNode n;
  n.kind = NodeKind::Sequence;
  n.children = std::move(children);
  return n;
}

inline BTNode fb(std::vector<BTNode> children) {
  BTNode n;
  n.kind = NodeKind::Fallback;
  n.children = std::move(children);
  return n;
}

inline BTNode cond(std::string name, Region predicate) {
  BTNode n;
  n.kind = NodeKind::Condition;
  n.name = std::move(name);
  n.condition = std::move(predicate);
  return n;
}

inline BTNode act(std::string controller) {
  BTNode n;
  n.kind = NodeKind::Behavior;
  n.name = std::move(controller);
  return n;
}

struct TickResult {
  ReturnStatus status = ReturnStatus::Failure;
  std::optional<NodeId> active_behavior;  // set iff status == Running
};

// Immutable after construction; safe for concurrent reads. Node ids are
// assigned in depth-first preorder.
class BehaviorTree {
 public:
  explicit BehaviorTree(BTNode root) : root_(std::move(root)) {
    reindex();
    validate(root_);
  }

  // The id index holds pointers into root_, so copies and moves rebuild it.
  BehaviorTree(const BehaviorTree& other) : root_(other.root_) { reindex(); }
  BehaviorTree(BehaviorTree&& other) noexcept : root_(std::move(other.root_)) {
    reindex();
  }
  BehaviorTree& operator=(const BehaviorTree& other) {
    if (this != &other) {
      root_ = other.root_;
      reindex();
    }
    return *this;
  }
  BehaviorTree& operator=(BehaviorTree&& other) noexcept {
    if (this != &other) {
      root_ = std::move(other.root_);
      reindex();
    }
    return *this;
  }

  const BTNode& root() const { return root_; }

  const BTNode& node(NodeId id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end())
      throw Error("unknown node id " + std::to_string(id));
    return *it->second;
  }

  bool has_node(NodeId id) const { return by_id_.count(id) != 0; }

  // Parent id, -1 for the root.
  NodeId parent(NodeId id) const { return at(parent_, id); }

  // Nearest left sibling id, -1 if none.
  NodeId left_sibling(NodeId id) const { return at(left_, id); }

  // Behavior leaf ids in depth-first, left-first order.
  std::vector<NodeId> behavior_leaves() const {
    std::vector<NodeId> out;
    collect_behaviors(root_, out);
    return out;
  }

  // Behavior leaves carrying the given controller name.
  std::vector<NodeId> behaviors_named(const std::string& controller) const {
    std::vector<NodeId> out;
    for (NodeId id : behavior_leaves())
      if (node(id).name == controller) out.push_back(id);
    return out;
  }

  TickResult tick(const State& s) const { return tick(root_, s); }

 private:
  static TickResult tick(const BTNode& n, const State& s) {
    switch (n.kind) {
      case NodeKind::Condition:
        return {n.condition.eval(s) ? ReturnStatus::Success
                                    : ReturnStatus::Failure,
                std::nullopt};
      case NodeKind::Behavior: {
        if (n.success.eval(s)) return {ReturnStatus::Success, std::nullopt};
        if (n.failure.eval(s)) return {ReturnStatus::Failure, std::nullopt};
        return {ReturnStatus::Running, n.id};
      }
      case NodeKind::Sequence: {
        for (const auto& c : n.children) {
          TickResult r = tick(c, s);
          if (r.status != ReturnStatus::Success) return r;
        }
        return {ReturnStatus::Success, std::nullopt};
      }
      case NodeKind::Fallback: {
        for (const auto& c : n.children) {
          TickResult r = tick(c, s);
          if (r.status != ReturnStatus::Failure) return r;
        }
        return {ReturnStatus::Failure, std::nullopt};
      }
    }
    return {ReturnStatus::Failure, std::nullopt};
  }

  void reindex() {
    by_id_.clear();
    parent_.clear();
    left_.clear();
    NodeId next = 0;
    index(root_, next, -1);
  }

  void index(BTNode& n, NodeId& next, NodeId parent_id) {
    n.id = next++;
    by_id_[n.id] = &n;
    parent_[n.id] = parent_id;
    NodeId prev = -1;
    for (auto& c : n.children) {
      index(c, next, n.id);
      left_[c.id] = prev;
      prev = c.id;
    }
  }

  static void validate(const BTNode& n) {
    const bool composite =
        n.kind == NodeKind::Sequence || n.kind == NodeKind::Fallback;
    if (composite && n.children.empty())
      throw Error("composite node " + std::to_string(n.id) + " has no children");
    if (!composite && !n.children.empty())
      throw Error("leaf node " + std::to_string(n.id) + " has children");
    for (const auto& c : n.children) validate(c);
  }

  static void collect_behaviors(const BTNode& n, std::vector<NodeId>& out) {
    if (n.kind == NodeKind::Behavior) out.push_back(n.id);
    for (const auto& c : n.children) collect_behaviors(c, out);
  }

  static NodeId at(const std::map<NodeId, NodeId>& m, NodeId id) {
    auto it = m.find(id);
    if (it == m.end()) throw Error("unknown node id " + std::to_string(id));
    return it->second;
  }

  BTNode root_;
  std::map<NodeId, const BTNode*> by_id_;
  std::map<NodeId, NodeId> parent_;
  std::map<NodeId, NodeId> left_;
};

// ---------------------------------------------------------------------------
// Textual tree description: (seq ...), (fb ...), (cond NAME), (act NAME).
// Predicate names bind against the supplied atom table at parse time.
// parse -> print -> parse yields an identical tree.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> tokenize_tree(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (ch == '(' || ch == ')') {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
      tokens.push_back(std::string(1, ch));
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

inline BTNode parse_node(const std::vector<std::string>& tokens, size_t& pos,
                         const std::map<std::string, Region>& atoms) {
  if (pos >= tokens.size() || tokens[pos] != "(")
    throw Error("tree parse error: expected '('");
  ++pos;
  if (pos >= tokens.size()) throw Error("tree parse error: truncated input");
  const std::string head = tokens[pos++];
  BTNode n;
  if (head == "seq" || head == "fb") {
    n.kind = head == "seq" ? NodeKind::Sequence : NodeKind::Fallback;
    while (pos < tokens.size() && tokens[pos] == "(")
      n.children.push_back(parse_node(tokens, pos, atoms));
    if (n.children.empty())
      throw Error("tree parse error: empty composite '" + head + "'");
  } else if (head == "cond" || head == "act") {
    if (pos >= tokens.size() || tokens[pos] == "(" || tokens[pos] == ")")
      throw Error("tree parse error: '" + head + "' needs a name");
    n.name = tokens[pos++];
    if (head == "cond") {
      n.kind = NodeKind::Condition;
      auto it = atoms.find(n.name);
      if (it == atoms.end())
        throw Error("unknown predicate name '" + n.name + "'");
      n.condition = it->second;
    } else {
      n.kind = NodeKind::Behavior;
    }
  } else {
    throw Error("tree parse error: unknown node kind '" + head + "'");
  }
  if (pos >= tokens.size() || tokens[pos] != ")")
    throw Error("tree parse error: expected ')'");
  ++pos;
  return n;
}

inline void print_node(const BTNode& n, std::ostream& os) {
  switch (n.kind) {
    case NodeKind::Sequence:
    case NodeKind::Fallback:
      os << (n.kind == NodeKind::Sequence ? "(seq" : "(fb");
      for (const auto& c : n.children) {
        os << ' ';
        print_node(c, os);
      }
      os << ')';
      break;
    case NodeKind::Condition:
      os << "(cond " << n.name << ')';
      break;
    case NodeKind::Behavior:
      os << "(act " << n.name << ')';
      break;
  }
}

}  // namespace detail

inline BehaviorTree parse_tree(const std::string& text,
                               const std::map<std::string, Region>& atoms) {
  auto tokens = detail::tokenize_tree(text);
  size_t pos = 0;
  BTNode root = detail::parse_node(tokens, pos, atoms);
  if (pos != tokens.size())
    throw Error("tree parse error: trailing tokens");
  return BehaviorTree(std::move(root));
}

inline std::string print_tree(const BehaviorTree& tree) {
  std::ostringstream os;
  detail::print_node(tree.root(), os);
  return os.str();
}

}  // namespace cbtrl
