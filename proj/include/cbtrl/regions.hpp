#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "cbtrl/bt.hpp"
#include "cbtrl/predicate.hpp"

namespace cbtrl {

// Ordered behavior-leaf ids; index = intended progression rank (1-based in
// the operations below).
struct LeafOrdering {
  std::vector<NodeId> leaves;

  int rank_of(NodeId leaf) const {
    for (size_t i = 0; i < leaves.size(); ++i)
      if (leaves[i] == leaf) return static_cast<int>(i) + 1;
    throw Error("behavior leaf " + std::to_string(leaf) +
                " is not in the ordering");
  }
};

inline void validate_ordering(const BehaviorTree& tree,
                              const LeafOrdering& ordering) {
  auto leaves = tree.behavior_leaves();
  std::set<NodeId> expected(leaves.begin(), leaves.end());
  std::set<NodeId> got(ordering.leaves.begin(), ordering.leaves.end());
  if (expected != got || ordering.leaves.size() != leaves.size())
    throw Error("ordering must contain every behavior leaf exactly once");
}

inline Region failure_region(const BTNode& n);

// Success/Failure/Running regions of a node, composed from child statuses
// with the same semantics as tick.
inline Region success_region(const BTNode& n) {
  switch (n.kind) {
    case NodeKind::Condition:
      return n.condition;
    case NodeKind::Behavior:
      return n.success;
    case NodeKind::Sequence: {
      Region all = Region::always();
      for (const auto& c : n.children) all = all & success_region(c);
      return all;
    }
    case NodeKind::Fallback: {
      Region prefix_fail = Region::always();
      Region out = Region::never();
      for (const auto& c : n.children) {
        out = out | (prefix_fail & success_region(c));
        prefix_fail = prefix_fail & failure_region(c);
      }
      return out;
    }
  }
  return Region::never();
}

inline Region failure_region(const BTNode& n) {
  switch (n.kind) {
    case NodeKind::Condition:
      return !n.condition;
    case NodeKind::Behavior:
      return n.failure;
    case NodeKind::Fallback: {
      Region all = Region::always();
      for (const auto& c : n.children) all = all & failure_region(c);
      return all;
    }
    case NodeKind::Sequence: {
      Region prefix_ok = Region::always();
      Region out = Region::never();
      for (const auto& c : n.children) {
        out = out | (prefix_ok & failure_region(c));
        prefix_ok = prefix_ok & success_region(c);
      }
      return out;
    }
  }
  return Region::never();
}

inline Region running_region(const BTNode& n) {
  switch (n.kind) {
    case NodeKind::Condition:
      return Region::never();
    case NodeKind::Behavior:
      return n.running;
    case NodeKind::Sequence: {
      Region prefix_ok = Region::always();
      Region out = Region::never();
      for (const auto& c : n.children) {
        out = out | (prefix_ok & running_region(c));
        prefix_ok = prefix_ok & success_region(c);
      }
      return out;
    }
    case NodeKind::Fallback: {
      Region prefix_fail = Region::always();
      Region out = Region::never();
      for (const auto& c : n.children) {
        out = out | (prefix_fail & running_region(c));
        prefix_fail = prefix_fail & failure_region(c);
      }
      return out;
    }
  }
  return Region::never();
}

// Influence region I_i: whole space at the root; the parent's influence when
// there is no left sibling; otherwise the left sibling's influence
// intersected with its Success (Sequence parent) or Failure (Fallback
// parent) region.
inline Region influence_region(const BehaviorTree& tree, NodeId id) {
  const BTNode& n = tree.node(id);  // throws on unknown id
  (void)n;
  if (tree.parent(id) < 0) return Region::always();
  NodeId sib = tree.left_sibling(id);
  if (sib < 0) return influence_region(tree, tree.parent(id));
  const BTNode& parent = tree.node(tree.parent(id));
  Region sib_influence = influence_region(tree, sib);
  if (parent.kind == NodeKind::Sequence)
    return sib_influence & success_region(tree.node(sib));
  if (parent.kind == NodeKind::Fallback)
    return sib_influence & failure_region(tree.node(sib));
  throw Error("node " + std::to_string(id) + " has a leaf parent");
}

// Operating region: where the node's controller actually executes.
inline Region operating_region(const BehaviorTree& tree, NodeId id) {
  return influence_region(tree, id) & running_region(tree.node(id));
}

// Convergence set C_i: union of operating regions at ranks >= i plus the
// root's Success region. This is the set a rank-i controller must keep
// invariant.
inline Region convergence_set(const BehaviorTree& tree,
                              const LeafOrdering& ordering, int rank) {
  validate_ordering(tree, ordering);
  if (rank < 1 || rank > static_cast<int>(ordering.leaves.size()))
    throw Error("convergence_set: rank " + std::to_string(rank) +
                " out of range");
  Region out = success_region(tree.root());
  for (size_t j = rank - 1; j < ordering.leaves.size(); ++j)
    out = out | operating_region(tree, ordering.leaves[j]);
  return out;
}

enum class OrderingPattern { BackwardChained, ImplicitSequence };

namespace detail {

inline int count_behaviors(const BTNode& n) {
  if (n.kind == NodeKind::Behavior) return 1;
  int c = 0;
  for (const auto& ch : n.children) c += count_behaviors(ch);
  return c;
}

inline void collect_behaviors_df(const BTNode& n, std::vector<NodeId>& out) {
  if (n.kind == NodeKind::Behavior) out.push_back(n.id);
  for (const auto& c : n.children) collect_behaviors_df(c, out);
}

// The fallback that hosts all behavior subtrees of an implicit-sequence
// design, or nullptr when the tree does not match the pattern.
inline const BTNode* find_implicit_sequence_fallback(const BTNode& n,
                                                     int total_behaviors) {
  if (n.kind == NodeKind::Fallback && count_behaviors(n) == total_behaviors) {
    int bearing = 0;
    for (const auto& c : n.children)
      if (count_behaviors(c) > 0) ++bearing;
    if (bearing >= 2) return &n;
    // fall through: a single behavior-bearing child may itself host the
    // implicit sequence deeper down
  }
  for (const auto& c : n.children) {
    if (count_behaviors(c) == total_behaviors)
      return find_implicit_sequence_fallback(c, total_behaviors);
  }
  return nullptr;
}

}  // namespace detail

// Derives the intended progression for the two recognized design patterns.
// Trees matching neither pattern must supply the ordering explicitly in the
// experiment configuration.
inline LeafOrdering derive_ordering(const BehaviorTree& tree,
                                    OrderingPattern pattern) {
  LeafOrdering out;
  auto all = tree.behavior_leaves();
  if (all.empty()) throw Error("tree has no behavior leaves");
  if (all.size() == 1) {
    out.leaves = all;
    return out;
  }
  if (pattern == OrderingPattern::BackwardChained) {
    out.leaves = all;  // depth-first, left-first
    return out;
  }
  const BTNode* host = detail::find_implicit_sequence_fallback(
      tree.root(), static_cast<int>(all.size()));
  if (host == nullptr)
    throw Error(
        "tree does not match the ImplicitSequence pattern; supply the "
        "ordering explicitly in the configuration");
  for (auto it = host->children.rbegin(); it != host->children.rend(); ++it)
    detail::collect_behaviors_df(*it, out.leaves);
  return out;
}

struct PartitionViolation {
  NodeId parent = -1;
  size_t state_index = 0;
  int covering_children = 0;  // != 1
};

struct PartitionReport {
  std::vector<PartitionViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Checks that for every internal node, the children's operating regions
// partition the parent's operating region over the given enumeration.
inline PartitionReport validate_partition(const BehaviorTree& tree,
                                          const std::vector<State>& states) {
  PartitionReport report;
  std::vector<const BTNode*> stack = {&tree.root()};
  while (!stack.empty()) {
    const BTNode* n = stack.back();
    stack.pop_back();
    if (n->children.empty()) continue;
    Region parent_op = operating_region(tree, n->id);
    std::vector<Region> child_ops;
    for (const auto& c : n->children) {
      child_ops.push_back(operating_region(tree, c.id));
      stack.push_back(&c);
    }
    for (size_t i = 0; i < states.size(); ++i) {
      if (!parent_op.eval(states[i])) continue;
      int covering = 0;
      for (const auto& op : child_ops)
        if (op.eval(states[i])) ++covering;
      if (covering != 1)
        report.violations.push_back({n->id, i, covering});
    }
  }
  return report;
}

}  // namespace cbtrl
