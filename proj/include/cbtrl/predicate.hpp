#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cbtrl/types.hpp"

namespace cbtrl {

// Composable membership test over states. Closed terms over named atomic
// predicates with AND/OR/NOT/TRUE/FALSE. Evaluation is pure and total;
// materialization to a bitset over an enumeration agrees with pointwise
// evaluation by construction.
class Region {
 public:
  using AtomFn = std::function<bool(const State&)>;

  Region() : node_(always_node()) {}

  static Region always() { return Region(always_node()); }
  static Region never() { return Region(never_node()); }

  static Region atom(std::string name, AtomFn fn) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Atom;
    n->name = std::move(name);
    n->fn = std::move(fn);
    return Region(std::move(n));
  }

  friend Region operator&(const Region& a, const Region& b) {
    return combine(Kind::And, a, b);
  }
  friend Region operator|(const Region& a, const Region& b) {
    return combine(Kind::Or, a, b);
  }
  friend Region operator!(const Region& a) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Not;
    n->children = {a.node_};
    return Region(std::move(n));
  }

  bool eval(const State& s) const { return eval(*node_, s); }

  // Pointwise evaluation over an enumeration.
  template <class Enumeration>
  std::vector<char> materialize(const Enumeration& states) const {
    std::vector<char> bits;
    bits.reserve(states.size());
    for (const auto& s : states) bits.push_back(eval(s) ? 1 : 0);
    return bits;
  }

  // Structural formula, used by the `regions` CLI subcommand.
  std::string to_string() const { return to_string(*node_); }

 private:
  enum class Kind { True, False, Atom, Not, And, Or };

  struct Node {
    Kind kind = Kind::True;
    std::string name;
    AtomFn fn;
    std::vector<std::shared_ptr<const Node>> children;
  };

  explicit Region(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static const std::shared_ptr<const Node>& always_node() {
    static const std::shared_ptr<const Node> n = [] {
      auto p = std::make_shared<Node>();
      p->kind = Kind::True;
      return p;
    }();
    return n;
  }

  static const std::shared_ptr<const Node>& never_node() {
    static const std::shared_ptr<const Node> n = [] {
      auto p = std::make_shared<Node>();
      p->kind = Kind::False;
      return p;
    }();
    return n;
  }

  static Region combine(Kind k, const Region& a, const Region& b) {
    // Cheap simplifications keep printed formulas readable.
    if (k == Kind::And) {
      if (a.node_->kind == Kind::True) return b;
      if (b.node_->kind == Kind::True) return a;
      if (a.node_->kind == Kind::False || b.node_->kind == Kind::False)
        return never();
    } else {
      if (a.node_->kind == Kind::False) return b;
      if (b.node_->kind == Kind::False) return a;
      if (a.node_->kind == Kind::True || b.node_->kind == Kind::True)
        return always();
    }
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->children = {a.node_, b.node_};
    return Region(std::move(n));
  }

  static bool eval(const Node& n, const State& s) {
    switch (n.kind) {
      case Kind::True:
        return true;
      case Kind::False:
        return false;
      case Kind::Atom:
        return n.fn(s);
      case Kind::Not:
        return !eval(*n.children[0], s);
      case Kind::And:
        return eval(*n.children[0], s) && eval(*n.children[1], s);
      case Kind::Or:
        return eval(*n.children[0], s) || eval(*n.children[1], s);
    }
    return false;
  }

  static std::string to_string(const Node& n) {
    switch (n.kind) {
      case Kind::True:
        return "TRUE";
      case Kind::False:
        return "FALSE";
      case Kind::Atom:
        return n.name;
      case Kind::Not:
        return "!" + wrap(*n.children[0]);
      case Kind::And:
        return wrap(*n.children[0]) + " & " + wrap(*n.children[1]);
      case Kind::Or:
        return wrap(*n.children[0]) + " | " + wrap(*n.children[1]);
    }
    return "?";
  }

  static std::string wrap(const Node& n) {
    if (n.kind == Kind::And || n.kind == Kind::Or)
      return "(" + to_string(n) + ")";
    return to_string(n);
  }

  std::shared_ptr<const Node> node_;
};

}  // namespace cbtrl
