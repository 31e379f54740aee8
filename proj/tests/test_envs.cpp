#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "cbtrl/env2d.hpp"
#include "cbtrl/regions.hpp"
#include "cbtrl/warehouse.hpp"

using namespace cbtrl;

TEST_CASE("2d world dynamics") {
  Env2d env;
  const auto& p = env.params();

  SUBCASE("zero action from rest is a fixed point off the slope") {
    State s = {0.1, 0.1, 0.0, 0.0};
    CHECK(env.step(s, 0) == s);
  }
  SUBCASE("one step east matches the closed form") {
    State s = {0.1, 0.1, 0.0, 0.0};
    // action 3: direction 0 (east), full magnitude
    auto n = env.step(s, 3);
    CHECK(n[2] == doctest::Approx(p.a_max * p.dt));
    CHECK(n[3] == doctest::Approx(0.0));
    CHECK(n[0] == doctest::Approx(0.1 + p.a_max * p.dt * p.dt));
    CHECK(n[1] == doctest::Approx(0.1));
  }
  SUBCASE("velocity saturates at v_max") {
    State s = {0.1, 0.1, p.v_max, 0.0};
    auto n = env.step(s, 3);
    CHECK(n[2] == doctest::Approx(p.v_max));
  }
  SUBCASE("position clamps to the unit box") {
    State s = {0.0, 0.0, -p.v_max, -p.v_max};
    auto n = env.step(s, 0);
    CHECK(n[0] == 0.0);
    CHECK(n[1] == 0.0);
  }
  SUBCASE("the slope overrides every action identically") {
    State s = {0.4, 0.4, -0.1, 0.0};
    REQUIRE(env.atom("slope").eval(s));
    auto first = env.step(s, 0);
    CHECK(first[2] == doctest::Approx(p.drift_x));
    CHECK(first[3] == doctest::Approx(p.drift_y));
    for (ActionId a = 1; a < env.action_count(); ++a)
      CHECK(env.step(s, a) == first);
  }
  SUBCASE("the slope drags toward the unsafe region") {
    State s = {0.4, 0.48, 0.0, 0.0};
    REQUIRE(env.atom("slope").eval(s));
    auto n = env.step(s, 0);
    CHECK(n[1] > s[1]);
    CHECK(env.atom("unsafe").eval(env.step(n, 0)));
  }
  SUBCASE("steps from valid states stay valid") {
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
      State s = {rng.next_double(), rng.next_double(),
                 rng.next_range(-p.v_max, p.v_max),
                 rng.next_range(-p.v_max, p.v_max)};
      ActionId a = static_cast<ActionId>(rng.next_int(env.action_count()));
      CHECK(env.valid(env.step(s, a)));
    }
  }
  SUBCASE("out-of-range action is rejected") {
    CHECK_THROWS_AS(env.step({0.1, 0.1, 0.0, 0.0}, 25), Error);
  }
}

TEST_CASE("2d world predicates and rewards") {
  Env2d env;

  SUBCASE("safe is the complement of unsafe") {
    State inside = {0.5, 0.55, 0.0, 0.0};
    State outside = {0.1, 0.1, 0.0, 0.0};
    CHECK(env.atom("unsafe").eval(inside));
    CHECK(!env.atom("safe").eval(inside));
    CHECK(env.atom("safe").eval(outside));
  }
  SUBCASE("safety reward is -1 per step spent in the unsafe area") {
    State inside = {0.5, 0.55, 0.0, 0.0};
    State outside = {0.1, 0.1, 0.0, 0.0};
    CHECK(env.reward("safety", inside, 0, outside) == -1.0);
    CHECK(env.reward("safety", outside, 0, inside) == 0.0);
  }
  SUBCASE("goal reward is zero at the goal center and proportional away") {
    State at_goal = {env.params().goal_x, env.params().goal_y, 0.0, 0.0};
    CHECK(env.reward("goal", at_goal, 0, at_goal) == doctest::Approx(0.0));
    State away = {env.params().goal_x, env.params().goal_y - 0.3, 0.0, 0.0};
    CHECK(env.reward("goal", away, 0, away) ==
          doctest::Approx(-0.3 / std::sqrt(2.0)));
  }
  SUBCASE("reciprocal goal reward keeps the approach direction") {
    Env2dParams p;
    p.reciprocal_goal_reward = true;
    Env2d alt(p);
    State at_goal = {p.goal_x, p.goal_y, 0.0, 0.0};
    State near = {p.goal_x, p.goal_y - 0.1, 0.0, 0.0};
    State far = {p.goal_x, p.goal_y - 0.4, 0.0, 0.0};
    CHECK(alt.reward("goal", at_goal, 0, at_goal) == doctest::Approx(0.0));
    CHECK(alt.reward("goal", near, 0, near) >
          alt.reward("goal", far, 0, far));
    CHECK(alt.reward("goal", far, 0, far) > -1.0);
  }
  SUBCASE("flat reward scalarizes goal and weighted safety costs") {
    State at_goal = {env.params().goal_x, env.params().goal_y, 0.0, 0.0};
    State unsafe = {0.5, 0.55, 0.0, 0.0};
    State plain = {0.1, 0.1, 0.0, 0.0};
    const double w = env.params().flat_safety_weight;
    CHECK(env.reward("flat", at_goal, 0, at_goal) == 0.0);
    CHECK(env.reward("flat", plain, 0, unsafe) ==
          doctest::Approx(-1.0 - w));
    CHECK(env.reward("flat", unsafe, 0, plain) == -1.0);
  }
  SUBCASE("unknown reward name is rejected") {
    State s = {0.1, 0.1, 0.0, 0.0};
    CHECK_THROWS_AS(env.reward("bogus", s, 0, s), Error);
  }
  SUBCASE("start sampler stays in the start box at rest") {
    Rng rng(3);
    auto sampler = env.start_sampler();
    for (int i = 0; i < 100; ++i) {
      auto s = reset(env, sampler, rng);
      CHECK(env.params().start.contains(s[0], s[1]));
      CHECK(s[2] == 0.0);
      CHECK(s[3] == 0.0);
    }
  }
}

TEST_CASE("2d grid twin") {
  Env2dGrid grid({}, 40, 40, 5);

  SUBCASE("codec round-trips every state id") {
    CHECK(grid.state_count() == 40 * 40 * 5 * 5);
    for (StateId id = 0; id < grid.state_count(); ++id)
      CHECK(grid.encode(grid.decode(id)) == id);
  }
  SUBCASE("decoded states are valid and on the velocity lattice") {
    auto s = grid.decode(grid.state_count() - 1);
    CHECK(grid.valid(s));
    CHECK(s[2] == doctest::Approx(0.2));
    CHECK(s[3] == doctest::Approx(0.2));
  }
  SUBCASE("full velocity moves one cell, half velocity snaps back") {
    State fast = grid.decode(grid.encode({0.3, 0.1, 0.2, 0.0}));
    auto n = grid.step(fast, 0);
    CHECK(grid.encode(n) != grid.encode(fast));
    CHECK(n[0] > fast[0]);

    State slow = grid.decode(grid.encode({0.3, 0.1, 0.1, 0.0}));
    auto m = grid.step(slow, 0);
    CHECK(m[0] == doctest::Approx(slow[0]));
  }
  SUBCASE("encode discretizes arbitrary continuous states to the nearest point") {
    State s = {0.301, 0.099, 0.04, -0.19};
    auto g = grid.decode(grid.encode(s));
    CHECK(std::fabs(g[0] - s[0]) <= 0.5 / 39 + 1e-12);
    CHECK(std::fabs(g[1] - s[1]) <= 0.5 / 39 + 1e-12);
    CHECK(g[2] == doctest::Approx(0.0));
    CHECK(g[3] == doctest::Approx(-0.2));
  }
  SUBCASE("grid dynamics agree with the continuous step up to rounding") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
      State s = grid.decode(rng.next_u64() % grid.state_count());
      ActionId a = static_cast<ActionId>(rng.next_int(grid.action_count()));
      auto exact = grid.continuous().step(s, a);
      auto snapped = grid.step(s, a);
      CHECK(grid.encode(exact) == grid.encode(snapped));
    }
  }
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(Env2dGrid({}, 40, 40, 4), Error);
    CHECK_THROWS_AS(Env2dGrid({}, 1, 40, 5), Error);
  }
}

TEST_CASE("warehouse map and codec") {
  Warehouse env;

  SUBCASE("default map geometry") {
    CHECK(env.free_cell_count() == 33);
    CHECK(env.route_length() == 10);
    CHECK(env.goal() == std::make_pair(2, 1));
    CHECK(env.item_start() == std::make_pair(1, 6));
  }
  SUBCASE("codec round-trips every state id") {
    CHECK(env.state_count() == 33 * 34 * 10);
    for (StateId id = 0; id < env.state_count(); ++id) {
      auto s = env.decode(id);
      CHECK(env.valid(s));
      CHECK(env.encode(s) == id);
    }
  }
  SUBCASE("malformed configurations are rejected") {
    WarehouseParams p;
    p.map[1][1] = 'X';
    CHECK_THROWS_AS(Warehouse{p}, Error);
    WarehouseParams q;
    q.route = {{1, 1}, {3, 1}};  // not contiguous
    CHECK_THROWS_AS(Warehouse{q}, Error);
    WarehouseParams r;
    r.route = {{3, 3}};  // shelf cell
    CHECK_THROWS_AS(Warehouse{r}, Error);
  }
  SUBCASE("bfs distances route around shelves") {
    CHECK(env.dist(1, 1, 4, 1) == 3.0);
    CHECK(env.dist(1, 2, 1, 4) == 4.0);  // column 1 is cut by the shelf wall
    // the squeeze shortcut halves the drop-free detour
    CHECK(env.dist(1, 6, 2, 1) == 6.0);
  }
}

TEST_CASE("warehouse dynamics") {
  Warehouse env;
  auto carrying_at = [&](int x, int y, int phase) {
    return State{double(x), double(y), double(x), double(y), 1.0,
                 double(phase)};
  };

  SUBCASE("moves follow the compass and walls block") {
    State s = {3, 2, 1, 6, 0, 0};
    auto n = env.step(s, kMoveE);
    CHECK(n[0] == 4.0);
    CHECK(n[1] == 2.0);
    auto blocked = env.step({1, 1, 1, 6, 0, 0}, kMoveW);
    CHECK(blocked[0] == 1.0);
    CHECK(blocked[1] == 1.0);
  }
  SUBCASE("the carried item moves with the agent") {
    auto n = env.step(carrying_at(3, 2, 0), kMoveE);
    CHECK(n[2] == 4.0);
    CHECK(n[3] == 2.0);
    CHECK(n[4] == 1.0);
  }
  SUBCASE("bumping a wall while carrying drops the item in place") {
    auto n = env.step(carrying_at(1, 1, 0), kMoveW);
    CHECK(n[0] == 1.0);
    CHECK(n[4] == 0.0);
    CHECK(n[2] == 1.0);
    CHECK(n[3] == 1.0);
  }
  SUBCASE("bumping a shelf has the same effect") {
    auto n = env.step(carrying_at(5, 2, 0), kMoveS);  // (5,3) is free
    CHECK(n[4] == 1.0);
    auto m = env.step(carrying_at(3, 2, 0), kMoveS);  // (3,3) is a shelf
    CHECK(m[4] == 0.0);
    CHECK(m[2] == 3.0);
    CHECK(m[3] == 2.0);
  }
  SUBCASE("grasp requires adjacency") {
    auto ok = env.step({1, 5, 1, 6, 0, 0}, kGrasp);
    CHECK(ok[4] == 1.0);
    CHECK(ok[2] == 1.0);
    CHECK(ok[3] == 5.0);
    auto same_cell = env.step({1, 6, 1, 6, 0, 0}, kGrasp);
    CHECK(same_cell[4] == 1.0);
    auto too_far = env.step({3, 6, 1, 6, 0, 0}, kGrasp);
    CHECK(too_far[4] == 0.0);
    auto diagonal = env.step({2, 5, 1, 6, 0, 0}, kGrasp);
    CHECK(diagonal[4] == 0.0);
  }
  SUBCASE("release drops on the agent cell, noop does nothing to the agent") {
    auto n = env.step(carrying_at(4, 2, 2), kRelease);
    CHECK(n[4] == 0.0);
    CHECK(n[2] == 4.0);
    CHECK(n[3] == 2.0);
    auto m = env.step({4, 2, 1, 6, 0, 2}, kNoop);
    CHECK(m[0] == 4.0);
    CHECK(m[2] == 1.0);
  }
  SUBCASE("the forklift advances one route cell per step, cyclically") {
    State s = {1, 1, 1, 6, 0, 9};
    CHECK(env.step(s, kNoop)[5] == 0.0);
    CHECK(env.step({1, 1, 1, 6, 0, 3}, kNoop)[5] == 4.0);
  }
}

TEST_CASE("warehouse squeeze passage") {
  Warehouse env;
  REQUIRE(env.squeeze(2, 3));
  CHECK(!env.squeeze(5, 3));  // the wide opening has a free east side
  CHECK(!env.squeeze(2, 2));

  SUBCASE("entering it while carrying knocks the item loose") {
    State carrying = {2, 4, 2, 4, 1, 0};
    auto n = env.step(carrying, kMoveN);
    CHECK(n[0] == 2.0);
    CHECK(n[1] == 3.0);
    CHECK(n[4] == 0.0);
    CHECK(n[2] == 2.0);
    CHECK(n[3] == 3.0);
  }
  SUBCASE("empty-handed passage is free") {
    State s = {2, 4, 1, 6, 0, 0};
    auto n = env.step(s, kMoveN);
    CHECK(n[0] == 2.0);
    CHECK(n[1] == 3.0);
  }
  SUBCASE("re-grasping inside and leaving upward keeps the item") {
    State dropped = {2, 3, 2, 3, 0, 0};
    auto held = env.step(dropped, kGrasp);
    REQUIRE(held[4] == 1.0);
    auto out = env.step(held, kMoveN);
    CHECK(out[4] == 1.0);
    CHECK(out[1] == 2.0);
  }
}

TEST_CASE("warehouse predicates and rewards") {
  Warehouse env;

  SUBCASE("safe is a chebyshev-2 clearance from the forklift") {
    // phase 0 puts the forklift at (3,4)
    CHECK(!env.atom("safe").eval({2, 4, 1, 6, 0, 0}));
    CHECK(!env.atom("safe").eval({4, 5, 1, 6, 0, 0}));
    CHECK(env.atom("safe").eval({2, 1, 1, 6, 0, 0}));
    CHECK(env.atom("safe").eval({1, 5, 1, 6, 0, 0}));
  }
  SUBCASE("item_placed needs the item on the goal cell and free hands") {
    CHECK(env.atom("item_placed").eval({1, 1, 2, 1, 0, 0}));
    CHECK(!env.atom("item_placed").eval({2, 1, 2, 1, 1, 0}));
    CHECK(!env.atom("item_placed").eval({1, 1, 1, 6, 0, 0}));
  }
  SUBCASE("near_item is manhattan-1 without carrying") {
    CHECK(env.atom("near_item").eval({1, 5, 1, 6, 0, 0}));
    CHECK(env.atom("near_item").eval({1, 6, 1, 6, 0, 0}));
    CHECK(!env.atom("near_item").eval({2, 5, 1, 6, 0, 0}));
    CHECK(!env.atom("near_item").eval({3, 3, 3, 3, 1, 0}));
  }
  SUBCASE("move reward pays progress toward the phase-correct target") {
    State empty = {3, 6, 1, 6, 0, 0};
    auto toward = env.step(empty, kMoveW);
    auto away = env.step(empty, kMoveE);
    CHECK(env.reward("move", empty, kMoveW, toward) ==
          doctest::Approx(0.1 - 0.01));
    CHECK(env.reward("move", empty, kMoveE, away) ==
          doctest::Approx(-0.1 - 0.01));

    State carrying = {3, 1, 3, 1, 1, 0};
    auto west = env.step(carrying, kMoveW);  // onto the goal at (2,1)
    CHECK(env.reward("move", carrying, kMoveW, west) ==
          doctest::Approx(0.1 - 0.01));
  }
  SUBCASE("a bump is penalized and never looks like progress") {
    State carrying = {1, 1, 1, 1, 1, 0};
    auto n = env.step(carrying, kMoveW);
    REQUIRE(n[4] == 0.0);
    CHECK(env.reward("move", carrying, kMoveW, n) ==
          doctest::Approx(-0.05 - 0.01));
  }
  SUBCASE("grasp and place events earn their bonus") {
    State near = {1, 5, 1, 6, 0, 0};
    auto grabbed = env.step(near, kGrasp);
    REQUIRE(grabbed[4] == 1.0);
    CHECK(env.reward("grasp", near, kGrasp, grabbed) ==
          doctest::Approx(1.0 + 0.1 - 0.01));

    State at_goal = {2, 1, 2, 1, 1, 0};
    auto placed = env.step(at_goal, kRelease);
    REQUIRE(env.atom("item_placed").eval(placed));
    CHECK(env.reward("place", at_goal, kRelease, placed) ==
          doctest::Approx(1.0 - 0.01));
  }
  SUBCASE("flat reward counts unsatisfied conditions") {
    State done = {1, 1, 2, 1, 0, 0};
    CHECK(env.reward("flat", done, kNoop, done) == 0.0);
    State unsafe_unplaced = {2, 4, 1, 6, 0, 0};
    CHECK(env.reward("flat", done, kNoop, unsafe_unplaced) == -2.0);
  }
  SUBCASE("start sampler yields safe unplaced states with the item home") {
    Rng rng(5);
    auto sampler = env.start_sampler();
    for (int i = 0; i < 200; ++i) {
      auto s = reset(env, sampler, rng);
      CHECK(env.atom("safe").eval(s));
      CHECK(!env.atom("item_placed").eval(s));
      CHECK(s[2] == 1.0);
      CHECK(s[3] == 6.0);
      CHECK(s[4] == 0.0);
    }
  }
}

TEST_CASE("warehouse tree integrates with the region calculus") {
  Warehouse env;
  auto tree = parse_tree(warehouse_tree_text(), env.atoms());
  auto ordering = derive_ordering(tree, OrderingPattern::ImplicitSequence);

  SUBCASE("the implicit-sequence ordering is move, grasp, move, place") {
    REQUIRE(ordering.leaves.size() == 4);
    CHECK(tree.node(ordering.leaves[0]).name == "Move");
    CHECK(tree.node(ordering.leaves[1]).name == "Grasp");
    CHECK(tree.node(ordering.leaves[2]).name == "Move");
    CHECK(tree.node(ordering.leaves[3]).name == "Place");
  }
  SUBCASE("operating regions partition on the full state space") {
    auto report = validate_partition(tree, enumerate_states(env));
    CHECK(report.ok());
  }
  SUBCASE("the rank-1 convergence set is exactly the safe region") {
    auto c1 = convergence_set(tree, ordering, 1);
    auto safe = env.atom("safe");
    for (const auto& s : enumerate_states(env))
      CHECK(c1.eval(s) == safe.eval(s));
  }
  SUBCASE("convergence sets are nested along the ordering") {
    auto c2 = convergence_set(tree, ordering, 2);
    auto c4 = convergence_set(tree, ordering, 4);
    for (const auto& s : enumerate_states(env)) {
      if (c4.eval(s)) CHECK(c2.eval(s));
    }
  }
}
