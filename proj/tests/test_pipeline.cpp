#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cbtrl/oracle.hpp"
#include "cbtrl/pipeline.hpp"
#include "corridor_env.hpp"

using namespace cbtrl;

namespace {

TrainConfig corridor_config() {
  TrainConfig cfg;
  cfg.q = {1.0, 0.9};
  cfg.epsilon = 0.3;
  cfg.episodes_per_rank = 300;
  cfg.eval_every = 100;
  cfg.eval_episodes = 5;
  cfg.gamma_feasibility = 0.9;
  cfg.feasibility_tol = 1e-10;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("cbtrl on the corridor") {
  testutil::Corridor env;
  auto task = testutil::corridor_task(env);
  auto art = run_cbtrl(task, corridor_config());

  SUBCASE("the single rank is constrained and has an estimator") {
    REQUIRE(art.ranks.size() == 1);
    CHECK(art.ranks[0].constrained);
    CHECK(art.ranks[0].controller == "Go");
    REQUIRE(art.policy.estimators.size() == 1);
    REQUIRE(art.policy.estimators[0]);
  }
  SUBCASE("the mask forbids stepping toward the trap from cell 1") {
    auto m = mask(*art.policy.estimators[0], {1.0});
    CHECK(!m.allows(0));
    CHECK(m.allows(1));
    CHECK(m.allows(2));
  }
  SUBCASE("greedy execution reaches the goal without violations") {
    auto report = evaluate(task, art.policy, 20, 99);
    CHECK(report.success_rate() == 1.0);
    CHECK(report.total_violations("safe") == 0);
  }
  SUBCASE("the learning curve is populated with rank-tagged points") {
    REQUIRE(art.curve.size() == 3);
    CHECK(art.curve.front().rank == 1);
    CHECK(art.curve.front().episode == 100);
    CHECK(art.curve.back().episode == 300);
    CHECK(art.curve.back().success_rate == 1.0);
  }
  SUBCASE("training is deterministic in the seed") {
    auto again = run_cbtrl(task, corridor_config());
    CHECK(again.policy.controllers.at("Go")->table() ==
          art.policy.controllers.at("Go")->table());
  }
}

TEST_CASE("baselines on the corridor") {
  testutil::Corridor env;
  auto task = testutil::corridor_task(env);
  auto cfg = corridor_config();

  SUBCASE("btrl learns the task without any estimator") {
    auto art = run_baseline(task, cfg, BaselineKind::BTRL);
    CHECK(art.policy.estimators.empty());
    auto report = evaluate(task, art.policy, 20, 99);
    CHECK(report.success_rate() == 1.0);
  }
  SUBCASE("penalty baseline shares the log schema") {
    auto art = run_baseline(task, cfg, BaselineKind::BTPenalty);
    CHECK(art.curve.size() == 3);
    CHECK(art.ranks.size() == 1);
  }
  SUBCASE("standard rl collapses to a flat single-controller task") {
    auto art = run_baseline(task, cfg, BaselineKind::StandardRL);
    REQUIRE(art.ranks.size() == 1);
    CHECK(art.ranks[0].controller == "Flat");
    CHECK(art.policy.controllers.count("Flat") == 1);
  }
  SUBCASE("post-hoc masking attaches estimators to a trained baseline") {
    auto unmasked = run_baseline(task, cfg, BaselineKind::BTRL);
    auto ref = run_cbtrl(task, cfg);
    auto masked = apply_posthoc_mask(unmasked, estimators_of(ref));
    CHECK(masked.policy.masked());
    auto report = evaluate(task, masked.policy, 20, 99);
    CHECK(report.total_violations("safe") == 0);
  }
}

TEST_CASE("induced initial states") {
  testutil::Corridor env;
  auto task = testutil::corridor_task(env);
  auto art = run_cbtrl(task, corridor_config());
  Rng rng(3);

  SUBCASE("rank 1 is entered at the base distribution") {
    auto s = induce_initial_states(task, art.policy, 1, rng, 10);
    CHECK(s == State{2.0});
  }
  SUBCASE("an unreachable rank reports the cap in its diagnostic") {
    auto stuck = task;
    stuck.base_start = fixed_sampler({4.0});  // starts already successful
    CHECK_THROWS_WITH_AS(
        induce_initial_states(stuck, art.policy, 1, rng, 3),
        doctest::Contains("rank 1"), Error);
  }
}

TEST_CASE("fitted feasibility path") {
  testutil::Corridor env;
  auto task = testutil::corridor_task(env);
  auto cfg = corridor_config();
  cfg.fitted = true;
  cfg.dataset_transitions = 2000;
  cfg.n_features = static_cast<int>(env.state_count());
  cfg.features = one_hot_features([&env](const State& s) { return env.encode(s); });
  cfg.fit.steps = 4000;
  cfg.fit.learning_rate = 0.5;
  cfg.fit.target_sync = 50;

  auto art = run_cbtrl(task, cfg);

  SUBCASE("datasets are recorded with their lineage hash") {
    REQUIRE(art.ranks.size() == 1);
    CHECK(art.ranks[0].dataset_size == 2000);
    CHECK(art.ranks[0].dataset_hash != 0);
    auto again = run_cbtrl(task, cfg);
    CHECK(again.ranks[0].dataset_hash == art.ranks[0].dataset_hash);
  }
  SUBCASE("the fitted mask agrees with the exact tabular one") {
    auto exact_cfg = corridor_config();
    auto exact = run_cbtrl(task, exact_cfg);
    for (StateId s = 1; s < 4; ++s) {
      auto fm = mask(*art.policy.estimators[0], env.decode(s));
      auto tm = mask(*exact.policy.estimators[0], env.decode(s));
      CHECK(fm.allowed == tm.allowed);
    }
  }
  SUBCASE("greedy execution still succeeds cleanly") {
    auto report = evaluate(task, art.policy, 20, 99);
    CHECK(report.success_rate() == 1.0);
    CHECK(report.total_violations("safe") == 0);
  }
}
