// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
//
// Economic-layer tests. The payoff table, utility aggregation, threshold
// interval, trap arithmetic, and the three-player matrix are all checked
// against closed forms or independent brute-force enumeration; the deviation
// probe is exercised both with a scripted stand-in simulator and once against
// the real one.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "prft/gametheory.hpp"
#include "prft/netsim.hpp"

using namespace prft;

namespace {

RunTrace empty_trace(const ScenarioConfig& cfg, std::uint64_t seed = 0) {
  RunTrace tr;
  tr.scenario = cfg.name;
  tr.config_text = canonical_text(cfg);
  tr.config_hash = config_hash(cfg);
  tr.seed = seed;
  return tr;
}

TraceEvent fin(PlayerId actor, Round r, std::uint64_t digest_val, std::int64_t height,
               const std::string& ids) {
  TraceEvent e;
  e.t = 10 * (height + 1);
  e.kind = EventKind::Finalize;
  e.actor = actor;
  e.round = r;
  e.digest = Digest::of(digest_val);
  e.height = height;
  e.note = ids;
  return e;
}

TraceEvent stash(PlayerId actor, PlayerId accused, Round r) {
  TraceEvent e;
  e.t = 5;
  e.kind = EventKind::Stash;
  e.actor = actor;
  e.peer = accused;
  e.round = r;
  return e;
}

TraceEvent expose_sent(PlayerId actor, Round r) {
  TraceEvent e;
  e.t = 4;
  e.kind = EventKind::ExposeSent;
  e.actor = actor;
  e.round = r;
  return e;
}

ScenarioConfig plain_config(std::uint32_t rounds = 4) {
  ScenarioConfig cfg;
  cfg.name = "gt";
  cfg.n = 5;
  cfg.rounds = rounds;
  validate_config(cfg);
  return cfg;
}

} // namespace

TEST_CASE("stake payoffs by state and exposure tier") {
  const double a = 1.0;
  // Honest execution pays nothing at any tier.
  for (int theta = 0; theta <= 3; ++theta) {
    CHECK(payoff_f(SystemStateLabel::HonestExec, theta, a) == 0.0);
  }
  // No-progress profits only the widest exposure tier.
  CHECK(payoff_f(SystemStateLabel::NP, 3, a) == a);
  CHECK(payoff_f(SystemStateLabel::NP, 2, a) == -a);
  CHECK(payoff_f(SystemStateLabel::NP, 1, a) == -a);
  CHECK(payoff_f(SystemStateLabel::NP, 0, a) == -a);
  // Censored progress profits tiers 2 and up.
  CHECK(payoff_f(SystemStateLabel::CP, 3, a) == a);
  CHECK(payoff_f(SystemStateLabel::CP, 2, a) == a);
  CHECK(payoff_f(SystemStateLabel::CP, 1, a) == -a);
  CHECK(payoff_f(SystemStateLabel::CP, 0, a) == -a);
  // A fork profits every tier above zero.
  CHECK(payoff_f(SystemStateLabel::Fork, 3, a) == a);
  CHECK(payoff_f(SystemStateLabel::Fork, 2, a) == a);
  CHECK(payoff_f(SystemStateLabel::Fork, 1, a) == a);
  CHECK(payoff_f(SystemStateLabel::Fork, 0, a) == -a);
  // The stake scales linearly.
  CHECK(payoff_f(SystemStateLabel::Fork, 3, 2.5) == 2.5);
  CHECK(payoff_f(SystemStateLabel::NP, 1, 2.5) == -2.5);
}

TEST_CASE("trace digestion: who finalized what, who was fined when") {
  ScenarioConfig cfg = plain_config();
  cfg.rational = {4};
  validate_config(cfg);

  RunTrace tr = empty_trace(cfg);
  tr.events.push_back(fin(0, 0, 11, 0, "ids=1,2"));
  tr.events.push_back(fin(1, 0, 11, 0, "ids=1,2"));
  tr.events.push_back(fin(4, 1, 13, 1, "ids=9"));  // rational actor: ignored
  tr.events.push_back(stash(0, 4, 3));
  tr.events.push_back(stash(1, 4, 1)); // earlier honest stash wins
  tr.events.push_back(stash(4, 2, 0)); // non-honest stash: ignored
  tr.events.push_back(expose_sent(2, 1));

  TraceView v = build_view(tr);
  CHECK(v.honest == std::set<PlayerId>{0, 1, 2, 3});
  CHECK(v.any_honest_final);
  CHECK(v.finals_in_round.at(0) == 2);
  CHECK(v.finals_in_round.count(1) == 0);
  CHECK(v.finalized_ids == std::set<std::uint64_t>{1, 2});
  REQUIRE(first_stash_round(v, 4).has_value());
  CHECK(*first_stash_round(v, 4) == 1);
  CHECK_FALSE(first_stash_round(v, 2).has_value());
  CHECK(v.expose_rounds.count(1) == 1);
  CHECK(v.expose_rounds.count(3) == 1);
  CHECK_FALSE(v.fork);
}

TEST_CASE("round and whole-run classification") {
  SECTION("clean finalization is honest execution") {
    ScenarioConfig cfg = plain_config(2);
    RunTrace tr = empty_trace(cfg);
    tr.events.push_back(fin(0, 0, 11, 0, "ids=1"));
    tr.events.push_back(fin(0, 1, 12, 1, "ids=2"));
    TraceView v = build_view(tr);
    CHECK(classify_round(v, 0) == SystemStateLabel::HonestExec);
    CHECK(classify_round(v, 1) == SystemStateLabel::HonestExec);
    auto verdict = classify_state(v);
    CHECK(verdict.label == SystemStateLabel::HonestExec);
    CHECK_FALSE(verdict.provisional);
  }

  SECTION("no finalization anywhere is no-progress") {
    ScenarioConfig cfg = plain_config(2);
    RunTrace tr = empty_trace(cfg);
    TraceView v = build_view(tr);
    CHECK(classify_round(v, 0) == SystemStateLabel::NP);
    CHECK(classify_round(v, 1) == SystemStateLabel::NP);
    CHECK(classify_state(v).label == SystemStateLabel::NP);
  }

  SECTION("a starved tagged transaction makes progress censored") {
    ScenarioConfig cfg = plain_config(3);
    cfg.censored = 1;
    validate_config(cfg);
    RunTrace tr = empty_trace(cfg);
    tr.events.push_back(fin(0, 0, 21, 0, "ids=2,3"));
    tr.events.push_back(fin(0, 1, 22, 1, "ids=4,5"));
    tr.events.push_back(fin(0, 2, 23, 2, "ids=1,6")); // the tagged id finally lands
    TraceView v = build_view(tr);
    CHECK(classify_round(v, 0) == SystemStateLabel::CP);
    CHECK(classify_round(v, 1) == SystemStateLabel::CP);
    CHECK(classify_round(v, 2) == SystemStateLabel::HonestExec);
    CHECK(classify_state(v).label == SystemStateLabel::HonestExec);

    // Without the last seal the whole run reads as censored.
    tr.events.pop_back();
    TraceView v2 = build_view(tr);
    CHECK(classify_round(v2, 2) == SystemStateLabel::NP); // nothing sealed there at all
    CHECK(classify_state(v2).label == SystemStateLabel::CP);
  }

  SECTION("two digests on one height is a fork") {
    ScenarioConfig cfg = plain_config(2);
    RunTrace tr = empty_trace(cfg);
    tr.events.push_back(fin(0, 0, 31, 0, "ids=1"));
    tr.events.push_back(fin(1, 0, 32, 0, "ids=2")); // same height, other digest
    TraceView v = build_view(tr);
    CHECK(v.fork);
    CHECK(classify_round(v, 0) == SystemStateLabel::Fork);
    CHECK(classify_state(v).label == SystemStateLabel::Fork);
  }

  SECTION("an exposure round counts as honest execution, not no-progress") {
    ScenarioConfig cfg = plain_config(2);
    RunTrace tr = empty_trace(cfg);
    tr.events.push_back(expose_sent(0, 0));
    tr.events.push_back(stash(0, 3, 0));
    tr.events.push_back(fin(0, 1, 41, 0, "ids=1"));
    TraceView v = build_view(tr);
    CHECK(classify_round(v, 0) == SystemStateLabel::HonestExec);
    CHECK(classify_round(v, 1) == SystemStateLabel::HonestExec);
  }

  SECTION("truncated runs classify provisionally") {
    ScenarioConfig cfg = plain_config(2);
    RunTrace tr = empty_trace(cfg);
    tr.truncated = true;
    CHECK(classify_state(tr).provisional);
  }
}

TEST_CASE("discounted utility closed forms") {
  const UtilityParams up{1.0, 10.0, 0.5, 3};

  SECTION("an honest run is worth exactly zero") {
    ScenarioConfig cfg = plain_config(4);
    RunTrace tr = empty_trace(cfg);
    for (Round r = 0; r < 4; ++r) tr.events.push_back(fin(0, r, 50 + r, r, "ids=1"));
    TraceView v = build_view(tr);
    for (PlayerId p = 0; p < 5; ++p) {
      CHECK(discounted_utility(v, up, p) == 0.0);
    }
  }

  SECTION("perpetual no-progress at the top tier is worth the full geometric sum") {
    ScenarioConfig cfg = plain_config(3);
    RunTrace tr = empty_trace(cfg);
    TraceView v = build_view(tr);
    // (1 + d + d^2) + d^3/(1-d) telescopes to 1/(1-d) = 2.
    CHECK(discounted_utility(v, up, 0) == Catch::Approx(2.0).margin(1e-12));
    UtilityParams low = up;
    low.theta = 1; // the same outage hurts a narrow-exposure player
    CHECK(discounted_utility(v, low, 0) == Catch::Approx(-2.0).margin(1e-12));
  }

  SECTION("a deposit loss is a one-off hit, discounted to its round") {
    ScenarioConfig cfg = plain_config(4);
    cfg.rational = {4};
    validate_config(cfg);
    RunTrace tr = empty_trace(cfg);
    for (Round r = 0; r < 4; ++r) {
      if (r == 1) {
        tr.events.push_back(expose_sent(0, 1));
        tr.events.push_back(stash(0, 4, 1));
      } else {
        tr.events.push_back(fin(0, r, 60 + r, r, "ids=1"));
      }
    }
    TraceView v = build_view(tr);
    UtilityParams upd{1.0, 10.0, 0.9, 3};
    CHECK(discounted_utility(v, upd, 4) == Catch::Approx(-10.0 * 0.9).margin(1e-12));
    CHECK(discounted_utility(v, upd, 0) == 0.0); // bystanders unaffected
    CHECK(round_utility(v, upd, 4, 1) == -10.0);
    CHECK(round_utility(v, upd, 4, 2) == 0.0); // the fine is not recurring
  }

  SECTION("censored rounds pay tier two until the backlog clears") {
    ScenarioConfig cfg = plain_config(4);
    cfg.censored = 1;
    validate_config(cfg);
    RunTrace tr = empty_trace(cfg);
    tr.events.push_back(fin(0, 0, 70, 0, "ids=2"));
    tr.events.push_back(fin(0, 1, 71, 1, "ids=3"));
    tr.events.push_back(fin(0, 2, 72, 2, "ids=1"));
    tr.events.push_back(fin(0, 3, 73, 3, "ids=4"));
    TraceView v = build_view(tr);
    UtilityParams up2{1.0, 10.0, 0.5, 2};
    // CP rounds 0 and 1 pay +1 each, then honest execution pays nothing.
    CHECK(discounted_utility(v, up2, 0) == Catch::Approx(1.0 + 0.5).margin(1e-12));
  }

  SECTION("parameters lift straight out of a config") {
    ScenarioConfig cfg = plain_config();
    cfg.alpha = 2.0;
    cfg.collateral = 25.0;
    cfg.discount = 0.8;
    cfg.theta = 2;
    UtilityParams got = UtilityParams::from_config(cfg);
    CHECK(got.alpha == 2.0);
    CHECK(got.collateral == 25.0);
    CHECK(got.discount == 0.8);
    CHECK(got.theta == 2);
  }
}

TEST_CASE("vote-threshold interval: closed form, fixtures, and enumeration") {
  SECTION("fixtures") {
    auto b1 = tau_bounds(10, 2);
    REQUIRE(b1.has_value());
    CHECK(b1->first == 7);
    CHECK(b1->second == 8);

    auto b2 = tau_bounds(5, 1);
    REQUIRE(b2.has_value());
    CHECK(b2->first == 4);
    CHECK(b2->second == 4);

    CHECK_FALSE(tau_bounds(4, 2).has_value()); // no workable threshold at all
  }

  SECTION("the two attacks bracket the interval") {
    CHECK(liveness_attack_exists(5, 1, 5));
    CHECK_FALSE(liveness_attack_exists(5, 1, 4));
    CHECK(agreement_attack_exists(5, 1, 3)); // split 2/2 plus one double-voter
    CHECK_FALSE(agreement_attack_exists(5, 1, 4));
    CHECK(agreement_attack_exists(10, 2, 6));
    CHECK_FALSE(agreement_attack_exists(10, 2, 7));
  }

  SECTION("closed form matches exhaustive enumeration") {
    for (std::uint32_t n = 1; n <= 14; ++n) {
      for (std::uint32_t t0 = 0; t0 <= n / 2; ++t0) {
        INFO("n=" << n << " t0=" << t0);
        CHECK(tau_bounds(n, t0) == brute_tau_bounds(n, t0));
      }
    }
  }
}

TEST_CASE("trap arithmetic: minimum defectors to spring it") {
  SECTION("fixtures") {
    CHECK(trap_min_baiters(10, 3, 2, 4) == 2);
    CHECK(trap_min_baiters(7, 2, 1, 3) == 1);
    CHECK(trap_min_baiters(10, 3, 3, 2) == 1);
    CHECK(trap_min_baiters(10, 1, 0, 2) == 0); // small coalitions cannot fork anyway
  }

  SECTION("formula matches split enumeration across the grid") {
    for (int n = 4; n <= 12; ++n) {
      for (int t0 = 1; t0 <= (n - 1) / 2; ++t0) {
        for (int t = 0; t <= t0; ++t) {
          for (int k = 0; k + t <= n; ++k) {
            INFO("n=" << n << " t0=" << t0 << " t=" << t << " k=" << k);
            int brute = brute_trap_min_baiters(n, t0, t, k);
            // Past full defection the formula has nothing left to say.
            CHECK(std::min(trap_min_baiters(n, t0, t, k), k + 1) == brute);
          }
        }
      }
    }
  }
}

TEST_CASE("the three-player stake matrix") {
  SECTION("spot cells") {
    CHECK(Table3::payoff[0][0][0][0] == 1);
    CHECK(Table3::payoff[0][0][0][2] == 1);
    CHECK(Table3::payoff[0][1][1][0] == -2);
    CHECK(Table3::payoff[1][1][0][2] == -2);
    CHECK(Table3::payoff[1][1][1][0] == 0);
  }

  SECTION("exactly two pure equilibria: all-cooperate and all-defect") {
    auto eq = Table3::pure_nash();
    REQUIRE(eq.size() == 2);
    CHECK(eq[0] == std::array<int, 3>{0, 0, 0});
    CHECK(eq[1] == std::array<int, 3>{1, 1, 1});
    CHECK_FALSE(Table3::is_pure_nash(0, 0, 1));
    CHECK_FALSE(Table3::is_pure_nash(1, 0, 1));
  }

  SECTION("cooperation Pareto-dominates joint defection") {
    CHECK(Table3::pareto_dominates({0, 0, 0}, {1, 1, 1}));
    CHECK_FALSE(Table3::pareto_dominates({1, 1, 1}, {0, 0, 0}));
    // Dominance needs a strict gain somewhere.
    CHECK_FALSE(Table3::pareto_dominates({0, 0, 0}, {0, 0, 0}));
  }
}

TEST_CASE("deviation probe plumbing with a scripted simulator") {
  ScenarioConfig cfg = plain_config(4);
  cfg.rational = {4};
  cfg.collateral = 10.0;
  cfg.discount = 0.9;
  validate_config(cfg);

  auto scripted = [](const ScenarioConfig& c, std::uint64_t seed) {
    RunTrace tr;
    tr.config_text = canonical_text(c);
    tr.config_hash = config_hash(c);
    tr.seed = seed;
    bool deviating = c.player_strategy.count(4) &&
                     c.player_strategy.at(4) != StrategyKind::Honest;
    for (Round r = 0; r < c.rounds; ++r) {
      if (deviating && r == 1) {
        tr.events.push_back(expose_sent(0, 1));
        tr.events.push_back(stash(0, 4, 1));
      } else {
        tr.events.push_back(fin(0, r, 90 + r, r, "ids=1"));
      }
    }
    return tr;
  };

  auto results = dsic_probe(cfg, 4, StrategyKind::DualSign, {0, 1, 2}, scripted);
  REQUIRE(results.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(results[i].seed == i);
    CHECK(results[i].u_honest == 0.0);
    CHECK(results[i].u_deviation == Catch::Approx(-9.0).margin(1e-12));
    REQUIRE(results[i].stash_round.has_value());
    CHECK(*results[i].stash_round == 1);
  }
}

TEST_CASE("deviation probe against the real simulator: the deviation only fines "
          "the deviator") {
  // One tolerated double-signer is already at work; the probed player either
  // stays honest (attack stays inside the budget, nothing happens) or joins
  // in (the budget is breached and both deposits burn, the probed player's
  // in round one).
  ScenarioConfig cfg;
  cfg.name = "probe";
  cfg.n = 5;
  cfg.rounds = 4;
  cfg.byzantine = {2};
  cfg.byz_strategy = StrategyKind::DualSign;
  cfg.rational = {3};
  cfg.ds_rounds = {1};
  cfg.collateral = 10.0;
  cfg.discount = 0.9;
  cfg.theta = 3;
  validate_config(cfg);

  auto results = dsic_probe(cfg, 3, StrategyKind::DualSign, {0, 1},
                            [](const ScenarioConfig& c, std::uint64_t seed) {
                              return simulate(c, seed);
                            });
  REQUIRE(results.size() == 2);
  for (const auto& r : results) {
    CHECK(std::abs(r.u_honest) < 1e-9);
    CHECK(std::abs(r.u_deviation - (-10.0 * 0.9)) < 1e-9);
    REQUIRE(r.stash_round.has_value());
    CHECK(*r.stash_round == 1);
  }
}
