// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "prft/config.hpp"
#include "prft/core.hpp"
#include "prft/trace.hpp"

namespace prft {

// ---------------------------------------------------------------------------
// Per-round system states and the stake payoff table
// ---------------------------------------------------------------------------
//
// Each round lands in one of four system states: honest execution, no
// progress (nothing finalized), censored progress (blocks land but a targeted
// transaction is starved), or a fork. A player's per-round payoff depends on
// that state and on the player's exposure tier theta — how much of the
// player's outside position profits from degraded consensus. Tier 3 profits
// from any degradation, tier 0 from none; honest execution pays nobody
// anything. On top of the state payoff, a player loses its entire deposit L
// in the round where a fraud proof first confiscates it.
//
// A round that ended in a fraud exposure counts as honest execution, not as
// no-progress: the protocol did exactly what it was designed to do, and the
// guilty parties' losses are booked through the deposit, not the state.

inline double payoff_f(SystemStateLabel s, int theta, double alpha) {
  if (s == SystemStateLabel::HonestExec) return 0.0;
  int severity = s == SystemStateLabel::NP ? 1 : s == SystemStateLabel::CP ? 2 : 3;
  return severity >= 4 - theta ? alpha : -alpha;
}

struct UtilityParams {
  double alpha = 1.0;
  double collateral = 10.0; // L; sensible parameterizations keep L > alpha/(1-discount)
  double discount = 0.9;
  int theta = 3;

  static UtilityParams from_config(const ScenarioConfig& c) {
    return {c.alpha, c.collateral, c.discount, c.theta};
  }
};

// ---------------------------------------------------------------------------
// Trace digestion
// ---------------------------------------------------------------------------
//
// Everything the economic layer needs, extracted from a run trace once:
// which honest replica finalized what and when, which rounds ended in an
// exposure, who lost a deposit first and in which round, and how far the
// censored transactions got.

struct TraceView {
  ScenarioConfig cfg;
  std::set<PlayerId> honest;
  bool truncated = false;
  std::map<Round, int> finals_in_round; // honest Finalize events labeled r
  std::set<Round> fork_rounds;
  bool fork = false;
  std::set<Round> expose_rounds;                // honest exposure/stash activity
  std::map<PlayerId, Round> first_stash;        // accused -> earliest honest stash round
  std::set<std::uint64_t> censored_ids;
  std::map<Round, bool> censored_pending_after; // some censored tx still missing after r
  bool any_honest_final = false;
  std::set<std::uint64_t> finalized_ids;        // across all honest finals
};

namespace detail {

inline std::set<std::uint64_t> parse_id_note(const std::string& note) {
  std::set<std::uint64_t> out;
  auto eq = note.find('=');
  std::size_t i = eq == std::string::npos ? 0 : eq + 1;
  while (i < note.size()) {
    std::size_t j = note.find(',', i);
    if (j == std::string::npos) j = note.size();
    if (j > i) out.insert(std::stoull(note.substr(i, j - i)));
    i = j + 1;
  }
  return out;
}

} // namespace detail

inline TraceView build_view(const RunTrace& tr) {
  TraceView v;
  v.cfg = tr.config();
  v.truncated = tr.truncated;
  for (PlayerId p = 0; p < v.cfg.n; ++p) {
    if (v.cfg.role_of(p).role == Role::Honest) v.honest.insert(p);
  }
  for (std::uint32_t i = 0; i < v.cfg.censored; ++i) v.censored_ids.insert(i + 1);

  std::map<std::int64_t, std::set<std::uint64_t>> height_digests;
  std::map<Round, std::set<std::uint64_t>> ids_by_round;
  for (const auto& ev : tr.events) {
    bool honest_actor = v.honest.count(ev.actor) != 0;
    switch (ev.kind) {
      case EventKind::Finalize:
        if (honest_actor) {
          v.any_honest_final = true;
          v.finals_in_round[ev.round]++;
          if (ev.digest) height_digests[ev.height].insert(ev.digest->value);
          auto ids = detail::parse_id_note(ev.note);
          ids_by_round[ev.round].insert(ids.begin(), ids.end());
          v.finalized_ids.insert(ids.begin(), ids.end());
        }
        break;
      case EventKind::ExposeSent:
      case EventKind::Stash:
        if (honest_actor) {
          v.expose_rounds.insert(ev.round);
          if (ev.kind == EventKind::Stash && ev.peer >= 0) {
            auto p = static_cast<PlayerId>(ev.peer);
            auto it = v.first_stash.find(p);
            if (it == v.first_stash.end() || ev.round < it->second) v.first_stash[p] = ev.round;
          }
        }
        break;
      default:
        break;
    }
  }
  // Fork rounds: a finalize that lands on a height carrying two digests.
  for (const auto& ev : tr.events) {
    if (ev.kind != EventKind::Finalize || !v.honest.count(ev.actor) || !ev.digest) continue;
    if (height_digests[ev.height].size() >= 2) {
      v.fork = true;
      v.fork_rounds.insert(ev.round);
    }
  }
  // Censored backlog after each round.
  std::set<std::uint64_t> seen;
  bool pending = !v.censored_ids.empty();
  for (Round r = 0; r < v.cfg.rounds; ++r) {
    auto it = ids_by_round.find(r);
    if (it != ids_by_round.end()) seen.insert(it->second.begin(), it->second.end());
    if (pending) {
      pending = !std::includes(seen.begin(), seen.end(), v.censored_ids.begin(),
                               v.censored_ids.end());
    }
    v.censored_pending_after[r] = pending;
  }
  return v;
}

inline SystemStateLabel classify_round(const TraceView& v, Round r) {
  if (v.fork_rounds.count(r)) return SystemStateLabel::Fork;
  bool finals = v.finals_in_round.count(r) != 0;
  if (!finals && !v.expose_rounds.count(r)) return SystemStateLabel::NP;
  auto it = v.censored_pending_after.find(r);
  if (it != v.censored_pending_after.end() && it->second) return SystemStateLabel::CP;
  return SystemStateLabel::HonestExec;
}

struct StateVerdict {
  SystemStateLabel label = SystemStateLabel::HonestExec;
  bool provisional = false; // the run was truncated, so absence is not proof
};

// Whole-run classification, strongest condition first.
inline StateVerdict classify_state(const TraceView& v) {
  StateVerdict out;
  out.provisional = v.truncated;
  if (v.fork) {
    out.label = SystemStateLabel::Fork;
  } else if (!v.any_honest_final) {
    out.label = SystemStateLabel::NP;
  } else {
    bool censored_left = false;
    for (auto id : v.censored_ids) {
      if (!v.finalized_ids.count(id)) censored_left = true;
    }
    out.label = censored_left ? SystemStateLabel::CP : SystemStateLabel::HonestExec;
  }
  return out;
}

inline StateVerdict classify_state(const RunTrace& tr) { return classify_state(build_view(tr)); }

// ---------------------------------------------------------------------------
// Utilities
// ---------------------------------------------------------------------------

inline std::optional<Round> first_stash_round(const TraceView& v, PlayerId player) {
  auto it = v.first_stash.find(player);
  if (it == v.first_stash.end()) return std::nullopt;
  return it->second;
}

inline double round_utility(const TraceView& v, const UtilityParams& up, PlayerId player,
                            Round r) {
  double u = payoff_f(classify_round(v, r), up.theta, up.alpha);
  auto stash = first_stash_round(v, player);
  if (stash && *stash == r) u -= up.collateral;
  return u;
}

// Discounted sum over the configured horizon, closed with a geometric tail
// that repeats the final round's state payoff (one-off deposit losses are not
// part of the tail).
inline double discounted_utility(const TraceView& v, const UtilityParams& up,
                                 PlayerId player) {
  const Round R = v.cfg.rounds;
  double u = 0.0, w = 1.0;
  for (Round r = 0; r < R; ++r) {
    u += w * round_utility(v, up, player, r);
    w *= up.discount;
  }
  double tail_state = payoff_f(classify_round(v, R - 1), up.theta, up.alpha);
  u += w * tail_state / (1.0 - up.discount);
  return u;
}

inline double discounted_utility(const RunTrace& tr, const UtilityParams& up,
                                 PlayerId player) {
  return discounted_utility(build_view(tr), up, player);
}

// ---------------------------------------------------------------------------
// Vote-threshold interval
// ---------------------------------------------------------------------------
//
// A quorum threshold tau is workable only if withholding by t0 players cannot
// stall it (tau <= n - t0) and a split vote boosted by t0 double-voters
// cannot reach it on both sides (tau > floor((n + t0) / 2)). The interval can
// be empty for infeasible (n, t0) combinations.

inline std::optional<std::pair<std::uint32_t, std::uint32_t>> tau_bounds(std::uint32_t n,
                                                                         std::uint32_t t0) {
  std::uint32_t lo = (n + t0) / 2 + 1;
  std::uint32_t hi = n - t0;
  if (lo > hi) return std::nullopt;
  return std::pair(lo, hi);
}

// The two attack constructions, checked by enumeration rather than algebra.
inline bool liveness_attack_exists(std::uint32_t n, std::uint32_t t0, std::uint32_t tau) {
  return n - t0 < tau; // the t0 withholders silence everything above this
}

inline bool agreement_attack_exists(std::uint32_t n, std::uint32_t t0, std::uint32_t tau) {
  std::uint32_t h = n - t0;
  for (std::uint32_t a = 0; a <= h; ++a) {
    std::uint32_t b = h - a;
    // Every split of the t0 double-voters between the sides, including
    // duplicated votes on both.
    for (std::uint32_t both = 0; both <= t0; ++both) {
      for (std::uint32_t only_a = 0; only_a + both <= t0; ++only_a) {
        std::uint32_t only_b = t0 - both - only_a;
        if (a + both + only_a >= tau && b + both + only_b >= tau) return true;
      }
    }
  }
  return false;
}

inline std::optional<std::pair<std::uint32_t, std::uint32_t>> brute_tau_bounds(
    std::uint32_t n, std::uint32_t t0) {
  std::optional<std::uint32_t> lo, hi;
  for (std::uint32_t tau = 1; tau <= n; ++tau) {
    bool ok = !liveness_attack_exists(n, t0, tau) && !agreement_attack_exists(n, t0, tau);
    if (ok) {
      if (!lo) lo = tau;
      hi = tau;
    }
  }
  if (!lo) return std::nullopt;
  return std::pair(*lo, *hi);
}

// ---------------------------------------------------------------------------
// Trap: minimum baiters
// ---------------------------------------------------------------------------
//
// A collusion of k rational players and t tolerated faults attempts a fork by
// splitting the n - k - t outsiders and voting with both sides. m of the k
// rational members defect and merely collect the whistleblower reward. The
// fork goes through only if both sides still reach the quorum n - t0 with
// the remaining k - m + t duplicated votes; the minimum m that kills every
// split is floor((2*t0 + k + t - n) / 2) + 1, clamped at zero.

inline int trap_min_baiters(int n, int t0, int t, int k) {
  int d = 2 * t0 + k + t - n;
  // floor division that stays correct for negative numerators
  int fl = d >= 0 ? d / 2 : -((-d + 1) / 2);
  return std::max(0, fl + 1);
}

// Enumerates splits directly; returns k + 1 when even full defection cannot
// stop the fork (the byzantine contingent alone suffices).
inline int brute_trap_min_baiters(int n, int t0, int t, int k) {
  int h = n - k - t; // outsiders available for splitting
  auto fork_possible = [&](int m) {
    int dup = (k - m) + t;
    for (int a = 0; a <= h; ++a) {
      int b = h - a;
      if (a + dup >= n - t0 && b + dup >= n - t0) return true;
    }
    return false;
  };
  for (int m = 0; m <= k; ++m) {
    if (!fork_possible(m)) return m;
  }
  return k + 1;
}

// ---------------------------------------------------------------------------
// The three-player stake matrix
// ---------------------------------------------------------------------------
//
// A compact worked example showing why accountable consensus needs its
// incentives checked as a game and not per player: the matrix below has
// exactly two pure equilibria, one where everyone cooperates and one where
// everyone defects, and the cooperative one Pareto-dominates.

struct Table3 {
  // payoff[i][j][k] = utilities of (P1, P2, P3) when P1 plays i, P2 plays j,
  // P3 plays k; action 0 is the cooperative action.
  static constexpr double payoff[2][2][2][3] = {
      {{{1, 1, 1}, {1, 1, 0}}, {{1, 0, 1}, {-2, 2, 2}}},
      {{{0, 1, 1}, {1, -2, 1}}, {{2, 2, -2}, {0, 0, 0}}},
  };

  static bool is_pure_nash(int i, int j, int k) {
    if (payoff[1 - i][j][k][0] > payoff[i][j][k][0]) return false;
    if (payoff[i][1 - j][k][1] > payoff[i][j][k][1]) return false;
    if (payoff[i][j][1 - k][2] > payoff[i][j][k][2]) return false;
    return true;
  }

  static std::vector<std::array<int, 3>> pure_nash() {
    std::vector<std::array<int, 3>> out;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        for (int k = 0; k < 2; ++k) {
          if (is_pure_nash(i, j, k)) out.push_back({i, j, k});
        }
      }
    }
    return out;
  }

  // True when profile x weakly dominates y with at least one strict gain.
  static bool pareto_dominates(const std::array<int, 3>& x, const std::array<int, 3>& y) {
    bool strict = false;
    for (int c = 0; c < 3; ++c) {
      double ux = payoff[x[0]][x[1]][x[2]][c];
      double uy = payoff[y[0]][y[1]][y[2]][c];
      if (ux < uy) return false;
      if (ux > uy) strict = true;
    }
    return strict;
  }
};

// ---------------------------------------------------------------------------
// Deviation probe
// ---------------------------------------------------------------------------
//
// Strategy-proofness, checked the only way a simulator can: run the same
// (config, seed) twice, once with the probed player honest and once with the
// deviation, everyone else's strategy pinned in both runs, and compare the
// player's discounted utilities.

struct ProbeResult {
  std::uint64_t seed = 0;
  double u_honest = 0.0;
  double u_deviation = 0.0;
  std::optional<Round> stash_round; // from the deviation run
};

template <typename SimulateFn>
inline std::vector<ProbeResult> dsic_probe(const ScenarioConfig& cfg, PlayerId player,
                                           StrategyKind deviation,
                                           const std::vector<std::uint64_t>& seeds,
                                           SimulateFn&& simulate_fn) {
  ScenarioConfig base = cfg;
  base.player_strategy[player] = StrategyKind::Honest;
  validate_config(base);
  ScenarioConfig dev = cfg;
  dev.player_strategy[player] = deviation;
  validate_config(dev);
  UtilityParams up = UtilityParams::from_config(cfg);
  std::vector<ProbeResult> out;
  for (std::uint64_t seed : seeds) {
    TraceView vb = build_view(simulate_fn(base, seed));
    TraceView vd = build_view(simulate_fn(dev, seed));
    ProbeResult r;
    r.seed = seed;
    r.u_honest = discounted_utility(vb, up, player);
    r.u_deviation = discounted_utility(vd, up, player);
    r.stash_round = first_stash_round(vd, player);
    out.push_back(r);
  }
  return out;
}

} // namespace prft
