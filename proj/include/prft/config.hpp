// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "prft/core.hpp"
#include "prft/crypto.hpp"

namespace prft {

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

enum class StrategyKind : std::uint8_t {
  Honest = 0, // follow the protocol exactly
  Abstain,    // stay silent in consensus phases
  DualSign,   // coordinated double-signing across a network split
  Censor,     // leaders drop tagged transactions; stall under honest leaders
  Equivocate, // leader sends two different proposals
  VcStorm,    // honest play plus spurious view-change floods
};

inline const char* to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::Honest: return "honest";
    case StrategyKind::Abstain: return "abstain";
    case StrategyKind::DualSign: return "dual_sign";
    case StrategyKind::Censor: return "censor";
    case StrategyKind::Equivocate: return "equivocate";
    case StrategyKind::VcStorm: return "vc_storm";
  }
  return "?";
}

inline std::optional<StrategyKind> strategy_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(StrategyKind::VcStorm); ++i) {
    auto k = static_cast<StrategyKind>(i);
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

struct StrategyParams {
  StrategyKind kind = StrategyKind::Honest;
  // Abstain: also stay silent during view changes (total silence). Off by
  // default: a merely withholding player still answers view changes, which is
  // what lets the system limp from round to round instead of freezing.
  bool mute_view_change = false;
  // DualSign: the two target groups and the rounds in which the attack runs.
  std::vector<PlayerId> group_a, group_b;
  std::vector<Round> ds_rounds;
};

// ---------------------------------------------------------------------------
// Network model
// ---------------------------------------------------------------------------

enum class NetKind : std::uint8_t { Synchronous = 0, PartiallySynchronous, Asynchronous };

inline const char* to_string(NetKind k) {
  switch (k) {
    case NetKind::Synchronous: return "synchronous";
    case NetKind::PartiallySynchronous: return "partial";
    case NetKind::Asynchronous: return "asynchronous";
  }
  return "?";
}

struct DelayModel {
  NetKind kind = NetKind::Synchronous;
  Tick bound = 10;     // max delay (after stabilization, for the partial model)
  Tick gst = 0;        // stabilization time (partial model only)
  Tick pre_bound = 100; // delay cap before stabilization (partial model only)
};

// During [start, end] the listed groups can only exchange messages within
// their own group: a message crossing listed groups is held until the
// interval ends. Players in no listed group communicate unrestricted.
struct PartitionInterval {
  Tick start = 0;
  Tick end = 0;
  std::vector<std::vector<PlayerId>> groups;
};

struct PartitionSchedule {
  std::vector<PartitionInterval> intervals;

  // Group index of p in the interval active at time t, if any.
  std::optional<std::pair<const PartitionInterval*, int>> lookup(Tick t,
                                                                 PlayerId p) const {
    for (const auto& iv : intervals) {
      if (t < iv.start || t > iv.end) continue;
      for (std::size_t g = 0; g < iv.groups.size(); ++g) {
        for (PlayerId q : iv.groups[g]) {
          if (q == p) return std::pair(&iv, static_cast<int>(g));
        }
      }
      return std::pair(&iv, -1); // interval active but p unlisted
    }
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

struct ScenarioConfig {
  std::string name = "scenario";

  // System size and fault budget. t0 < 0 means "derive the default",
  // ceil(n/4) - 1, the largest budget the accountability analysis tolerates.
  std::uint32_t n = 5;
  std::int64_t t0 = -1;

  Round rounds = 10;
  std::vector<std::uint64_t> seeds; // empty means the default 0..19
  Tick max_ticks = 200000;

  DelayModel delay;
  Tick timeout = 0; // per-phase view-change timeout; 0 means 4 * delay.bound

  std::uint16_t kappa = kDefaultKappa;

  // Workload: a shared mempool of num_txs transactions of tx_bytes each; the
  // first `censored` of them carry the censorship tag; blocks take up to
  // block_size transactions.
  std::uint32_t block_size = 4;
  std::uint32_t num_txs = 64;
  std::uint32_t tx_bytes = 128;
  std::uint32_t censored = 0;
  std::uint32_t cr_window = 3; // rounds a censored tx may wait before it counts as censored

  // Utility model.
  double alpha = 1.0;      // per-round reward of honest execution
  double collateral = 10.0; // stake L posted by every player
  double discount = 0.9;   // per-round discount factor
  int theta = 3;           // preference type of rational players

  bool strict_step5 = false; // require n-t0+1 view-change certificates to advance

  std::vector<PlayerId> byzantine;
  std::vector<PlayerId> rational;
  StrategyKind byz_strategy = StrategyKind::DualSign;
  StrategyKind rat_strategy = StrategyKind::Honest;
  std::map<PlayerId, StrategyKind> player_strategy;

  bool mute_view_change = false;
  std::vector<PlayerId> ds_group_a, ds_group_b;
  std::vector<Round> ds_rounds;

  PartitionSchedule partitions;

  // ---- derived accessors -------------------------------------------------

  std::uint32_t fault_budget() const {
    if (t0 >= 0) return static_cast<std::uint32_t>(t0);
    return (n + 3) / 4 - 1; // ceil(n/4) - 1
  }
  std::uint32_t quorum() const { return n - fault_budget(); }
  Tick timeout_or_default() const { return timeout ? timeout : 4 * delay.bound; }
  std::vector<std::uint64_t> seeds_or_default() const {
    if (!seeds.empty()) return seeds;
    std::vector<std::uint64_t> out(20);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }

  bool is_byzantine(PlayerId p) const {
    return std::find(byzantine.begin(), byzantine.end(), p) != byzantine.end();
  }
  bool is_rational(PlayerId p) const {
    return std::find(rational.begin(), rational.end(), p) != rational.end();
  }
  PlayerRole role_of(PlayerId p) const {
    if (is_byzantine(p)) return {Role::Byzantine, theta};
    if (is_rational(p)) return {Role::Rational, theta};
    return {Role::Honest, theta};
  }

  StrategyParams strategy_of(PlayerId p) const {
    StrategyParams sp;
    auto it = player_strategy.find(p);
    if (it != player_strategy.end()) {
      sp.kind = it->second;
    } else if (is_byzantine(p)) {
      sp.kind = byz_strategy;
    } else if (is_rational(p)) {
      sp.kind = rat_strategy;
    } else {
      sp.kind = StrategyKind::Honest;
    }
    sp.mute_view_change = mute_view_change;
    sp.group_a = ds_group_a;
    sp.group_b = ds_group_b;
    sp.ds_rounds = ds_rounds;
    return sp;
  }
};

struct ConfigError : std::runtime_error {
  std::string key;
  ConfigError(std::string key_, const std::string& what)
      : std::runtime_error(key_.empty() ? what : key_ + ": " + what),
        key(std::move(key_)) {}
};

// ---------------------------------------------------------------------------
// Parsing (flat key = value lines, '#' comments, comma lists, a..b ranges)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t.empty()) throw ConfigError(key, "expected a number");
  std::uint64_t out = 0;
  for (char c : t) {
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw ConfigError(key, "invalid number '" + t + "'");
    out = out * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double out = std::stod(trim(v), &used);
    if (used != trim(v).size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key, "invalid real number '" + trim(v) + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "on" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "off" || t == "no") return false;
  throw ConfigError(key, "invalid boolean '" + t + "'");
}

// "0,3..5,9" -> {0,3,4,5,9}
inline std::vector<std::uint64_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  const std::string t = trim(v);
  if (t.empty()) return out;
  for (const std::string& piece : split(t, ',')) {
    const std::string p = trim(piece);
    auto dots = p.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_u64(key, p));
    } else {
      std::uint64_t a = parse_u64(key, p.substr(0, dots));
      std::uint64_t b = parse_u64(key, p.substr(dots + 2));
      if (b < a) throw ConfigError(key, "descending range '" + p + "'");
      if (b - a > 100000) throw ConfigError(key, "range too large '" + p + "'");
      for (std::uint64_t x = a; x <= b; ++x) out.push_back(x);
    }
  }
  return out;
}

inline std::vector<PlayerId> parse_ids(const std::string& key, const std::string& v) {
  std::vector<PlayerId> out;
  for (std::uint64_t x : parse_list(key, v)) out.push_back(static_cast<PlayerId>(x));
  return out;
}

// "0..100 : 0,1,2 | 3,4"
inline PartitionInterval parse_partition(const std::string& v) {
  const std::string key = "partition";
  auto colon = v.find(':');
  if (colon == std::string::npos) throw ConfigError(key, "missing ':'");
  const std::string range = trim(v.substr(0, colon));
  auto dots = range.find("..");
  if (dots == std::string::npos) throw ConfigError(key, "missing tick range 'a..b'");
  PartitionInterval iv;
  iv.start = parse_u64(key, range.substr(0, dots));
  iv.end = parse_u64(key, range.substr(dots + 2));
  if (iv.end < iv.start) throw ConfigError(key, "descending tick range");
  for (const std::string& grp : split(v.substr(colon + 1), '|')) {
    iv.groups.push_back(parse_ids(key, grp));
    if (iv.groups.back().empty()) throw ConfigError(key, "empty group");
  }
  if (iv.groups.size() < 2) throw ConfigError(key, "need at least two groups");
  return iv;
}

} // namespace detail

inline void validate_config(const ScenarioConfig& c) {
  if (c.n < 3 || c.n > 128) throw ConfigError("n", "must be in [3, 128]");
  std::uint32_t t0 = c.fault_budget();
  if (c.n < 2 * t0 + 1) throw ConfigError("t0", "need n >= 2*t0 + 1");
  if (c.rounds < 1) throw ConfigError("rounds", "must be at least 1");
  if (c.kappa < kSigCoreBytes) throw ConfigError("kappa", "must be at least 22");
  if (c.block_size < 1) throw ConfigError("block_size", "must be at least 1");
  if (!(c.discount > 0.0 && c.discount < 1.0))
    throw ConfigError("discount", "must be in (0, 1)");
  if (c.theta < 1 || c.theta > 3) throw ConfigError("theta", "must be 1, 2 or 3");
  if (c.censored > c.num_txs) throw ConfigError("censored", "more than num_txs");
  if (c.delay.bound < 1) throw ConfigError("net_bound", "must be at least 1");
  if (c.delay.pre_bound < 1) throw ConfigError("pre_bound", "must be at least 1");
  if (c.delay.kind == NetKind::PartiallySynchronous && c.delay.pre_bound < c.delay.bound)
    throw ConfigError("pre_bound", "must be at least net_bound");
  auto check_ids = [&](const char* key, const std::vector<PlayerId>& ids) {
    for (PlayerId p : ids) {
      if (p >= c.n) throw ConfigError(key, "player id out of range");
    }
  };
  check_ids("byzantine", c.byzantine);
  check_ids("rational", c.rational);
  if (c.byzantine.size() > t0) throw ConfigError("byzantine", "t exceeds t0");
  check_ids("ds_group_a", c.ds_group_a);
  check_ids("ds_group_b", c.ds_group_b);
  for (PlayerId p : c.byzantine) {
    if (c.is_rational(p)) throw ConfigError("rational", "player also listed as byzantine");
  }
  for (const auto& [p, k] : c.player_strategy) {
    (void)k;
    if (p >= c.n) throw ConfigError("strategy.player", "player id out of range");
  }
  for (const auto& iv : c.partitions.intervals) {
    std::set<PlayerId> seen;
    for (const auto& g : iv.groups) {
      for (PlayerId p : g) {
        if (p >= c.n) throw ConfigError("partition", "player id out of range");
        if (!seen.insert(p).second)
          throw ConfigError("partition", "player in two groups");
      }
    }
  }
}

inline ScenarioConfig parse_config(const std::string& text,
                                   const std::string& name = "scenario") {
  ScenarioConfig c;
  c.name = name;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));

    if (key == "name") {
      c.name = val;
    } else if (key == "n") {
      c.n = static_cast<std::uint32_t>(detail::parse_u64(key, val));
    } else if (key == "t0") {
      c.t0 = static_cast<std::int64_t>(detail::parse_u64(key, val));
    } else if (key == "rounds") {
      c.rounds = detail::parse_u64(key, val);
    } else if (key == "seeds") {
      c.seeds = detail::parse_list(key, val);
    } else if (key == "max_ticks") {
      c.max_ticks = detail::parse_u64(key, val);
    } else if (key == "delay") {
      if (val == "synchronous" || val == "sync") {
        c.delay.kind = NetKind::Synchronous;
      } else if (val == "partial" || val == "partially_synchronous") {
        c.delay.kind = NetKind::PartiallySynchronous;
      } else if (val == "asynchronous" || val == "async") {
        c.delay.kind = NetKind::Asynchronous;
      } else {
        throw ConfigError(key, "unknown delay model '" + val + "'");
      }
    } else if (key == "net_bound") {
      c.delay.bound = detail::parse_u64(key, val);
      if (c.delay.bound == 0) throw ConfigError(key, "must be positive");
    } else if (key == "gst") {
      c.delay.gst = detail::parse_u64(key, val);
    } else if (key == "pre_bound") {
      c.delay.pre_bound = detail::parse_u64(key, val);
    } else if (key == "timeout") {
      c.timeout = detail::parse_u64(key, val);
    } else if (key == "kappa") {
      c.kappa = static_cast<std::uint16_t>(detail::parse_u64(key, val));
    } else if (key == "block_size") {
      c.block_size = static_cast<std::uint32_t>(detail::parse_u64(key, val));
    } else if (key == "num_txs") {
      c.num_txs = static_cast<std::uint32_t>(detail::parse_u64(key, val));
    } else if (key == "tx_bytes") {
      c.tx_bytes = static_cast<std::uint32_t>(detail::parse_u64(key, val));
    } else if (key == "censored") {
      c.censored = static_cast<std::uint32_t>(detail::parse_u64(key, val));
    } else if (key == "cr_window") {
      c.cr_window = static_cast<std::uint32_t>(detail::parse_u64(key, val));
    } else if (key == "alpha") {
      c.alpha = detail::parse_double(key, val);
    } else if (key == "collateral") {
      c.collateral = detail::parse_double(key, val);
    } else if (key == "discount") {
      c.discount = detail::parse_double(key, val);
    } else if (key == "theta") {
      c.theta = static_cast<int>(detail::parse_u64(key, val));
    } else if (key == "strict_step5") {
      c.strict_step5 = detail::parse_bool(key, val);
    } else if (key == "byzantine") {
      c.byzantine = detail::parse_ids(key, val);
    } else if (key == "rational") {
      c.rational = detail::parse_ids(key, val);
    } else if (key == "strategy.byzantine" || key == "strategy.rational" ||
               key.rfind("strategy.player.", 0) == 0) {
      auto k = strategy_from_string(val);
      if (!k) throw ConfigError(key, "unknown strategy '" + val + "'");
      if (key == "strategy.byzantine") {
        c.byz_strategy = *k;
      } else if (key == "strategy.rational") {
        c.rat_strategy = *k;
      } else {
        auto pid = detail::parse_u64(key, key.substr(std::string("strategy.player.").size()));
        c.player_strategy[static_cast<PlayerId>(pid)] = *k;
      }
    } else if (key == "mute_view_change") {
      c.mute_view_change = detail::parse_bool(key, val);
    } else if (key == "ds_group_a") {
      c.ds_group_a = detail::parse_ids(key, val);
    } else if (key == "ds_group_b") {
      c.ds_group_b = detail::parse_ids(key, val);
    } else if (key == "ds_rounds") {
      c.ds_rounds = detail::parse_list(key, val);
    } else if (key == "partition") {
      c.partitions.intervals.push_back(detail::parse_partition(val));
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  validate_config(c);
  return c;
}

// ---------------------------------------------------------------------------
// Canonical text and hashing
// ---------------------------------------------------------------------------
//
// canonical_text() prints every field in a fixed order; parsing it back gives
// an equivalent config, and its hash is embedded in every output record so a
// result can always be traced to the exact configuration that produced it.

namespace detail {

inline std::string join_u64(const std::vector<std::uint64_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

inline std::string join_ids(const std::vector<PlayerId>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

} // namespace detail

inline std::string canonical_text(const ScenarioConfig& c) {
  std::ostringstream o;
  o << "name = " << c.name << "\n";
  o << "n = " << c.n << "\n";
  o << "t0 = " << c.fault_budget() << "\n";
  o << "rounds = " << c.rounds << "\n";
  o << "seeds = " << detail::join_u64(c.seeds_or_default()) << "\n";
  o << "max_ticks = " << c.max_ticks << "\n";
  o << "delay = " << to_string(c.delay.kind) << "\n";
  o << "net_bound = " << c.delay.bound << "\n";
  o << "gst = " << c.delay.gst << "\n";
  o << "pre_bound = " << c.delay.pre_bound << "\n";
  o << "timeout = " << c.timeout_or_default() << "\n";
  o << "kappa = " << c.kappa << "\n";
  o << "block_size = " << c.block_size << "\n";
  o << "num_txs = " << c.num_txs << "\n";
  o << "tx_bytes = " << c.tx_bytes << "\n";
  o << "censored = " << c.censored << "\n";
  o << "cr_window = " << c.cr_window << "\n";
  o << "alpha = " << c.alpha << "\n";
  o << "collateral = " << c.collateral << "\n";
  o << "discount = " << c.discount << "\n";
  o << "theta = " << c.theta << "\n";
  o << "strict_step5 = " << (c.strict_step5 ? "true" : "false") << "\n";
  if (!c.byzantine.empty()) o << "byzantine = " << detail::join_ids(c.byzantine) << "\n";
  if (!c.rational.empty()) o << "rational = " << detail::join_ids(c.rational) << "\n";
  o << "strategy.byzantine = " << to_string(c.byz_strategy) << "\n";
  o << "strategy.rational = " << to_string(c.rat_strategy) << "\n";
  for (const auto& [p, k] : c.player_strategy) {
    o << "strategy.player." << p << " = " << to_string(k) << "\n";
  }
  o << "mute_view_change = " << (c.mute_view_change ? "true" : "false") << "\n";
  if (!c.ds_group_a.empty()) o << "ds_group_a = " << detail::join_ids(c.ds_group_a) << "\n";
  if (!c.ds_group_b.empty()) o << "ds_group_b = " << detail::join_ids(c.ds_group_b) << "\n";
  if (!c.ds_rounds.empty()) o << "ds_rounds = " << detail::join_u64(c.ds_rounds) << "\n";
  for (const auto& iv : c.partitions.intervals) {
    o << "partition = " << iv.start << ".." << iv.end << " : ";
    for (std::size_t g = 0; g < iv.groups.size(); ++g) {
      if (g) o << " | ";
      o << detail::join_ids(iv.groups[g]);
    }
    o << "\n";
  }
  return o.str();
}

inline std::uint64_t config_hash(const ScenarioConfig& c) {
  const std::string s = canonical_text(c);
  return fnv1a64(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// The shared workload every replica starts from.
inline std::vector<Transaction> build_mempool(const ScenarioConfig& c) {
  std::vector<Transaction> txs;
  txs.reserve(c.num_txs);
  for (std::uint32_t i = 0; i < c.num_txs; ++i) {
    Transaction tx;
    tx.id = i + 1;
    tx.payload_size = c.tx_bytes;
    tx.censored = i < c.censored;
    txs.push_back(tx);
  }
  return txs;
}

} // namespace prft
