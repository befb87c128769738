// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "prft/config.hpp"
#include "prft/core.hpp"

namespace prft {

// ---------------------------------------------------------------------------
// Run traces
// ---------------------------------------------------------------------------
//
// Every simulation emits a flat event log. The trace is the ground truth all
// downstream analysis works from — robustness checks, state classification,
// utility accounting and message metrics are all pure functions of a trace.

enum class EventKind : std::uint8_t {
  RoundStart = 0, // actor entered a round
  PhaseEnter,     // actor entered a phase of its current round
  Send,           // network accepted a message (bytes = wire size)
  Deliver,        // message handed to actor (peer = original sender)
  Timeout,        // actor's phase timer fired
  VcSent,         // actor requested a view change
  VcCommit,       // actor committed a view-change certificate
  Tentative,      // actor tentatively appended a block
  Finalize,       // actor finalized a block at `height`
  Rollback,       // actor dropped its tentative suffix
  ExposeSent,     // actor broadcast a fraud proof
  Stash,          // actor confiscated peer's collateral
  Reject,         // actor discarded a message (note = reason)
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::RoundStart: return "round_start";
    case EventKind::PhaseEnter: return "phase_enter";
    case EventKind::Send: return "send";
    case EventKind::Deliver: return "deliver";
    case EventKind::Timeout: return "timeout";
    case EventKind::VcSent: return "vc_sent";
    case EventKind::VcCommit: return "vc_commit";
    case EventKind::Tentative: return "tentative";
    case EventKind::Finalize: return "finalize";
    case EventKind::Rollback: return "rollback";
    case EventKind::ExposeSent: return "expose_sent";
    case EventKind::Stash: return "stash";
    case EventKind::Reject: return "reject";
  }
  return "?";
}

inline std::optional<EventKind> event_kind_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(EventKind::Reject); ++i) {
    auto k = static_cast<EventKind>(i);
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

struct TraceEvent {
  Tick t = 0;
  EventKind kind = EventKind::Send;
  PlayerId actor = 0;
  std::int64_t peer = -1;  // other party (receiver of Send, sender of Deliver,
                           // stashed player of Stash), -1 when not applicable
  Round round = 0;
  int phase = -1;          // Phase, or -1
  int variant = -1;        // MsgType, or -1
  std::optional<Digest> digest;
  std::int64_t height = -1;
  std::uint64_t bytes = 0; // wire size for Send/Deliver
  std::uint32_t txs = 0;   // transactions in the block, for Tentative/Finalize
  std::string note;
};

struct RunTrace {
  std::string scenario;
  std::string config_text;      // canonical config (parseable)
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  bool truncated = false;       // hit max_ticks before every honest replica finished
  std::vector<TraceEvent> events;

  ScenarioConfig config() const { return parse_config(config_text, scenario); }
};

// Deterministic digest of a whole run; two runs of the same scenario and seed
// must produce byte-identical traces and therefore equal hashes.
inline std::uint64_t trace_hash(const RunTrace& tr) {
  Encoder e;
  e.put_u64(tr.config_hash);
  e.put_u64(tr.seed);
  e.put_bool(tr.truncated);
  for (const auto& ev : tr.events) {
    e.put_u64(ev.t);
    e.put_u8(static_cast<std::uint8_t>(ev.kind));
    e.put_u32(ev.actor);
    e.put_u64(static_cast<std::uint64_t>(ev.peer + 1));
    e.put_u64(ev.round);
    e.put_u8(static_cast<std::uint8_t>(ev.phase + 1));
    e.put_u8(static_cast<std::uint8_t>(ev.variant + 1));
    put_digest(e, ev.digest.value_or(Digest::bot()));
    e.put_bool(ev.digest.has_value());
    e.put_u64(static_cast<std::uint64_t>(ev.height + 1));
    e.put_u64(ev.bytes);
    e.put_u32(ev.txs);
    e.put_u64(fnv1a64(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(ev.note.data()), ev.note.size())));
  }
  return fnv1a64(e.bytes());
}

// ---------------------------------------------------------------------------
// JSONL serialization
// ---------------------------------------------------------------------------
//
// Line 1 is a header object; each further line is one event. Defaulted fields
// are omitted to keep traces compact.

inline void write_trace_jsonl(const RunTrace& tr, std::ostream& out) {
  nlohmann::json hdr;
  hdr["type"] = "header";
  hdr["scenario"] = tr.scenario;
  hdr["config_hash"] = tr.config_hash;
  hdr["seed"] = tr.seed;
  hdr["truncated"] = tr.truncated;
  hdr["config"] = tr.config_text;
  out << hdr.dump() << "\n";
  for (const auto& ev : tr.events) {
    nlohmann::json j;
    j["t"] = ev.t;
    j["kind"] = to_string(ev.kind);
    j["actor"] = ev.actor;
    if (ev.peer >= 0) j["peer"] = ev.peer;
    j["round"] = ev.round;
    if (ev.phase >= 0) j["phase"] = to_string(static_cast<Phase>(ev.phase));
    if (ev.variant >= 0) j["msg"] = to_string(static_cast<MsgType>(ev.variant));
    if (ev.digest) j["digest"] = to_string(*ev.digest);
    if (ev.height >= 0) j["height"] = ev.height;
    if (ev.bytes) j["bytes"] = ev.bytes;
    if (ev.txs) j["txs"] = ev.txs;
    if (!ev.note.empty()) j["note"] = ev.note;
    out << j.dump() << "\n";
  }
}

struct TraceIoError : std::runtime_error {
  explicit TraceIoError(const std::string& what) : std::runtime_error(what) {}
};

inline Digest digest_from_string(const std::string& s) {
  if (s == "bot") return Digest::bot();
  if (s.size() != 16) throw TraceIoError("bad digest literal '" + s + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') {
      v |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw TraceIoError("bad digest literal '" + s + "'");
    }
  }
  return Digest::of(v);
}

inline RunTrace read_trace_jsonl(std::istream& in) {
  RunTrace tr;
  std::string line;
  bool have_header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& ex) {
      throw TraceIoError("line " + std::to_string(lineno) + ": " + ex.what());
    }
    if (!have_header) {
      if (j.value("type", "") != "header")
        throw TraceIoError("first line must be the trace header");
      tr.scenario = j.value("scenario", "");
      tr.config_hash = j.value("config_hash", std::uint64_t{0});
      tr.seed = j.value("seed", std::uint64_t{0});
      tr.truncated = j.value("truncated", false);
      tr.config_text = j.value("config", "");
      have_header = true;
      continue;
    }
    TraceEvent ev;
    ev.t = j.at("t").get<Tick>();
    auto kind = event_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw TraceIoError("line " + std::to_string(lineno) + ": unknown kind");
    ev.kind = *kind;
    ev.actor = j.at("actor").get<PlayerId>();
    ev.peer = j.value("peer", std::int64_t{-1});
    ev.round = j.at("round").get<Round>();
    if (j.contains("phase")) {
      auto p = phase_from_string(j["phase"].get<std::string>());
      if (!p) throw TraceIoError("line " + std::to_string(lineno) + ": unknown phase");
      ev.phase = static_cast<int>(*p);
    }
    if (j.contains("msg")) {
      auto m = msg_type_from_string(j["msg"].get<std::string>());
      if (!m) throw TraceIoError("line " + std::to_string(lineno) + ": unknown msg");
      ev.variant = static_cast<int>(*m);
    }
    if (j.contains("digest")) ev.digest = digest_from_string(j["digest"].get<std::string>());
    ev.height = j.value("height", std::int64_t{-1});
    ev.bytes = j.value("bytes", std::uint64_t{0});
    ev.txs = j.value("txs", std::uint32_t{0});
    ev.note = j.value("note", "");
    tr.events.push_back(std::move(ev));
  }
  if (!have_header) throw TraceIoError("empty trace file");
  return tr;
}

inline void save_trace(const RunTrace& tr, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TraceIoError("cannot open '" + path + "' for writing");
  write_trace_jsonl(tr, out);
}

inline RunTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceIoError("cannot open '" + path + "'");
  return read_trace_jsonl(in);
}

} // namespace prft
