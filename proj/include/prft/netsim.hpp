// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "prft/adversary.hpp"
#include "prft/config.hpp"
#include "prft/core.hpp"
#include "prft/crypto.hpp"
#include "prft/engine.hpp"
#include "prft/messages.hpp"
#include "prft/trace.hpp"

namespace prft {

// ---------------------------------------------------------------------------
// Discrete-event network simulator
// ---------------------------------------------------------------------------
//
// Integer ticks; every point-to-point send is delayed by a seeded uniform
// draw from the active delay model, so a (config, seed) pair fully determines
// the run. Messages are never dropped or reordered arbitrarily — reliability
// is part of the model. Partitions hold cross-group messages back and release
// them when the interval ends.
//
// The simulator also plays referee. It aborts the run if any message carries
// a signature that its claimed signer never could have produced (strategies
// can misuse their own keys, not forge others'), and it enforces the shape of
// replica-generated traffic: exact-quorum certificates and at most one
// broadcast Vote/Commit/Reveal/Final per player per round. Strategy-injected
// messages are exempt from the shape rules, not from the forgery rule.

struct SimAbort : std::runtime_error {
  SimAbort(const std::string& scenario, std::uint64_t seed, std::size_t event_index,
           const std::string& what)
      : std::runtime_error("[" + scenario + " seed " + std::to_string(seed) +
                           " event " + std::to_string(event_index) + "] " + what) {}
};

class Simulator {
 public:
  Simulator(const ScenarioConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        seed_(seed),
        rng_(seed ^ 0xda3e39cb94b95bdbULL),
        registry_(KeyRegistry::setup(cfg.n, cfg.kappa, seed)),
        ctrl_(cfg_, &trace_.events) {
    trace_.scenario = cfg_.name;
    trace_.config_text = canonical_text(cfg_);
    trace_.config_hash = config_hash(cfg_);
    trace_.seed = seed;
    ReplicaParams rp;
    rp.n = cfg_.n;
    rp.t0 = cfg_.fault_budget();
    rp.timeout = cfg_.timeout_or_default();
    rp.block_size = cfg_.block_size;
    rp.collateral = cfg_.collateral;
    rp.strict_step5 = cfg_.strict_step5;
    auto mempool = build_mempool(cfg_);
    for (PlayerId p = 0; p < cfg_.n; ++p) {
      replicas_.push_back(std::make_unique<Replica>(registry_, registry_.key(p), rp,
                                                    mempool, &trace_.events));
      ctrl_.attach(p, replicas_.back().get());
      last_round_.push_back(~Round{0}); // sentinel: round 0 entry fires hooks
      last_epoch_.push_back(0);
    }
  }

  const Replica& replica(PlayerId p) const { return *replicas_[p]; }
  const KeyRegistry& registry() const { return registry_; }

  RunTrace run() {
    for (PlayerId p = 0; p < cfg_.n; ++p) {
      interact(p, [&](std::vector<Outbound>& pending) {
        replicas_[p]->begin(0, pending);
      });
    }
    check_stop();
    while (!queue_.empty()) {
      Event ev = queue_.top();
      if (stopping_ && ev.t > stop_deadline_) break;
      if (ev.t > cfg_.max_ticks) {
        trace_.truncated = true;
        break;
      }
      queue_.pop();
      now_ = ev.t;
      if (ev.timer) {
        interact(ev.to, [&](std::vector<Outbound>& pending) {
          replicas_[ev.to]->on_timer(ev.epoch, now_, pending);
        });
      } else {
        interact(ev.to, [&](std::vector<Outbound>& pending) {
          auto& rep = *replicas_[ev.to];
          TraceEvent te;
          te.t = now_;
          te.kind = EventKind::Deliver;
          te.actor = ev.to;
          te.peer = ev.from;
          te.round = msg_round(ev.msg);
          te.variant = static_cast<int>(msg_type(ev.msg));
          te.digest = msg_digest(ev.msg);
          trace_.events.push_back(te);
          rep.on_message(ev.msg, ev.from, now_, pending);
          ctrl_.observe_delivery(ev.to, ev.msg, now_, pending);
        });
      }
      check_stop();
    }
    if (!stopping_) trace_.truncated = true; // horizon unreached: deadlock or tick cap
    return std::move(trace_);
  }

 private:
  struct Event {
    Tick t = 0;
    std::uint64_t seq = 0;
    bool timer = false;
    PlayerId to = 0;
    PlayerId from = 0;
    std::uint64_t epoch = 0;
    Message msg;
    bool operator>(const Event& o) const {
      return std::pair(t, seq) > std::pair(o.t, o.seq);
    }
  };

  template <typename Fn>
  void interact(PlayerId p, Fn&& fn) {
    std::vector<Outbound> pending;
    fn(pending);
    ctrl_.filter_outbound(p, pending);
    // Round transitions fire strategy hooks, which may add more outbound.
    while (last_round_[p] != replicas_[p]->round()) {
      last_round_[p] = replicas_[p]->round();
      ctrl_.on_round_enter(p, last_round_[p], now_, pending);
    }
    if (last_epoch_[p] != replicas_[p]->timer_epoch()) {
      last_epoch_[p] = replicas_[p]->timer_epoch();
      push_timer(replicas_[p]->timer_deadline(), p, last_epoch_[p]);
    }
    dispatch_outbound(p, pending);
  }

  void dispatch_outbound(PlayerId p, std::vector<Outbound>& pending) {
    for (auto& o : pending) {
      vet(p, o);
      if (o.to) {
        if (*o.to != p) send_one(p, *o.to, o.msg);
      } else {
        for (PlayerId q = 0; q < cfg_.n; ++q) {
          if (q != p) send_one(p, q, o.msg);
        }
      }
    }
  }

  // Global unforgeability plus honest-shape assertions.
  void vet(PlayerId p, const Outbound& o) {
    if (auto bad = find_forged(registry_, o.msg)) {
      abort_run("message from " + std::to_string(p) + " carries a forged signature of " +
                std::to_string(*bad));
    }
    if (o.from_strategy) return;
    std::uint32_t q = cfg_.quorum();
    switch (msg_type(o.msg)) {
      case MsgType::Commit: {
        const auto& m = std::get<CommitMsg>(o.msg);
        if (m.digest.is_bot() ? !m.votes.empty() : m.votes.size() != q) {
          abort_run("commit certificate from " + std::to_string(p) + " has " +
                    std::to_string(m.votes.size()) + " entries");
        }
        break;
      }
      case MsgType::Reveal: {
        const auto& m = std::get<RevealMsg>(o.msg);
        if (m.commits.size() != q) {
          abort_run("reveal certificate from " + std::to_string(p) + " has " +
                    std::to_string(m.commits.size()) + " entries");
        }
        break;
      }
      case MsgType::CommitView: {
        const auto& m = std::get<CommitViewMsg>(o.msg);
        if (m.entries.size() != q) {
          abort_run("commit-view from " + std::to_string(p) + " has " +
                    std::to_string(m.entries.size()) + " entries");
        }
        break;
      }
      default:
        break;
    }
    // Broadcast consensus messages are one-shot per player and round.
    if (!o.to && msg_signer(o.msg) == p) {
      auto t = msg_type(o.msg);
      if (t == MsgType::Vote || t == MsgType::Commit || t == MsgType::Reveal ||
          t == MsgType::Final) {
        auto key = std::tuple(p, msg_round(o.msg), static_cast<int>(t));
        if (++broadcast_count_[key] > 1) {
          abort_run("player " + std::to_string(p) + " broadcast a second " +
                    to_string(t) + " in round " + std::to_string(msg_round(o.msg)));
        }
      }
    }
  }

  void send_one(PlayerId from, PlayerId to, const Message& msg) {
    Tick at = now_ + draw_delay();
    at = apply_partitions(from, to, at);
    TraceEvent te;
    te.t = now_;
    te.kind = EventKind::Send;
    te.actor = from;
    te.peer = to;
    te.round = msg_round(msg);
    te.variant = static_cast<int>(msg_type(msg));
    te.digest = msg_digest(msg);
    te.bytes = wire_size(msg);
    trace_.events.push_back(te);
    Event ev;
    ev.t = at;
    ev.seq = seq_++;
    ev.to = to;
    ev.from = from;
    ev.msg = msg;
    queue_.push(ev);
  }

  Tick draw_delay() {
    std::uint64_t bound;
    switch (cfg_.delay.kind) {
      case NetKind::Synchronous:
        bound = cfg_.delay.bound;
        break;
      case NetKind::PartiallySynchronous:
        bound = now_ < cfg_.delay.gst ? cfg_.delay.pre_bound : cfg_.delay.bound;
        break;
      case NetKind::Asynchronous:
        bound = cfg_.delay.pre_bound;
        break;
      default:
        bound = cfg_.delay.bound;
        break;
    }
    return 1 + rng_() % bound;
  }

  // A cross-group message inside an active partition interval is held until
  // the interval ends (or its nominal arrival, whichever is later). Players
  // the interval does not mention communicate freely.
  Tick apply_partitions(PlayerId from, PlayerId to, Tick nominal) const {
    Tick at = nominal;
    for (const auto& iv : cfg_.partitions.intervals) {
      if (now_ < iv.start || now_ > iv.end) continue;
      int gf = -1, gt = -1;
      for (std::size_t g = 0; g < iv.groups.size(); ++g) {
        for (PlayerId p : iv.groups[g]) {
          if (p == from) gf = static_cast<int>(g);
          if (p == to) gt = static_cast<int>(g);
        }
      }
      if (gf >= 0 && gt >= 0 && gf != gt) at = std::max(at, iv.end);
    }
    return at;
  }

  void push_timer(Tick deadline, PlayerId p, std::uint64_t epoch) {
    Event ev;
    ev.t = deadline;
    ev.seq = seq_++;
    ev.timer = true;
    ev.to = p;
    ev.epoch = epoch;
    queue_.push(ev);
  }

  void check_stop() {
    if (stopping_) return;
    Round lo = ~Round{0};
    bool any = false;
    for (PlayerId p = 0; p < cfg_.n; ++p) {
      if (cfg_.role_of(p).role != Role::Honest) continue;
      any = true;
      lo = std::min(lo, replicas_[p]->round());
    }
    if (!any) {
      lo = ~Round{0};
      for (PlayerId p = 0; p < cfg_.n; ++p) lo = std::min(lo, replicas_[p]->round());
    }
    if (lo >= cfg_.rounds) {
      stopping_ = true;
      // One network bound: long enough for every already-sent message —
      // exposures and finals included — to land, short enough that the tail
      // cannot run whole extra rounds.
      stop_deadline_ = now_ + std::max(cfg_.delay.bound, cfg_.delay.pre_bound);
    }
  }

  [[noreturn]] void abort_run(const std::string& what) {
    throw SimAbort(cfg_.name, seed_, trace_.events.size(), what);
  }

  ScenarioConfig cfg_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  KeyRegistry registry_;
  RunTrace trace_;
  CollusionController ctrl_;
  std::vector<std::unique_ptr<Replica>> replicas_;
  std::vector<Round> last_round_;
  std::vector<std::uint64_t> last_epoch_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::uint64_t seq_ = 0;
  Tick now_ = 0;
  bool stopping_ = false;
  Tick stop_deadline_ = 0;
  std::map<std::tuple<PlayerId, Round, int>, int> broadcast_count_;
};

// Convenience: one full simulated run.
inline RunTrace simulate(const ScenarioConfig& cfg, std::uint64_t seed) {
  return Simulator(cfg, seed).run();
}

} // namespace prft
