// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
#pragma once

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "prft/config.hpp"
#include "prft/core.hpp"
#include "prft/engine.hpp"
#include "prft/messages.hpp"
#include "prft/trace.hpp"

namespace prft {

// ---------------------------------------------------------------------------
// Collusion controller
// ---------------------------------------------------------------------------
//
// Non-honest players run the same replica state machine as everyone else; the
// controller sits between a controlled replica and the network and bends its
// behavior into the configured strategy. It can drop outbound messages
// (abstention, selective silence), inject extra ones under the member's own
// key (double votes, equivocating proposals, spurious view changes), and act
// for the member when it leads a round. Injected messages are marked
// from_strategy so the network layer exempts them from the honest-shape
// checks while still enforcing that every signature is genuine: strategies
// may only misuse their own keys, never forge someone else's.
//
// All strategies suppress the member's own fraud exposures — a colluder never
// helps confiscate its partners' deposits.

class CollusionController {
 public:
  CollusionController(const ScenarioConfig& cfg, std::vector<TraceEvent>* trace)
      : cfg_(&cfg), trace_(trace) {}

  void attach(PlayerId p, Replica* rep) {
    StrategyParams sp = cfg_->strategy_of(p);
    if (sp.kind == StrategyKind::Honest) return;
    members_[p] = sp;
    replicas_[p] = rep;
    if (sp.kind == StrategyKind::Censor || sp.kind == StrategyKind::Equivocate) {
      rep->set_auto_propose(false); // the controller crafts this member's proposals
    }
  }

  bool controls(PlayerId p) const { return members_.count(p) != 0; }

  const StrategyParams* params(PlayerId p) const {
    auto it = members_.find(p);
    return it == members_.end() ? nullptr : &it->second;
  }

  // Applies the member's strategy to what its replica just tried to send.
  // Decisions go per message round: one delivery can cascade a replica
  // through several rounds, and a censoring member behaves differently under
  // collusion-led and outside-led rounds.
  void filter_outbound(PlayerId p, std::vector<Outbound>& pending) {
    auto it = members_.find(p);
    if (it == members_.end()) return;
    const StrategyParams& sp = it->second;
    auto drop_if = [&](auto pred) {
      std::vector<Outbound> kept;
      kept.reserve(pending.size());
      for (auto& o : pending) {
        if (o.from_strategy || !pred(o.msg)) kept.push_back(std::move(o));
      }
      pending.swap(kept);
    };
    // Nobody in a collusion exposes fraud.
    drop_if([](const Message& m) { return msg_type(m) == MsgType::Expose; });
    switch (sp.kind) {
      case StrategyKind::Honest:
      case StrategyKind::DualSign:
      case StrategyKind::Equivocate:
      case StrategyKind::VcStorm:
        break; // full honest behavior plus injections elsewhere
      case StrategyKind::Abstain:
        drop_if([&](const Message& m) { return !is_vc_traffic(m) || sp.mute_view_change; });
        break;
      case StrategyKind::Censor:
        // Collusion-led rounds proceed normally; under an outside leader the
        // member starves the round, keeping only view-change traffic.
        drop_if([&](const Message& m) {
          if (controls(leader_of(msg_round(m), cfg_->n))) return false;
          return !is_vc_traffic(m) || sp.mute_view_change;
        });
        break;
    }
  }

  // Invoked when member p's replica enters round r.
  void on_round_enter(PlayerId p, Round r, Tick now, std::vector<Outbound>& out) {
    auto it = members_.find(p);
    if (it == members_.end()) return;
    const StrategyParams& sp = it->second;
    Replica* rep = replicas_[p];
    bool leads = leader_of(r, cfg_->n) == p;
    switch (sp.kind) {
      case StrategyKind::Censor:
        if (leads) {
          Message m = make_propose(rep->key(), r, rep->construct_block(true));
          out.push_back({std::nullopt, m, true});
          self_feed(p, rep, m, now, out);
        }
        break;
      case StrategyKind::Equivocate:
        if (leads) equivocate_propose(p, rep, r, out);
        break;
      case StrategyKind::VcStorm:
        for (int ph = 0; ph < 4; ++ph) {
          out.push_back({std::nullopt,
                         make_view_change(rep->key(), r, static_cast<Phase>(ph)), true});
        }
        break;
      case StrategyKind::Honest:
      case StrategyKind::Abstain:
      case StrategyKind::DualSign:
        break;
    }
  }

  // Invoked after member p's replica processed a delivery.
  void observe_delivery(PlayerId p, const Message& msg, Tick now,
                        std::vector<Outbound>& out) {
    (void)now;
    auto it = members_.find(p);
    if (it == members_.end()) return;
    if (it->second.kind != StrategyKind::DualSign) return;
    if (msg_type(msg) != MsgType::Propose) return;
    const auto& prop = std::get<ProposeMsg>(msg);
    Round r = prop.round;
    if (!attack_round(it->second, r)) return;
    if (prop.sig.signer != leader_of(r, cfg_->n)) return;
    if (leader_of(r, cfg_->n) == p) return; // leaders have no vote to double
    if (!ds_done_.insert({p, r}).second) return;
    // The second, conflicting vote: a fresh digest under the member's own
    // key, dressed with the leader's genuine proposal signature. The honest
    // vote flows through the replica's normal path; this one goes to the
    // configured targets (everyone, when unconfigured).
    Digest fake = Digest::of(prop.digest.value ^ 0x5a5a5a5a5a5a5a5aULL);
    Message mv = make_vote(replicas_[p]->key(), r, fake, prop.sig);
    if (!it->second.group_b.empty()) {
      for (PlayerId q : it->second.group_b) {
        if (q != p) out.push_back({q, mv, true});
      }
    } else {
      out.push_back({std::nullopt, mv, true});
    }
  }

 private:
  static bool is_vc_traffic(const Message& m) {
    return msg_type(m) == MsgType::ViewChange || msg_type(m) == MsgType::CommitView;
  }

  static bool attack_round(const StrategyParams& sp, Round r) {
    if (sp.ds_rounds.empty()) return true;
    for (Round x : sp.ds_rounds) {
      if (x == r) return true;
    }
    return false;
  }

  void self_feed(PlayerId p, Replica* rep, const Message& m, Tick now,
                 std::vector<Outbound>& out) {
    if (trace_) {
      TraceEvent ev;
      ev.t = now;
      ev.kind = EventKind::Deliver;
      ev.actor = p;
      ev.peer = p;
      ev.round = msg_round(m);
      ev.variant = static_cast<int>(msg_type(m));
      ev.digest = msg_digest(m);
      trace_->push_back(ev);
    }
    rep->on_message(m, p, now, out);
  }

  void equivocate_propose(PlayerId p, Replica* rep, Round r,
                          std::vector<Outbound>& out) {
    Block b1 = rep->construct_block(false);
    Block b2 = b1;
    if (!b2.txs.empty()) {
      b2.txs.pop_back();
    } else {
      b2.txs.push_back(Transaction{900000 + r, 0, false});
    }
    Message m1 = make_propose(rep->key(), r, std::move(b1));
    Message m2 = make_propose(rep->key(), r, std::move(b2));
    auto [ga, gb] = split_groups(p);
    for (PlayerId q : ga) out.push_back({q, m1, true});
    for (PlayerId q : gb) out.push_back({q, m2, true});
  }

  // Configured groups when present, otherwise an alternating split of the
  // other players.
  std::pair<std::vector<PlayerId>, std::vector<PlayerId>> split_groups(PlayerId self) const {
    const StrategyParams& sp = members_.at(self);
    if (!sp.group_a.empty() || !sp.group_b.empty()) {
      std::vector<PlayerId> ga, gb;
      for (PlayerId q : sp.group_a) {
        if (q != self) ga.push_back(q);
      }
      for (PlayerId q : sp.group_b) {
        if (q != self) gb.push_back(q);
      }
      return {ga, gb};
    }
    std::vector<PlayerId> ga, gb;
    bool flip = false;
    for (PlayerId q = 0; q < cfg_->n; ++q) {
      if (q == self) continue;
      (flip ? gb : ga).push_back(q);
      flip = !flip;
    }
    return {ga, gb};
  }

  const ScenarioConfig* cfg_;
  std::vector<TraceEvent>* trace_;
  std::map<PlayerId, StrategyParams> members_;
  std::map<PlayerId, Replica*> replicas_;
  std::set<std::pair<PlayerId, Round>> ds_done_;
};

} // namespace prft
