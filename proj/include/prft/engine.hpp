// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prft/core.hpp"
#include "prft/crypto.hpp"
#include "prft/messages.hpp"
#include "prft/pof.hpp"
#include "prft/trace.hpp"

namespace prft {

// ---------------------------------------------------------------------------
// Replica state machine
// ---------------------------------------------------------------------------
//
// One Replica is one player's full protocol state. It is driven from outside
// by three entry points — begin(), on_message() and on_timer() — and emits
// everything it wants sent through an Outbound vector, so it can be driven by
// the discrete-event network or directly by unit tests.
//
// Round structure: the leader proposes; non-leaders vote; anyone holding a
// quorum (n - t0 distinct signers) of votes commits; a quorum of commits
// yields a reveal plus a tentative ledger append; a quorum of reveals — or a
// majority of finals — finalizes. Detected double-signing takes priority over
// finalization: once more than t0 players provably double-signed in a round,
// the replica broadcasts the fraud proof, confiscates the accused collateral,
// rolls back its tentative block and abandons the round.
//
// Evidence never expires: signature tables are kept per round, so proof
// fragments arriving after a round ended (e.g. held back by a partition)
// still convict, producing exposures for past rounds. Likewise, quorum
// messages arriving late can still finalize a past round's block — without
// that, a replica that abandoned a round via view change could never learn
// the block the rest of the system finalized, and would be forked off by its
// own ignorance.

struct ReplicaParams {
  std::uint32_t n = 5;
  std::uint32_t t0 = 1;
  Tick timeout = 40;          // per-phase timer
  std::uint32_t block_size = 4;
  double collateral = 10.0;
  bool strict_step5 = false;  // require one extra commit-view before advancing

  std::uint32_t quorum() const { return n - t0; }
};

struct Outbound {
  std::optional<PlayerId> to; // empty = broadcast to everyone else
  Message msg;
  bool from_strategy = false; // bypasses honest-shape assertions in the net layer
};

class Replica {
 public:
  Replica(const KeyRegistry& reg, KeyPair key, ReplicaParams params,
          std::vector<Transaction> mempool, std::vector<TraceEvent>* trace)
      : reg_(&reg),
        key_(std::move(key)),
        p_(params),
        me_(key_.id()),
        collateral_(params.n, params.collateral),
        mempool_(std::move(mempool)),
        trace_(trace) {}

  void set_auto_propose(bool v) { auto_propose_ = v; }

  // ---- observers ---------------------------------------------------------

  PlayerId id() const { return me_; }
  Round round() const { return round_; }
  Phase phase() const { return phase_; }
  std::uint64_t timer_epoch() const { return timer_epoch_; }
  Tick timer_deadline() const { return timer_deadline_; }
  const KeyPair& key() const { return key_; }
  const CollateralLedger& collateral() const { return collateral_; }
  bool stashed(PlayerId p) const { return collateral_.stashed(p); }
  const std::vector<Block>& chain() const { return chain_; }
  const std::vector<Digest>& chain_digests() const { return chain_digests_; }
  Digest tip() const { return chain_digests_.empty() ? Digest::bot() : chain_digests_.back(); }
  std::optional<Digest> tentative() const { return tentative_; }
  const std::map<Digest, Block>& known_blocks() const { return known_blocks_; }
  const SignatureTable& pool(Round r, MsgType phase) const {
    return pools_.at(r)[static_cast<std::size_t>(phase)];
  }

  // Next block this player would propose. Strategies may exclude tagged
  // transactions; the honest path never does.
  Block construct_block(bool exclude_censored) const {
    Block b;
    b.round = round_;
    b.proposer = me_;
    b.parent = tip();
    for (const auto& tx : mempool_) {
      if (b.txs.size() >= p_.block_size) break;
      if (finalized_txs_.count(tx.id)) continue;
      if (exclude_censored && tx.censored) continue;
      b.txs.push_back(tx);
    }
    return b;
  }

  // ---- entry points ------------------------------------------------------

  void begin(Tick now, std::vector<Outbound>& out) {
    Env env(this, now, out);
    enter_round(round_);
  }

  void on_message(const Message& msg, PlayerId from, Tick now, std::vector<Outbound>& out) {
    Env env(this, now, out);
    process(msg, from);
  }

  void on_timer(std::uint64_t epoch, Tick now, std::vector<Outbound>& out) {
    Env env(this, now, out);
    if (epoch != timer_epoch_) return; // stale timer from an earlier phase
    trace(EventKind::Timeout).phase = static_cast<int>(phase_);
    switch (phase_) {
      case Phase::Propose:
        send_view_change(Phase::Propose);
        break;
      case Phase::Vote: {
        // Timed out waiting for votes: commit the empty value once, then ask
        // for a view change. Empty commits never count toward consensus.
        auto& rs = state(round_);
        if (!rs.sent_commit) {
          rs.sent_commit = true;
          broadcast_and_self(make_commit(key_, round_, Digest::bot(), std::nullopt, {}));
        }
        send_view_change(Phase::Vote);
        break;
      }
      case Phase::Commit:
        send_view_change(Phase::Commit);
        break;
      case Phase::Reveal:
        send_view_change(Phase::Reveal);
        break;
      case Phase::ViewChangeWait:
        break; // the certificate quorum will arrive or the run will truncate
    }
  }

 private:
  // ------------------------------------------------------------------ state

  struct RoundState {
    // quorum bookkeeping, per digest, valid entries only
    std::map<Digest, std::map<PlayerId, Signature>> votes, commits, reveals;
    std::map<Digest, std::set<PlayerId>> finals;
    std::map<Digest, Signature> proposer_sig; // one verifying proposer sig per digest
    // verbatim first-received messages per consensus phase, for catch-up replies
    std::array<std::vector<Message>, 4> originals;
    std::array<std::set<PlayerId>, 4> originals_from;
    // view change
    std::map<PlayerId, SignedViewChange> vc_store;
    std::set<PlayerId> cv_from;
    std::optional<CommitViewMsg> own_cv;
    // local flags
    std::optional<Digest> lock; // digest of the first valid proposal accepted
    bool sent_vote = false, sent_commit = false, sent_reveal = false, sent_final = false;
    bool committed_vc = false, exposed = false;
    std::set<int> vc_sent_phases;
  };

  const KeyRegistry* reg_;
  KeyPair key_;
  ReplicaParams p_;
  PlayerId me_;
  CollateralLedger collateral_;

  std::vector<Block> chain_;
  std::vector<Digest> chain_digests_;
  std::set<std::uint64_t> finalized_txs_;
  std::map<Digest, std::pair<Digest, Round>> pending_finals_; // parent -> (digest, round)
  std::optional<Digest> tentative_;
  std::vector<Transaction> mempool_;

  Round round_ = 0;
  Phase phase_ = Phase::Propose;
  std::uint64_t timer_epoch_ = 0;
  Tick timer_deadline_ = 0;
  bool auto_propose_ = true;

  std::map<Digest, Block> known_blocks_;
  std::map<Round, RoundState> rs_;
  std::map<Round, std::array<SignatureTable, 4>> pools_;
  std::map<Round, std::vector<std::pair<Message, PlayerId>>> future_;

  std::vector<TraceEvent>* trace_;
  Tick now_ = 0;
  std::vector<Outbound>* out_ = nullptr;

  // Scoped binding of (now, out) for one entry-point invocation; nested
  // dispatch reuses the innermost binding.
  struct Env {
    Replica* r;
    Tick prev_now;
    std::vector<Outbound>* prev_out;
    Env(Replica* rep, Tick now, std::vector<Outbound>& out)
        : r(rep), prev_now(rep->now_), prev_out(rep->out_) {
      r->now_ = now;
      r->out_ = &out;
    }
    ~Env() {
      r->now_ = prev_now;
      r->out_ = prev_out;
    }
  };

  RoundState& state(Round r) { return rs_[r]; }
  std::array<SignatureTable, 4>& tables(Round r) {
    auto it = pools_.find(r);
    if (it == pools_.end()) {
      auto& t = pools_[r];
      for (int i = 0; i < 4; ++i) t[static_cast<std::size_t>(i)] =
          SignatureTable(static_cast<MsgType>(i), r);
      return t;
    }
    return it->second;
  }

  std::uint32_t quorum() const { return p_.quorum(); }
  PlayerId leader(Round r) const { return leader_of(r, p_.n); }

  // ------------------------------------------------------------------ trace

  TraceEvent& trace(EventKind k) {
    static TraceEvent scratch; // sink when tracing is disabled
    TraceEvent* ev;
    if (trace_) {
      trace_->push_back({});
      ev = &trace_->back();
    } else {
      scratch = {};
      ev = &scratch;
    }
    ev->t = now_;
    ev->kind = k;
    ev->actor = me_;
    ev->round = round_;
    return *ev;
  }

  void reject(const Message& m, PlayerId from, const char* reason) {
    auto& ev = trace(EventKind::Reject);
    ev.peer = from;
    ev.round = msg_round(m);
    ev.variant = static_cast<int>(msg_type(m));
    ev.note = reason;
  }

  // ------------------------------------------------------------------ sends

  void broadcast(Message m) { out_->push_back({std::nullopt, std::move(m), false}); }
  void send_to(PlayerId p, Message m) { out_->push_back({p, std::move(m), false}); }

  void broadcast_and_self(Message m) {
    broadcast(m);
    auto& ev = trace(EventKind::Deliver);
    ev.peer = me_;
    ev.round = msg_round(m);
    ev.variant = static_cast<int>(msg_type(m));
    ev.digest = msg_digest(m);
    process(m, me_);
  }

  // ------------------------------------------------------------- round flow

  void arm_timer() {
    ++timer_epoch_;
    timer_deadline_ = now_ + p_.timeout;
  }

  void enter_phase(Phase ph) {
    phase_ = ph;
    trace(EventKind::PhaseEnter).phase = static_cast<int>(ph);
    arm_timer();
  }

  void enter_round(Round r) {
    round_ = r;
    phase_ = Phase::Propose;
    state(r); // materialize
    trace(EventKind::RoundStart);
    trace(EventKind::PhaseEnter).phase = static_cast<int>(Phase::Propose);
    arm_timer();
    // Anything buffered for rounds we already passed can only matter as
    // evidence or late quorum material now.
    while (!future_.empty() && future_.begin()->first < round_) {
      auto node = future_.extract(future_.begin());
      for (auto& [m, from] : node.mapped()) stale_ingest(m, from);
    }
    if (auto_propose_ && leader(r) == me_ && !state(r).sent_vote && round_ == r) {
      Block b = construct_block(false);
      broadcast_and_self(make_propose(key_, r, std::move(b)));
    }
    // Replay buffered messages for whatever round we are in; a replay can
    // advance the round again, in which case the loop follows it.
    while (true) {
      auto it = future_.find(round_);
      if (it == future_.end() || it->second.empty()) break;
      auto [m, from] = it->second.front();
      it->second.erase(it->second.begin());
      process(m, from);
    }
  }

  // ------------------------------------------------------------------- door

  void process(const Message& msg, PlayerId from) {
    if (!verify_envelope(*reg_, msg)) {
      reject(msg, from, "bad-envelope");
      return;
    }
    Round r = msg_round(msg);
    if (r > round_) {
      future_[r].emplace_back(msg, from);
      return;
    }
    if (r < round_) {
      stale_ingest(msg, from);
      return;
    }
    dispatch(msg, from);
  }

  void dispatch(const Message& msg, PlayerId from) {
    switch (msg_type(msg)) {
      case MsgType::Propose: handle_propose(std::get<ProposeMsg>(msg), from); break;
      case MsgType::Vote: handle_vote(std::get<VoteMsg>(msg), from); break;
      case MsgType::Commit: handle_commit(std::get<CommitMsg>(msg), from); break;
      case MsgType::Reveal: handle_reveal(std::get<RevealMsg>(msg), from); break;
      case MsgType::Expose: handle_expose(std::get<ExposeMsg>(msg), from); break;
      case MsgType::Final: handle_final(std::get<FinalMsg>(msg), from); break;
      case MsgType::ViewChange: handle_view_change(std::get<ViewChangeMsg>(msg), from); break;
      case MsgType::CommitView: handle_commit_view(std::get<CommitViewMsg>(msg), from); break;
    }
  }

  // --------------------------------------------------------------- evidence

  void ingest(Round r, MsgType phase, PlayerId signer, const Digest& d,
              std::uint64_t ptag, const Signature& sig) {
    tables(r)[static_cast<std::size_t>(phase)].add(signer, SigRecord{d, ptag, sig});
  }

  std::vector<PlayerId> merged_accused(Round r) {
    std::set<PlayerId> acc;
    for (auto& t : tables(r)) {
      for (PlayerId p : t.conflicting()) acc.insert(p);
    }
    return {acc.begin(), acc.end()};
  }

  // Reacts to the current evidence for round r: view-change triggers for the
  // live round, and an exposure whenever the accused exceed the fault budget.
  // Returns true when the current round was abandoned.
  bool evidence_actions(Round r) {
    auto& tabs = tables(r);
    if (r == round_) {
      auto& propose_table = tabs[static_cast<std::size_t>(MsgType::Propose)];
      if (propose_table.has_conflict(leader(r))) send_view_change(Phase::Propose);
      for (int ph = 0; ph < 4; ++ph) {
        if (tabs[static_cast<std::size_t>(ph)].conflicting().size() >= p_.t0 + 1) {
          send_view_change(static_cast<Phase>(ph));
        }
      }
    }
    auto accused = merged_accused(r);
    if (accused.size() > p_.t0 && !state(r).exposed) {
      state(r).exposed = true;
      std::vector<ProofOfFraud> parts;
      for (auto& t : tabs) parts.push_back(construct_proof(t, p_.t0));
      ProofOfFraud proof = merge_and_trim(std::move(parts), p_.t0);
      auto guilty = proof.accused();
      {
        auto& ev = trace(EventKind::ExposeSent);
        ev.round = r;
      }
      broadcast(make_expose(key_, r, std::move(proof)));
      apply_stash(guilty, r);
      if (r == round_) {
        abandon_round();
        return true;
      }
    }
    return false;
  }

  void apply_stash(const std::vector<PlayerId>& guilty, Round r) {
    for (PlayerId p : collateral_.stash(guilty)) {
      auto& ev = trace(EventKind::Stash);
      ev.peer = p;
      ev.round = r;
    }
  }

  void rollback_tentative() {
    if (!tentative_) return;
    auto& ev = trace(EventKind::Rollback);
    ev.digest = *tentative_;
    tentative_.reset();
  }

  void abandon_round() {
    rollback_tentative();
    enter_round(round_ + 1);
  }

  // ----------------------------------------------------------- view changes

  void send_view_change(Phase ph) {
    auto& rs = state(round_);
    if (rs.committed_vc) return;
    if (!rs.vc_sent_phases.insert(static_cast<int>(ph)).second) return;
    trace(EventKind::VcSent).phase = static_cast<int>(ph);
    broadcast_and_self(make_view_change(key_, round_, ph));
  }

  void handle_view_change(const ViewChangeMsg& m, PlayerId from) {
    Round r = round_;
    auto& rs = state(r);
    // store, keeping a deterministic representative per signer
    SignedViewChange svc{m.sig.signer, m.phase, m.sig};
    auto it = rs.vc_store.find(svc.signer);
    if (it == rs.vc_store.end()) {
      rs.vc_store.emplace(svc.signer, svc);
    } else if (std::pair(static_cast<int>(svc.phase), svc.sig.tag) <
               std::pair(static_cast<int>(it->second.phase), it->second.sig.tag)) {
      it->second = svc;
    }
    // Catch-up: a straggler asking for phase X gets our verbatim originals.
    if (from != me_ && m.sig.signer != me_) {
      if (rs.committed_vc && rs.own_cv) {
        send_to(m.sig.signer, *rs.own_cv);
      }
      auto idx = static_cast<std::size_t>(m.phase);
      if (m.phase == Phase::Propose) {
        for (const auto& orig : rs.originals[idx]) send_to(m.sig.signer, orig);
      } else if (idx < 4 && rs.originals_from[idx].size() >= quorum()) {
        for (const auto& orig : rs.originals[idx]) send_to(m.sig.signer, orig);
      }
    }
    // Step 3: a quorum of view changes including our own commits us.
    if (!rs.committed_vc && rs.vc_store.count(me_) && rs.vc_store.size() >= quorum()) {
      std::vector<SignedViewChange> entries;
      for (const auto& [p, svc2] : rs.vc_store) {
        if (entries.size() >= quorum()) break;
        entries.push_back(svc2);
      }
      commit_view_change(make_commit_view(key_, r, std::move(entries)));
    }
  }

  void commit_view_change(CommitViewMsg cv) {
    auto& rs = state(round_);
    rs.committed_vc = true;
    rs.own_cv = cv;
    trace(EventKind::VcCommit);
    rollback_tentative();
    phase_ = Phase::ViewChangeWait;
    trace(EventKind::PhaseEnter).phase = static_cast<int>(Phase::ViewChangeWait);
    arm_timer();
    broadcast_and_self(std::move(cv));
  }

  bool valid_commit_view(const CommitViewMsg& m) const {
    if (m.entries.size() < quorum()) return false;
    std::set<PlayerId> seen;
    for (const auto& e : m.entries) {
      if (!seen.insert(e.signer).second) return false;
      if (e.sig.signer != e.signer) return false;
      if (!verify_phase_sig(*reg_, e.signer, MsgType::ViewChange, m.round, Digest::bot(), 0,
                            e.sig, vc_extra(e.phase))) {
        return false;
      }
    }
    return true;
  }

  void handle_commit_view(const CommitViewMsg& m, PlayerId from) {
    Round r = round_;
    auto& rs = state(r);
    if (!valid_commit_view(m)) {
      reject(Message(m), from, "bad-commit-view");
      return;
    }
    rs.cv_from.insert(m.sig.signer);
    for (const auto& e : m.entries) rs.vc_store.emplace(e.signer, e);
    if (!rs.committed_vc) {
      std::vector<SignedViewChange> adopted(m.entries.begin(),
                                            m.entries.begin() + quorum());
      commit_view_change(make_commit_view(key_, r, std::move(adopted)));
      if (round_ != r) return;
    }
    std::uint32_t need = quorum() + (p_.strict_step5 ? 1 : 0);
    if (rs.cv_from.size() >= need) {
      enter_round(r + 1);
    }
  }

  // --------------------------------------------------------------- handlers

  void store_original(Round r, MsgType ph, PlayerId signer, const Message& m) {
    auto& rs = state(r);
    auto idx = static_cast<std::size_t>(ph);
    if (rs.originals_from[idx].size() >= 2 * p_.n) return;
    if (rs.originals_from[idx].insert(signer).second) rs.originals[idx].push_back(m);
  }

  // Stores a proposer signature usable for digest d in round r, if valid.
  bool note_proposer_sig(Round r, const Digest& d, const Signature& psig) {
    if (d.is_bot()) return false;
    auto& rs = state(r);
    auto it = rs.proposer_sig.find(d);
    if (it != rs.proposer_sig.end()) return true;
    if (psig.signer != leader(r)) return false;
    if (!verify_phase_sig(*reg_, leader(r), MsgType::Propose, r, d, 0, psig)) return false;
    rs.proposer_sig.emplace(d, psig);
    ingest(r, MsgType::Propose, psig.signer, d, 0, psig);
    return true;
  }

  void handle_propose(const ProposeMsg& m, PlayerId from) {
    Round r = round_;
    ingest(r, MsgType::Propose, m.sig.signer, m.digest, 0, m.sig);
    if (m.sig.signer != leader(r)) {
      reject(Message(m), from, "propose-not-leader");
      evidence_actions(r);
      return;
    }
    if (m.digest != block_digest(m.block, r)) {
      reject(Message(m), from, "propose-digest-mismatch");
      evidence_actions(r);
      return;
    }
    known_blocks_.emplace(m.digest, m.block);
    state(r).proposer_sig.emplace(m.digest, m.sig);
    store_original(r, MsgType::Propose, m.sig.signer, Message(m));
    if (evidence_actions(r)) return;
    auto& rs = state(r);
    if (!rs.lock && !rs.committed_vc) {
      if (m.block.parent != tip()) {
        reject(Message(m), from, "parent-mismatch");
      } else {
        rs.lock = m.digest;
        if (me_ != leader(r) && !rs.sent_vote) {
          rs.sent_vote = true;
          enter_phase(Phase::Vote);
          broadcast_and_self(make_vote(key_, r, m.digest, m.sig));
        } else {
          enter_phase(Phase::Vote); // the leader does not vote but awaits votes
        }
      }
    }
    // A proposal can land after harvested certificates or finals already
    // assembled a quorum for its digest; the newly known block is all those
    // paths were waiting for.
    if (round_ == r) try_reveal(r, m.digest);
    if (round_ == r) try_finalize_reveal_path(r, m.digest);
    if (round_ == r) try_finalize_final_path(r, m.digest);
  }

  void handle_vote(const VoteMsg& m, PlayerId from) {
    Round r = round_;
    ingest(r, MsgType::Vote, m.sig.signer, m.digest, m.proposer_sig.tag, m.sig);
    bool psig_ok = note_proposer_sig(r, m.digest, m.proposer_sig);
    store_original(r, MsgType::Vote, m.sig.signer, Message(m));
    if (evidence_actions(r)) return;
    if (m.sig.signer == leader(r)) {
      reject(Message(m), from, "leader-vote");
      return;
    }
    if (!psig_ok) {
      reject(Message(m), from, "vote-bad-proposer-sig");
      return;
    }
    state(r).votes[m.digest].emplace(m.sig.signer, m.sig);
    try_commit(r, m.digest);
  }

  void try_commit(Round r, const Digest& d) {
    auto& rs = state(r);
    if (r != round_ || rs.sent_commit || rs.committed_vc) return;
    auto it = rs.votes.find(d);
    if (it == rs.votes.end() || it->second.size() < quorum()) return;
    auto psig = rs.proposer_sig.find(d);
    if (psig == rs.proposer_sig.end()) return;
    std::vector<CertEntry> cert;
    for (const auto& [p, sig] : it->second) {
      if (cert.size() >= quorum()) break;
      cert.push_back({p, sig});
    }
    rs.sent_commit = true;
    enter_phase(Phase::Commit);
    broadcast_and_self(make_commit(key_, r, d, psig->second, std::move(cert)));
  }

  void handle_commit(const CommitMsg& m, PlayerId from) {
    Round r = round_;
    ingest(r, MsgType::Commit, m.sig.signer, m.digest, opt_tag(m.proposer_sig), m.sig);
    if (m.digest.is_bot()) {
      // A timeout commit: evidence-neutral, never counted toward consensus.
      evidence_actions(r);
      return;
    }
    bool psig_ok = m.proposer_sig && note_proposer_sig(r, m.digest, *m.proposer_sig);
    // Harvest certificate entries: each one is an independently verifiable
    // vote, which both spreads evidence and lets stragglers assemble quorums.
    std::uint32_t valid_entries = 0;
    if (psig_ok) {
      std::set<PlayerId> seen;
      for (const auto& e : m.votes) {
        if (e.sig.signer != e.signer || e.signer == leader(r)) continue;
        if (!seen.insert(e.signer).second) continue;
        if (!verify_phase_sig(*reg_, e.signer, MsgType::Vote, r, m.digest,
                              m.proposer_sig->tag, e.sig)) {
          continue;
        }
        ingest(r, MsgType::Vote, e.signer, m.digest, m.proposer_sig->tag, e.sig);
        state(r).votes[m.digest].emplace(e.signer, e.sig);
        ++valid_entries;
      }
    }
    store_original(r, MsgType::Commit, m.sig.signer, Message(m));
    if (evidence_actions(r)) return;
    if (!psig_ok) {
      reject(Message(m), from, "commit-bad-proposer-sig");
      return;
    }
    if (valid_entries < quorum()) {
      reject(Message(m), from, "commit-thin-certificate");
      return;
    }
    state(r).commits[m.digest].emplace(m.sig.signer, m.sig);
    try_commit(r, m.digest); // harvested votes may have completed our quorum
    if (round_ != r) return;
    try_reveal(r, m.digest);
  }

  void try_reveal(Round r, const Digest& d) {
    auto& rs = state(r);
    if (r != round_ || rs.sent_reveal || rs.committed_vc) return;
    auto it = rs.commits.find(d);
    if (it == rs.commits.end() || it->second.size() < quorum()) return;
    auto psig = rs.proposer_sig.find(d);
    if (psig == rs.proposer_sig.end()) return;
    auto blk = known_blocks_.find(d);
    if (blk == known_blocks_.end()) return; // cannot go tentative on an unseen block
    std::vector<CertEntry> cert;
    for (const auto& [p, sig] : it->second) {
      if (cert.size() >= quorum()) break;
      cert.push_back({p, sig});
    }
    rs.sent_reveal = true;
    tentative_ = d;
    {
      auto& ev = trace(EventKind::Tentative);
      ev.digest = d;
      ev.txs = static_cast<std::uint32_t>(blk->second.txs.size());
    }
    enter_phase(Phase::Reveal);
    broadcast_and_self(make_reveal(key_, r, d, psig->second, std::move(cert)));
  }

  void handle_reveal(const RevealMsg& m, PlayerId from) {
    Round r = round_;
    ingest(r, MsgType::Reveal, m.sig.signer, m.digest, m.proposer_sig.tag, m.sig);
    bool psig_ok = note_proposer_sig(r, m.digest, m.proposer_sig);
    std::uint32_t valid_entries = 0;
    if (psig_ok) {
      std::set<PlayerId> seen;
      for (const auto& e : m.commits) {
        if (e.sig.signer != e.signer) continue;
        if (!seen.insert(e.signer).second) continue;
        if (!verify_phase_sig(*reg_, e.signer, MsgType::Commit, r, m.digest,
                              m.proposer_sig.tag, e.sig)) {
          continue;
        }
        ingest(r, MsgType::Commit, e.signer, m.digest, m.proposer_sig.tag, e.sig);
        state(r).commits[m.digest].emplace(e.signer, e.sig);
        ++valid_entries;
      }
    }
    store_original(r, MsgType::Reveal, m.sig.signer, Message(m));
    if (evidence_actions(r)) return; // fraud takes priority over finalization
    if (!psig_ok) {
      reject(Message(m), from, "reveal-bad-proposer-sig");
      return;
    }
    if (valid_entries < quorum()) {
      reject(Message(m), from, "reveal-thin-certificate");
      return;
    }
    state(r).reveals[m.digest].emplace(m.sig.signer, m.sig);
    try_reveal(r, m.digest);
    if (round_ != r) return;
    try_finalize_reveal_path(r, m.digest);
  }

  void try_finalize_reveal_path(Round r, const Digest& d) {
    auto& rs = state(r);
    auto it = rs.reveals.find(d);
    if (it == rs.reveals.end() || it->second.size() < quorum()) return;
    if (!known_blocks_.count(d)) return;
    finish_round(r, d);
  }

  void handle_final(const FinalMsg& m, PlayerId from) {
    Round r = round_;
    if (!note_proposer_sig(r, m.digest, m.proposer_sig)) {
      reject(Message(m), from, "final-bad-proposer-sig");
      evidence_actions(r);
      return;
    }
    if (evidence_actions(r)) return;
    state(r).finals[m.digest].insert(m.sig.signer);
    try_finalize_final_path(r, m.digest);
  }

  void try_finalize_final_path(Round r, const Digest& d) {
    auto& rs = state(r);
    auto it = rs.finals.find(d);
    if (it == rs.finals.end() || it->second.size() * 2 <= p_.n) return;
    if (!known_blocks_.count(d)) return;
    finish_round(r, d);
  }

  // Shared tail of both finalization paths for the live round: announce our
  // own Final once, finalize the block, move on.
  void finish_round(Round r, const Digest& d) {
    auto& rs = state(r);
    auto psig = rs.proposer_sig.find(d);
    if (psig == rs.proposer_sig.end()) return;
    if (!rs.sent_final) {
      rs.sent_final = true;
      broadcast(make_final(key_, r, d, psig->second));
    }
    finalize_block(d, r);
    if (r == round_) enter_round(r + 1);
  }

  void finalize_block(const Digest& d, Round label) {
    for (const auto& existing : chain_digests_) {
      if (existing == d) return; // already on our chain
    }
    auto blk = known_blocks_.find(d);
    if (blk == known_blocks_.end()) return;
    if (tentative_ && *tentative_ == d) {
      tentative_.reset(); // promoted, not rolled back
    }
    if (blk->second.parent != tip()) {
      pending_finals_[blk->second.parent] = {d, label};
      return;
    }
    append_final(d, blk->second, label);
    // A newly extended tip may unblock finals that arrived out of order.
    while (true) {
      auto p = pending_finals_.find(tip());
      if (p == pending_finals_.end()) break;
      auto [nd, nlabel] = p->second;
      pending_finals_.erase(p);
      auto nblk = known_blocks_.find(nd);
      if (nblk == known_blocks_.end()) break;
      append_final(nd, nblk->second, nlabel);
    }
  }

  void append_final(const Digest& d, const Block& b, Round label) {
    if (tentative_ && *tentative_ != d) rollback_tentative();
    chain_.push_back(b);
    chain_digests_.push_back(d);
    std::string ids = "ids=";
    for (std::size_t i = 0; i < b.txs.size(); ++i) {
      finalized_txs_.insert(b.txs[i].id);
      if (i) ids += ',';
      ids += std::to_string(b.txs[i].id);
    }
    auto& ev = trace(EventKind::Finalize);
    ev.round = label;
    ev.digest = d;
    ev.height = static_cast<std::int64_t>(chain_.size()) - 1;
    ev.txs = static_cast<std::uint32_t>(b.txs.size());
    ev.note = ids; // lets offline checks see exactly which txs were sealed
  }

  void handle_expose(const ExposeMsg& m, PlayerId from) {
    if (!verify_pof(m.proof, *reg_, p_.t0, m.round)) {
      reject(Message(m), from, "bad-proof");
      return;
    }
    state(m.round).exposed = true; // no need to duplicate the exposure
    apply_stash(m.proof.accused(), m.round);
    if (m.round == round_) abandon_round();
  }

  // --------------------------------------------------------- stale material

  // Messages for rounds we already left: mined for evidence and for late
  // quorums (a quorum of reveals or a majority of finals can still finalize
  // that round's block, which is how stragglers rejoin the chain).
  void stale_ingest(const Message& msg, PlayerId from) {
    (void)from;
    Round r = msg_round(msg);
    switch (msg_type(msg)) {
      case MsgType::Propose: {
        const auto& m = std::get<ProposeMsg>(msg);
        ingest(r, MsgType::Propose, m.sig.signer, m.digest, 0, m.sig);
        if (m.sig.signer == leader(r) && m.digest == block_digest(m.block, r)) {
          known_blocks_.emplace(m.digest, m.block);
          auto& rs = state(r);
          rs.proposer_sig.emplace(m.digest, m.sig);
          // A late proposal may be the missing piece behind an existing late
          // quorum of reveals or majority of finals.
          auto rv = rs.reveals.find(m.digest);
          if (rv != rs.reveals.end() && rv->second.size() >= quorum()) {
            finalize_block(m.digest, r);
          }
          auto fn = rs.finals.find(m.digest);
          if (fn != rs.finals.end() && fn->second.size() * 2 > p_.n) {
            finalize_block(m.digest, r);
          }
        }
        break;
      }
      case MsgType::Vote: {
        const auto& m = std::get<VoteMsg>(msg);
        ingest(r, MsgType::Vote, m.sig.signer, m.digest, m.proposer_sig.tag, m.sig);
        stale_note_psig(r, m.digest, m.proposer_sig);
        break;
      }
      case MsgType::Commit: {
        const auto& m = std::get<CommitMsg>(msg);
        ingest(r, MsgType::Commit, m.sig.signer, m.digest, opt_tag(m.proposer_sig), m.sig);
        if (!m.digest.is_bot() && m.proposer_sig &&
            stale_note_psig(r, m.digest, *m.proposer_sig)) {
          for (const auto& e : m.votes) {
            if (e.sig.signer != e.signer || e.signer == leader(r)) continue;
            if (verify_phase_sig(*reg_, e.signer, MsgType::Vote, r, m.digest,
                                 m.proposer_sig->tag, e.sig)) {
              ingest(r, MsgType::Vote, e.signer, m.digest, m.proposer_sig->tag, e.sig);
            }
          }
        }
        break;
      }
      case MsgType::Reveal: {
        const auto& m = std::get<RevealMsg>(msg);
        ingest(r, MsgType::Reveal, m.sig.signer, m.digest, m.proposer_sig.tag, m.sig);
        if (stale_note_psig(r, m.digest, m.proposer_sig)) {
          for (const auto& e : m.commits) {
            if (e.sig.signer != e.signer) continue;
            if (verify_phase_sig(*reg_, e.signer, MsgType::Commit, r, m.digest,
                                 m.proposer_sig.tag, e.sig)) {
              ingest(r, MsgType::Commit, e.signer, m.digest, m.proposer_sig.tag, e.sig);
            }
          }
          state(r).reveals[m.digest].emplace(m.sig.signer, m.sig);
          if (state(r).reveals[m.digest].size() >= quorum()) finalize_block(m.digest, r);
        }
        break;
      }
      case MsgType::Final: {
        const auto& m = std::get<FinalMsg>(msg);
        if (stale_note_psig(r, m.digest, m.proposer_sig)) {
          auto& rs = state(r);
          rs.finals[m.digest].insert(m.sig.signer);
          if (rs.finals[m.digest].size() * 2 > p_.n) finalize_block(m.digest, r);
        }
        break;
      }
      case MsgType::Expose: {
        const auto& m = std::get<ExposeMsg>(msg);
        if (verify_pof(m.proof, *reg_, p_.t0, m.round)) {
          state(m.round).exposed = true;
          apply_stash(m.proof.accused(), m.round);
        }
        break;
      }
      case MsgType::ViewChange:
      case MsgType::CommitView:
        break; // view-change traffic for a closed round carries no information
    }
    evidence_actions(r); // may broadcast an exposure for the old round
  }

  bool stale_note_psig(Round r, const Digest& d, const Signature& psig) {
    if (d.is_bot() || psig.signer != leader(r)) return false;
    auto& rs = state(r);
    if (rs.proposer_sig.count(d)) return true;
    if (!verify_phase_sig(*reg_, leader(r), MsgType::Propose, r, d, 0, psig)) return false;
    rs.proposer_sig.emplace(d, psig);
    ingest(r, MsgType::Propose, psig.signer, d, 0, psig);
    return true;
  }
};

} // namespace prft
