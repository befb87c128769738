// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "prft/core.hpp"
#include "prft/crypto.hpp"

namespace prft {

// ---------------------------------------------------------------------------
// Fraud evidence
// ---------------------------------------------------------------------------
//
// Double-signing is the punishable offence: one player endorsing two distinct
// non-empty digests with the same message kind in the same round. Replicas
// file every phase signature they see into per-(round, kind) tables; when the
// number of provably double-signing players in a round exceeds the fault
// budget t0, the table yields a proof of fraud — a list of signature pairs
// that any third party can check against public keys alone.

// One phase signature together with the context needed to re-derive the bytes
// it signed: the endorsed digest and the proposer-signature tag it covered.
struct SigRecord {
  Digest digest = Digest::bot();
  std::uint64_t proposer_tag = 0;
  Signature sig;

  friend bool operator==(const SigRecord& a, const SigRecord& b) {
    return a.digest == b.digest && a.proposer_tag == b.proposer_tag && a.sig == b.sig;
  }
};

// Two same-kind, same-round signatures by one player over distinct digests.
struct ConflictPair {
  PlayerId signer = 0;
  Round round = 0;
  MsgType phase = MsgType::Vote;
  SigRecord a; // record with the smaller digest
  SigRecord b;

  friend bool operator==(const ConflictPair& x, const ConflictPair& y) {
    return x.signer == y.signer && x.round == y.round && x.phase == y.phase &&
           x.a == y.a && x.b == y.b;
  }
};

struct ProofOfFraud {
  std::vector<ConflictPair> pairs;

  std::vector<PlayerId> accused() const {
    std::vector<PlayerId> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(p.signer);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  friend bool operator==(const ProofOfFraud& a, const ProofOfFraud& b) {
    return a.pairs == b.pairs;
  }
};

inline void encode_pof(Encoder& e, const ProofOfFraud& pof) {
  e.put_u32(static_cast<std::uint32_t>(pof.pairs.size()));
  for (const auto& p : pof.pairs) {
    e.put_u8(static_cast<std::uint8_t>(p.phase));
    e.put_u64(p.round);
    e.put_u32(p.signer);
    for (const SigRecord* r : {&p.a, &p.b}) {
      put_digest(e, r->digest);
      e.put_u64(r->proposer_tag);
      encode_signature(e, r->sig);
    }
  }
}

inline ProofOfFraud decode_pof(Decoder& d) {
  ProofOfFraud pof;
  std::uint32_t count = d.get_u32();
  // A pair is at least 13 + 2 * (17 + kSigCoreBytes) wire bytes; reject
  // counts that cannot fit before reserving storage.
  if (count > d.remaining() / (13 + 2 * (17 + kSigCoreBytes))) {
    throw DecodeError("proof pair count exceeds input");
  }
  pof.pairs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ConflictPair p;
    p.phase = static_cast<MsgType>(d.get_u8());
    if (!consensus_phase_of(p.phase)) throw DecodeError("proof pair with non-phase kind");
    p.round = d.get_u64();
    p.signer = d.get_u32();
    for (SigRecord* r : {&p.a, &p.b}) {
      r->digest = get_digest(d);
      r->proposer_tag = d.get_u64();
      r->sig = decode_signature(d);
    }
    pof.pairs.push_back(p);
  }
  return pof;
}

inline std::uint64_t pof_hash(const ProofOfFraud& pof) {
  Encoder e;
  encode_pof(e, pof);
  return fnv1a64(e.bytes());
}

// A proof is valid when every pair is a genuine same-round same-kind conflict
// (distinct non-empty digests, both signatures verifying for the named
// player) and the distinct accused players number more than t0.
inline bool verify_pof(const ProofOfFraud& pof, const KeyRegistry& reg, std::uint32_t t0,
                       std::optional<Round> require_round = std::nullopt) {
  for (const auto& p : pof.pairs) {
    if (!consensus_phase_of(p.phase)) return false;
    if (require_round && p.round != *require_round) return false;
    if (p.a.digest.is_bot() || p.b.digest.is_bot()) return false;
    if (p.a.digest == p.b.digest) return false;
    for (const SigRecord* r : {&p.a, &p.b}) {
      if (r->sig.signer != p.signer) return false;
      if (!verify_phase_sig(reg, p.signer, p.phase, p.round, r->digest, r->proposer_tag,
                            r->sig)) {
        return false;
      }
    }
  }
  return pof.accused().size() > t0;
}

// ---------------------------------------------------------------------------
// Signature tables
// ---------------------------------------------------------------------------
//
// One table per (round, message kind). Rows are players; each row holds the
// records seen for that player, at most one per distinct digest. A row with
// two or more distinct non-empty digests convicts its player. Empty-digest
// records never convict: endorsing the empty value is a legitimate protocol
// action (a timeout commit), not an equivocation.

class SignatureTable {
 public:
  SignatureTable() = default;
  SignatureTable(MsgType phase, Round round) : phase_(phase), round_(round) {}

  MsgType phase() const { return phase_; }
  Round round() const { return round_; }

  // Files a record. For a repeated (player, digest) cell the record with the
  // lexicographically least (proposer_tag, tag) wins, so table contents do not
  // depend on delivery order.
  void add(PlayerId signer, const SigRecord& rec) {
    auto& row = rows_[signer];
    auto it = row.find(rec.digest);
    if (it == row.end()) {
      row.emplace(rec.digest, rec);
    } else {
      const SigRecord& old = it->second;
      if (std::pair(rec.proposer_tag, rec.sig.tag) <
          std::pair(old.proposer_tag, old.sig.tag)) {
        it->second = rec;
      }
    }
  }

  bool has_conflict(PlayerId signer) const {
    auto it = rows_.find(signer);
    return it != rows_.end() && distinct_real(it->second) >= 2;
  }

  std::vector<PlayerId> conflicting() const {
    std::vector<PlayerId> out;
    for (const auto& [p, row] : rows_) {
      if (distinct_real(row) >= 2) out.push_back(p);
    }
    return out; // ascending: map iteration order
  }

  const std::map<PlayerId, std::map<Digest, SigRecord>>& rows() const { return rows_; }

 private:
  static std::size_t distinct_real(const std::map<Digest, SigRecord>& row) {
    std::size_t k = 0;
    for (const auto& [d, rec] : row) {
      if (!d.is_bot()) ++k;
    }
    return k;
  }

  MsgType phase_ = MsgType::Vote;
  Round round_ = 0;
  std::map<PlayerId, std::map<Digest, SigRecord>> rows_;
};

// Extracts conflict pairs from one table: players in ascending id order, each
// contributing its two smallest conflicting digests. Extraction stops as soon
// as t0 + 1 players are accused — the smallest set that already proves the
// fault budget is exceeded.
inline ProofOfFraud construct_proof(const SignatureTable& table, std::uint32_t t0) {
  ProofOfFraud pof;
  std::set<PlayerId> accused;
  for (const auto& [signer, row] : table.rows()) {
    if (accused.size() >= t0 + 1) break;
    const SigRecord* first = nullptr;
    const SigRecord* second = nullptr;
    for (const auto& [d, rec] : row) { // map order: bot first, then ascending values
      if (d.is_bot()) continue;
      if (!first) {
        first = &rec;
      } else {
        second = &rec;
        break;
      }
    }
    if (!second) continue;
    ConflictPair p;
    p.signer = signer;
    p.round = table.round();
    p.phase = table.phase();
    p.a = *first;
    p.b = *second;
    pof.pairs.push_back(p);
    accused.insert(signer);
  }
  return pof;
}

// Merges per-kind proofs for one round and trims the result to the first
// t0 + 1 accused players, ordering pairs by (kind, player). Keeping the proof
// minimal keeps exposure messages near the size a real deployment would send.
inline ProofOfFraud merge_and_trim(std::vector<ProofOfFraud> parts, std::uint32_t t0) {
  ProofOfFraud merged;
  for (auto& part : parts) {
    for (auto& p : part.pairs) merged.pairs.push_back(std::move(p));
  }
  std::sort(merged.pairs.begin(), merged.pairs.end(),
            [](const ConflictPair& x, const ConflictPair& y) {
              return std::tuple(x.phase, x.signer, x.round) <
                     std::tuple(y.phase, y.signer, y.round);
            });
  ProofOfFraud out;
  std::set<PlayerId> kept;
  for (auto& p : merged.pairs) {
    if (kept.count(p.signer) || kept.size() < t0 + 1) {
      kept.insert(p.signer);
      // at most one pair per (kind, player)
      bool dup = false;
      for (const auto& q : out.pairs) {
        if (q.signer == p.signer && q.phase == p.phase) {
          dup = true;
          break;
        }
      }
      if (!dup) out.pairs.push_back(std::move(p));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Collateral
// ---------------------------------------------------------------------------
//
// Every player posts collateral L at setup. A valid proof of fraud stashes
// (confiscates) the collateral of each accused player, at most once each.

class CollateralLedger {
 public:
  CollateralLedger() = default;
  CollateralLedger(std::uint32_t n, double collateral)
      : collateral_(collateral), stashed_(n, false) {}

  // Returns the players newly stashed by this call (already-stashed ids are
  // skipped so repeated proofs against the same player are idempotent).
  std::vector<PlayerId> stash(std::span<const PlayerId> accused) {
    std::vector<PlayerId> fresh;
    for (PlayerId p : accused) {
      if (p < stashed_.size() && !stashed_[p]) {
        stashed_[p] = true;
        fresh.push_back(p);
      }
    }
    return fresh;
  }
  std::vector<PlayerId> stash(const std::vector<PlayerId>& accused) {
    return stash(std::span<const PlayerId>(accused.data(), accused.size()));
  }

  bool stashed(PlayerId p) const { return p < stashed_.size() && stashed_[p]; }
  double balance(PlayerId p) const { return stashed(p) ? 0.0 : collateral_; }
  double collateral() const { return collateral_; }
  std::size_t stashed_count() const {
    return static_cast<std::size_t>(std::count(stashed_.begin(), stashed_.end(), true));
  }

 private:
  double collateral_ = 0.0;
  std::vector<bool> stashed_;
};

} // namespace prft
