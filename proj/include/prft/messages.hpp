// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "prft/core.hpp"
#include "prft/crypto.hpp"
#include "prft/pof.hpp"

namespace prft {

// ---------------------------------------------------------------------------
// Wire messages
// ---------------------------------------------------------------------------
//
// Eight message kinds. Every message ends in the sender's envelope signature
// over its canonical core (kind, round, digest, carried proposer tag, extra);
// see crypto.hpp for what the core deliberately excludes. Certificates are
// bags of (signer, signature) entries whose bytes are reconstructed from the
// enclosing message, so each entry costs just over one signature on the wire
// and total message size stays linear in the certificate size.

// One certificate entry: a player's phase signature, context-free because the
// enclosing message supplies the (round, digest, proposer tag) it covers.
struct CertEntry {
  PlayerId signer = 0;
  Signature sig;

  friend bool operator==(const CertEntry& a, const CertEntry& b) {
    return a.signer == b.signer && a.sig == b.sig;
  }
};

// One view-change endorsement inside a view-change certificate.
struct SignedViewChange {
  PlayerId signer = 0;
  Phase phase = Phase::Propose; // phase whose timer expired at the signer
  Signature sig;

  friend bool operator==(const SignedViewChange& a, const SignedViewChange& b) {
    return a.signer == b.signer && a.phase == b.phase && a.sig == b.sig;
  }
};

struct ProposeMsg {
  Round round = 0;
  Block block;
  Digest digest = Digest::bot(); // H(block || round)
  Signature sig;

  friend bool operator==(const ProposeMsg& a, const ProposeMsg& b) {
    return a.round == b.round && a.block == b.block && a.digest == b.digest &&
           a.sig == b.sig;
  }
};

struct VoteMsg {
  Round round = 0;
  Digest digest = Digest::bot();
  Signature proposer_sig; // the proposer's signature this vote endorses
  Signature sig;

  friend bool operator==(const VoteMsg& a, const VoteMsg& b) {
    return a.round == b.round && a.digest == b.digest &&
           a.proposer_sig == b.proposer_sig && a.sig == b.sig;
  }
};

struct CommitMsg {
  Round round = 0;
  Digest digest = Digest::bot(); // empty digest = timeout commit
  std::optional<Signature> proposer_sig;
  std::vector<CertEntry> votes; // vote certificate (empty for timeout commits)
  Signature sig;

  friend bool operator==(const CommitMsg& a, const CommitMsg& b) {
    return a.round == b.round && a.digest == b.digest &&
           a.proposer_sig == b.proposer_sig && a.votes == b.votes && a.sig == b.sig;
  }
};

struct RevealMsg {
  Round round = 0;
  Digest digest = Digest::bot();
  Signature proposer_sig;
  std::vector<CertEntry> commits; // commit certificate
  Signature sig;

  friend bool operator==(const RevealMsg& a, const RevealMsg& b) {
    return a.round == b.round && a.digest == b.digest &&
           a.proposer_sig == b.proposer_sig && a.commits == b.commits && a.sig == b.sig;
  }
};

struct ExposeMsg {
  Round round = 0;
  ProofOfFraud proof;
  Signature sig;

  friend bool operator==(const ExposeMsg& a, const ExposeMsg& b) {
    return a.round == b.round && a.proof == b.proof && a.sig == b.sig;
  }
};

struct FinalMsg {
  Round round = 0;
  Digest digest = Digest::bot();
  Signature proposer_sig;
  Signature sig;

  friend bool operator==(const FinalMsg& a, const FinalMsg& b) {
    return a.round == b.round && a.digest == b.digest &&
           a.proposer_sig == b.proposer_sig && a.sig == b.sig;
  }
};

struct ViewChangeMsg {
  Round round = 0;
  Phase phase = Phase::Propose; // phase whose timer expired
  Signature sig;

  friend bool operator==(const ViewChangeMsg& a, const ViewChangeMsg& b) {
    return a.round == b.round && a.phase == b.phase && a.sig == b.sig;
  }
};

struct CommitViewMsg {
  Round round = 0;
  std::vector<SignedViewChange> entries; // view-change certificate
  Signature sig;

  friend bool operator==(const CommitViewMsg& a, const CommitViewMsg& b) {
    return a.round == b.round && a.entries == b.entries && a.sig == b.sig;
  }
};

using Message = std::variant<ProposeMsg, VoteMsg, CommitMsg, RevealMsg, ExposeMsg,
                             FinalMsg, ViewChangeMsg, CommitViewMsg>;

// ---------------------------------------------------------------------------
// Accessors
// ---------------------------------------------------------------------------

inline MsgType msg_type(const Message& m) {
  return static_cast<MsgType>(m.index());
}

inline Round msg_round(const Message& m) {
  return std::visit([](const auto& v) { return v.round; }, m);
}

inline const Signature& msg_envelope_sig(const Message& m) {
  return std::visit([](const auto& v) -> const Signature& { return v.sig; }, m);
}

inline PlayerId msg_signer(const Message& m) { return msg_envelope_sig(m).signer; }

// The digest a message endorses, when it carries one.
inline std::optional<Digest> msg_digest(const Message& m) {
  switch (msg_type(m)) {
    case MsgType::Propose: return std::get<ProposeMsg>(m).digest;
    case MsgType::Vote: return std::get<VoteMsg>(m).digest;
    case MsgType::Commit: return std::get<CommitMsg>(m).digest;
    case MsgType::Reveal: return std::get<RevealMsg>(m).digest;
    case MsgType::Final: return std::get<FinalMsg>(m).digest;
    default: return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Signing cores
// ---------------------------------------------------------------------------

inline std::uint64_t vc_extra(Phase p) { return static_cast<std::uint64_t>(p); }

inline ByteBuf encode_vc_entries(const std::vector<SignedViewChange>& entries) {
  Encoder e;
  e.put_u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& v : entries) {
    e.put_u32(v.signer);
    e.put_u8(static_cast<std::uint8_t>(v.phase));
    encode_signature(e, v.sig);
  }
  return e.take();
}

inline std::uint64_t cv_hash(const std::vector<SignedViewChange>& entries) {
  return fnv1a64(encode_vc_entries(entries));
}

inline std::uint64_t opt_tag(const std::optional<Signature>& s) {
  return s ? s->tag : 0;
}

// The canonical bytes each envelope signature covers.
inline ByteBuf envelope_core(const Message& m) {
  switch (msg_type(m)) {
    case MsgType::Propose: {
      const auto& v = std::get<ProposeMsg>(m);
      return sign_core_bytes(MsgType::Propose, v.round, v.digest, 0);
    }
    case MsgType::Vote: {
      const auto& v = std::get<VoteMsg>(m);
      return sign_core_bytes(MsgType::Vote, v.round, v.digest, v.proposer_sig.tag);
    }
    case MsgType::Commit: {
      const auto& v = std::get<CommitMsg>(m);
      return sign_core_bytes(MsgType::Commit, v.round, v.digest, opt_tag(v.proposer_sig));
    }
    case MsgType::Reveal: {
      const auto& v = std::get<RevealMsg>(m);
      return sign_core_bytes(MsgType::Reveal, v.round, v.digest, v.proposer_sig.tag);
    }
    case MsgType::Expose: {
      const auto& v = std::get<ExposeMsg>(m);
      return sign_core_bytes(MsgType::Expose, v.round, Digest::bot(), 0, pof_hash(v.proof));
    }
    case MsgType::Final: {
      const auto& v = std::get<FinalMsg>(m);
      return sign_core_bytes(MsgType::Final, v.round, v.digest, v.proposer_sig.tag);
    }
    case MsgType::ViewChange: {
      const auto& v = std::get<ViewChangeMsg>(m);
      return sign_core_bytes(MsgType::ViewChange, v.round, Digest::bot(), 0,
                             vc_extra(v.phase));
    }
    case MsgType::CommitView: {
      const auto& v = std::get<CommitViewMsg>(m);
      return sign_core_bytes(MsgType::CommitView, v.round, Digest::bot(), 0,
                             cv_hash(v.entries));
    }
  }
  throw std::logic_error("unreachable message kind");
}

// Envelope check only: the final signature covers the message core. Deeper
// semantic checks (certificate contents, proposer signatures, proofs) are the
// replica handlers' job, because their failure modes feed the evidence tables
// rather than simply dropping the message.
inline bool verify_envelope(const KeyRegistry& reg, const Message& m) {
  return reg.verify(msg_envelope_sig(m), envelope_core(m));
}

// Visits every signature a message carries, embedded ones included. Used by
// the network layer to assert global unforgeability.
template <typename Fn>
void for_each_signature(const Message& m, Fn&& fn) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, VoteMsg> || std::is_same_v<T, RevealMsg> ||
                      std::is_same_v<T, FinalMsg>) {
          fn(v.proposer_sig);
        }
        if constexpr (std::is_same_v<T, CommitMsg>) {
          if (v.proposer_sig) fn(*v.proposer_sig);
          for (const auto& c : v.votes) fn(c.sig);
        }
        if constexpr (std::is_same_v<T, RevealMsg>) {
          for (const auto& c : v.commits) fn(c.sig);
        }
        if constexpr (std::is_same_v<T, ExposeMsg>) {
          for (const auto& p : v.proof.pairs) {
            fn(p.a.sig);
            fn(p.b.sig);
          }
        }
        if constexpr (std::is_same_v<T, CommitViewMsg>) {
          for (const auto& e : v.entries) fn(e.sig);
        }
        fn(v.sig);
      },
      m);
}

// First forged signature a message carries, if any: a signature whose tag was
// not produced with the claimed signer's secret. The network layer aborts the
// whole run on such a message — the idealized scheme makes forgery impossible,
// so one slipping through means the simulation itself is wrong.
inline std::optional<PlayerId> find_forged(const KeyRegistry& reg, const Message& m) {
  std::optional<PlayerId> bad;
  for_each_signature(m, [&](const Signature& s) {
    if (!bad && !reg.authentic(s)) bad = s.signer;
  });
  return bad;
}

// ---------------------------------------------------------------------------
// Factories (build + sign in one step)
// ---------------------------------------------------------------------------

inline ProposeMsg make_propose(const KeyPair& key, Round round, Block block) {
  ProposeMsg m;
  m.round = round;
  m.digest = block_digest(block, round);
  m.block = std::move(block);
  m.sig = sign_phase(key, MsgType::Propose, round, m.digest, 0);
  return m;
}

inline VoteMsg make_vote(const KeyPair& key, Round round, const Digest& digest,
                         const Signature& proposer_sig) {
  VoteMsg m;
  m.round = round;
  m.digest = digest;
  m.proposer_sig = proposer_sig;
  m.sig = sign_phase(key, MsgType::Vote, round, digest, proposer_sig.tag);
  return m;
}

inline CommitMsg make_commit(const KeyPair& key, Round round, const Digest& digest,
                             std::optional<Signature> proposer_sig,
                             std::vector<CertEntry> votes) {
  CommitMsg m;
  m.round = round;
  m.digest = digest;
  m.proposer_sig = proposer_sig;
  m.votes = std::move(votes);
  m.sig = sign_phase(key, MsgType::Commit, round, digest, opt_tag(proposer_sig));
  return m;
}

inline RevealMsg make_reveal(const KeyPair& key, Round round, const Digest& digest,
                             const Signature& proposer_sig, std::vector<CertEntry> commits) {
  RevealMsg m;
  m.round = round;
  m.digest = digest;
  m.proposer_sig = proposer_sig;
  m.commits = std::move(commits);
  m.sig = sign_phase(key, MsgType::Reveal, round, digest, proposer_sig.tag);
  return m;
}

inline ExposeMsg make_expose(const KeyPair& key, Round round, ProofOfFraud proof) {
  ExposeMsg m;
  m.round = round;
  m.sig = sign_phase(key, MsgType::Expose, round, Digest::bot(), 0, pof_hash(proof));
  m.proof = std::move(proof);
  return m;
}

inline FinalMsg make_final(const KeyPair& key, Round round, const Digest& digest,
                           const Signature& proposer_sig) {
  FinalMsg m;
  m.round = round;
  m.digest = digest;
  m.proposer_sig = proposer_sig;
  m.sig = sign_phase(key, MsgType::Final, round, digest, proposer_sig.tag);
  return m;
}

inline ViewChangeMsg make_view_change(const KeyPair& key, Round round, Phase phase) {
  ViewChangeMsg m;
  m.round = round;
  m.phase = phase;
  m.sig = sign_phase(key, MsgType::ViewChange, round, Digest::bot(), 0, vc_extra(phase));
  return m;
}

inline CommitViewMsg make_commit_view(const KeyPair& key, Round round,
                                      std::vector<SignedViewChange> entries) {
  CommitViewMsg m;
  m.round = round;
  m.sig = sign_phase(key, MsgType::CommitView, round, Digest::bot(), 0, cv_hash(entries));
  m.entries = std::move(entries);
  return m;
}

// ---------------------------------------------------------------------------
// Wire encoding
// ---------------------------------------------------------------------------

inline void encode_cert(Encoder& e, const std::vector<CertEntry>& cert) {
  e.put_u32(static_cast<std::uint32_t>(cert.size()));
  for (const auto& c : cert) {
    e.put_u32(c.signer);
    encode_signature(e, c.sig);
  }
}

inline std::vector<CertEntry> decode_cert(Decoder& d) {
  std::vector<CertEntry> cert;
  std::uint32_t count = d.get_u32();
  // An entry is at least 4 + kSigCoreBytes wire bytes; reject counts that
  // cannot fit before reserving storage.
  if (count > d.remaining() / (4 + kSigCoreBytes)) {
    throw DecodeError("certificate count exceeds input");
  }
  cert.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CertEntry c;
    c.signer = d.get_u32();
    c.sig = decode_signature(d);
    cert.push_back(c);
  }
  return cert;
}

inline ByteBuf encode_message(const Message& m) {
  Encoder e;
  e.put_u8(static_cast<std::uint8_t>(msg_type(m)));
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        e.put_u64(v.round);
        if constexpr (std::is_same_v<T, ProposeMsg>) {
          encode_block(e, v.block);
          put_digest(e, v.digest);
        } else if constexpr (std::is_same_v<T, VoteMsg>) {
          put_digest(e, v.digest);
          encode_signature(e, v.proposer_sig);
        } else if constexpr (std::is_same_v<T, CommitMsg>) {
          put_digest(e, v.digest);
          e.put_bool(v.proposer_sig.has_value());
          if (v.proposer_sig) encode_signature(e, *v.proposer_sig);
          encode_cert(e, v.votes);
        } else if constexpr (std::is_same_v<T, RevealMsg>) {
          put_digest(e, v.digest);
          encode_signature(e, v.proposer_sig);
          encode_cert(e, v.commits);
        } else if constexpr (std::is_same_v<T, ExposeMsg>) {
          encode_pof(e, v.proof);
        } else if constexpr (std::is_same_v<T, FinalMsg>) {
          put_digest(e, v.digest);
          encode_signature(e, v.proposer_sig);
        } else if constexpr (std::is_same_v<T, ViewChangeMsg>) {
          e.put_u8(static_cast<std::uint8_t>(v.phase));
        } else if constexpr (std::is_same_v<T, CommitViewMsg>) {
          e.put_bytes(encode_vc_entries(v.entries));
        }
        encode_signature(e, v.sig);
      },
      m);
  return e.take();
}

inline Message decode_message(const ByteBuf& bytes) {
  Decoder d(bytes);
  auto kind = static_cast<MsgType>(d.get_u8());
  Message out;
  switch (kind) {
    case MsgType::Propose: {
      ProposeMsg v;
      v.round = d.get_u64();
      v.block = decode_block(d);
      v.digest = get_digest(d);
      v.sig = decode_signature(d);
      out = v;
      break;
    }
    case MsgType::Vote: {
      VoteMsg v;
      v.round = d.get_u64();
      v.digest = get_digest(d);
      v.proposer_sig = decode_signature(d);
      v.sig = decode_signature(d);
      out = v;
      break;
    }
    case MsgType::Commit: {
      CommitMsg v;
      v.round = d.get_u64();
      v.digest = get_digest(d);
      if (d.get_bool()) v.proposer_sig = decode_signature(d);
      v.votes = decode_cert(d);
      v.sig = decode_signature(d);
      out = v;
      break;
    }
    case MsgType::Reveal: {
      RevealMsg v;
      v.round = d.get_u64();
      v.digest = get_digest(d);
      v.proposer_sig = decode_signature(d);
      v.commits = decode_cert(d);
      v.sig = decode_signature(d);
      out = v;
      break;
    }
    case MsgType::Expose: {
      ExposeMsg v;
      v.round = d.get_u64();
      v.proof = decode_pof(d);
      v.sig = decode_signature(d);
      out = v;
      break;
    }
    case MsgType::Final: {
      FinalMsg v;
      v.round = d.get_u64();
      v.digest = get_digest(d);
      v.proposer_sig = decode_signature(d);
      v.sig = decode_signature(d);
      out = v;
      break;
    }
    case MsgType::ViewChange: {
      ViewChangeMsg v;
      v.round = d.get_u64();
      v.phase = static_cast<Phase>(d.get_u8());
      if (v.phase > Phase::ViewChangeWait) throw DecodeError("bad phase");
      v.sig = decode_signature(d);
      out = v;
      break;
    }
    case MsgType::CommitView: {
      CommitViewMsg v;
      v.round = d.get_u64();
      std::uint32_t count = d.get_u32();
      if (count > d.remaining() / (5 + kSigCoreBytes)) {
        throw DecodeError("certificate count exceeds input");
      }
      v.entries.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        SignedViewChange s;
        s.signer = d.get_u32();
        s.phase = static_cast<Phase>(d.get_u8());
        if (s.phase > Phase::ViewChangeWait) throw DecodeError("bad phase");
        s.sig = decode_signature(d);
        v.entries.push_back(s);
      }
      v.sig = decode_signature(d);
      out = v;
      break;
    }
    default:
      throw DecodeError("unknown message kind");
  }
  if (!d.done()) throw DecodeError("trailing bytes");
  return out;
}

// Simulated wire size: the encoded bytes plus, for proposals, the nominal
// transaction payload bytes that a real block would carry.
inline std::size_t wire_size(const Message& m) {
  std::size_t sz = encode_message(m).size();
  if (const auto* p = std::get_if<ProposeMsg>(&m)) {
    for (const auto& tx : p->block.txs) sz += tx.payload_size;
  }
  return sz;
}

} // namespace prft
