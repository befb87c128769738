// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
#pragma once

#include <cstdint>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace prft {

// ---------------------------------------------------------------------------
// Fundamental scalar types
// ---------------------------------------------------------------------------

using Tick = std::uint64_t;     // discrete simulated time
using Round = std::uint64_t;    // consensus round number
using PlayerId = std::uint32_t; // 0-based player index
using ByteBuf = std::vector<std::uint8_t>;

// Round-robin leader rotation.
inline PlayerId leader_of(Round r, std::uint32_t n) {
  return static_cast<PlayerId>(r % n);
}

// ---------------------------------------------------------------------------
// Hashing (FNV-1a, 64-bit)
// ---------------------------------------------------------------------------
//
// The simulator models the protocol's hash function with FNV-1a 64. It is not
// cryptographically secure, but it is deterministic, fast, and collision-free
// in practice over the small structured inputs this toolkit produces; the
// test suite checks for collisions over its full message corpus.

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> data,
                             std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (std::uint8_t b : data) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a64(const ByteBuf& data) {
  return fnv1a64(std::span<const std::uint8_t>(data.data(), data.size()));
}

// ---------------------------------------------------------------------------
// Canonical binary encoding
// ---------------------------------------------------------------------------
//
// All signed and hashed material goes through one canonical little-endian
// encoder so that "same content" always means "same bytes".

class Encoder {
 public:
  Encoder& put_u8(std::uint8_t v) {
    buf_.push_back(v);
    return *this;
  }
  Encoder& put_u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  Encoder& put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  Encoder& put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  Encoder& put_bool(bool v) { return put_u8(v ? 1 : 0); }
  Encoder& put_bytes(std::span<const std::uint8_t> v) {
    buf_.insert(buf_.end(), v.begin(), v.end());
    return *this;
  }
  Encoder& put_bytes(const ByteBuf& v) {
    return put_bytes(std::span<const std::uint8_t>(v.data(), v.size()));
  }

  const ByteBuf& bytes() const { return buf_; }
  ByteBuf take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  ByteBuf buf_;
};

struct DecodeError : std::runtime_error {
  explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

class Decoder {
 public:
  explicit Decoder(std::span<const std::uint8_t> data) : data_(data) {}
  explicit Decoder(const ByteBuf& data)
      : data_(std::span<const std::uint8_t>(data.data(), data.size())) {}

  std::uint8_t get_u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint16_t get_u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v = static_cast<std::uint16_t>(v | (std::uint16_t{data_[pos_++]} << (8 * i)));
    return v;
  }
  std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t get_u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{data_[pos_++]} << (8 * i);
    return v;
  }
  bool get_bool() {
    std::uint8_t v = get_u8();
    if (v > 1) throw DecodeError("bool out of range");
    return v == 1;
  }
  ByteBuf get_bytes(std::size_t len) {
    need(len);
    ByteBuf out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                data_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return out;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t k) const {
    if (data_.size() - pos_ < k) throw DecodeError("buffer underrun");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Digests
// ---------------------------------------------------------------------------
//
// A digest is either a hash value or the distinguished "empty" value (written
// bot in logs). The empty value is represented structurally, outside the hash
// codomain, so no sequence of bytes can collide with it.

struct Digest {
  std::uint64_t value = 0;
  bool bottom = true;

  static Digest of(std::uint64_t v) { return Digest{v, false}; }
  static Digest bot() { return Digest{}; }

  bool is_bot() const { return bottom; }

  friend bool operator==(const Digest& a, const Digest& b) {
    if (a.bottom != b.bottom) return false;
    return a.bottom || a.value == b.value;
  }
  friend bool operator!=(const Digest& a, const Digest& b) { return !(a == b); }
  // Total order with bot first; used wherever digest sets must be canonical.
  friend bool operator<(const Digest& a, const Digest& b) {
    if (a.bottom != b.bottom) return a.bottom;
    return !a.bottom && a.value < b.value;
  }
};

inline std::string hex_u64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

inline std::string to_string(const Digest& d) {
  return d.bottom ? std::string("bot") : hex_u64(d.value);
}

inline Encoder& put_digest(Encoder& e, const Digest& d) {
  e.put_bool(d.bottom);
  e.put_u64(d.bottom ? 0 : d.value);
  return e;
}

inline Digest get_digest(Decoder& d) {
  bool bottom = d.get_bool();
  std::uint64_t v = d.get_u64();
  if (bottom && v != 0) throw DecodeError("non-canonical empty digest");
  return bottom ? Digest::bot() : Digest::of(v);
}

// ---------------------------------------------------------------------------
// Transactions and blocks
// ---------------------------------------------------------------------------

struct Transaction {
  std::uint64_t id = 0;
  std::uint32_t payload_size = 0; // simulated payload bytes (metrics only)
  bool censored = false;          // tagged for censorship experiments

  friend bool operator==(const Transaction& a, const Transaction& b) {
    return a.id == b.id && a.payload_size == b.payload_size && a.censored == b.censored;
  }
};

struct Block {
  Round round = 0;
  PlayerId proposer = 0;
  Digest parent = Digest::bot(); // digest of the previous finalized block
  std::vector<Transaction> txs;

  friend bool operator==(const Block& a, const Block& b) {
    return a.round == b.round && a.proposer == b.proposer && a.parent == b.parent &&
           a.txs == b.txs;
  }
};

inline void encode_block(Encoder& e, const Block& b) {
  e.put_u64(b.round);
  e.put_u32(b.proposer);
  put_digest(e, b.parent);
  e.put_u32(static_cast<std::uint32_t>(b.txs.size()));
  for (const auto& tx : b.txs) {
    e.put_u64(tx.id);
    e.put_u32(tx.payload_size);
    e.put_bool(tx.censored);
  }
}

inline Block decode_block(Decoder& d) {
  Block b;
  b.round = d.get_u64();
  b.proposer = d.get_u32();
  b.parent = get_digest(d);
  std::uint32_t ntx = d.get_u32();
  // Each transaction occupies at least 13 bytes on the wire; reject
  // counts that cannot possibly fit before reserving storage.
  if (ntx > d.remaining() / 13) throw DecodeError("transaction count exceeds input");
  b.txs.reserve(ntx);
  for (std::uint32_t i = 0; i < ntx; ++i) {
    Transaction tx;
    tx.id = d.get_u64();
    tx.payload_size = d.get_u32();
    tx.censored = d.get_bool();
    b.txs.push_back(tx);
  }
  return b;
}

// Digest of a block for a given round: the round is appended to the encoded
// block before hashing, so the same block content proposed in two different
// rounds yields two different digests.
inline Digest block_digest(const Block& b, Round r) {
  Encoder e;
  encode_block(e, b);
  e.put_u64(r);
  return Digest::of(fnv1a64(e.bytes()));
}

inline Digest block_digest(const Block& b) { return block_digest(b, b.round); }

// Simulated wire size of a block: the metadata actually encoded plus the
// nominal payload bytes of each transaction.
inline std::size_t block_wire_size(const Block& b) {
  Encoder e;
  encode_block(e, b);
  std::size_t sz = e.size();
  for (const auto& tx : b.txs) sz += tx.payload_size;
  return sz;
}

// ---------------------------------------------------------------------------
// Phases, message kinds, player roles, system-state labels
// ---------------------------------------------------------------------------

enum class Phase : std::uint8_t { Propose = 0, Vote, Commit, Reveal, ViewChangeWait };

enum class MsgType : std::uint8_t {
  Propose = 0,
  Vote,
  Commit,
  Reveal,
  Expose,
  Final,
  ViewChange,
  CommitView,
};

inline constexpr int kNumMsgTypes = 8;

// The four message kinds that correspond one-to-one to consensus phases.
inline std::optional<Phase> consensus_phase_of(MsgType t) {
  switch (t) {
    case MsgType::Propose: return Phase::Propose;
    case MsgType::Vote: return Phase::Vote;
    case MsgType::Commit: return Phase::Commit;
    case MsgType::Reveal: return Phase::Reveal;
    default: return std::nullopt;
  }
}

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Propose: return "propose";
    case Phase::Vote: return "vote";
    case Phase::Commit: return "commit";
    case Phase::Reveal: return "reveal";
    case Phase::ViewChangeWait: return "view_change_wait";
  }
  return "?";
}

inline const char* to_string(MsgType t) {
  switch (t) {
    case MsgType::Propose: return "propose";
    case MsgType::Vote: return "vote";
    case MsgType::Commit: return "commit";
    case MsgType::Reveal: return "reveal";
    case MsgType::Expose: return "expose";
    case MsgType::Final: return "final";
    case MsgType::ViewChange: return "view_change";
    case MsgType::CommitView: return "commit_view";
  }
  return "?";
}

inline std::optional<MsgType> msg_type_from_string(const std::string& s) {
  for (int i = 0; i < kNumMsgTypes; ++i) {
    auto t = static_cast<MsgType>(i);
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

inline std::optional<Phase> phase_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(Phase::ViewChangeWait); ++i) {
    auto p = static_cast<Phase>(i);
    if (s == to_string(p)) return p;
  }
  return std::nullopt;
}

enum class Role : std::uint8_t { Honest = 0, Rational, Byzantine };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::Honest: return "honest";
    case Role::Rational: return "rational";
    case Role::Byzantine: return "byzantine";
  }
  return "?";
}

struct PlayerRole {
  Role role = Role::Honest;
  int theta = 3; // preference type of a rational player (1, 2 or 3)
};

// Aggregate label for what the system did in a round (or over a whole run):
// honest execution, a null period (no progress), a censored period, or a fork.
enum class SystemStateLabel : std::uint8_t { HonestExec = 0, NP, CP, Fork };

inline const char* to_string(SystemStateLabel s) {
  switch (s) {
    case SystemStateLabel::HonestExec: return "honest";
    case SystemStateLabel::NP: return "np";
    case SystemStateLabel::CP: return "cp";
    case SystemStateLabel::Fork: return "fork";
  }
  return "?";
}

} // namespace prft
