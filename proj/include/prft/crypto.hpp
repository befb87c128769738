// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "prft/core.hpp"

namespace prft {

// ---------------------------------------------------------------------------
// Simulated signatures
// ---------------------------------------------------------------------------
//
// The toolkit models an idealized EUF-CMA signature scheme with a keyed-hash
// construction: sign(m) = (H(m), H(secret || H(m))). Within one simulation the
// scheme behaves like an ideal scheme — a verifying signature can only have
// been produced by the holder of the secret — because adversary strategies are
// code in this repository and none of them read other players' secrets. The
// network layer asserts this globally: every signature on every wire message
// must verify against its claimed signer.
//
// A signature occupies exactly `kappa` bytes on the wire (22 bytes of content
// zero-padded to kappa), so message-size accounting scales with the security
// parameter the way a real deployment would.

inline constexpr std::uint16_t kSigCoreBytes = 22; // 4 signer + 2 kappa + 8 digest + 8 tag
inline constexpr std::uint16_t kDefaultKappa = 64;

struct Signature {
  PlayerId signer = 0;
  std::uint16_t kappa = kDefaultKappa;
  std::uint64_t digest = 0; // H(message)
  std::uint64_t tag = 0;    // H(secret || digest)

  friend bool operator==(const Signature& a, const Signature& b) {
    return a.signer == b.signer && a.kappa == b.kappa && a.digest == b.digest &&
           a.tag == b.tag;
  }
  friend bool operator!=(const Signature& a, const Signature& b) { return !(a == b); }
};

inline void encode_signature(Encoder& e, const Signature& s) {
  e.put_u32(s.signer);
  e.put_u16(s.kappa);
  e.put_u64(s.digest);
  e.put_u64(s.tag);
  for (std::uint16_t i = kSigCoreBytes; i < s.kappa; ++i) e.put_u8(0);
}

inline Signature decode_signature(Decoder& d) {
  Signature s;
  s.signer = d.get_u32();
  s.kappa = d.get_u16();
  if (s.kappa < kSigCoreBytes) throw DecodeError("signature kappa below minimum");
  s.digest = d.get_u64();
  s.tag = d.get_u64();
  for (std::uint16_t i = kSigCoreBytes; i < s.kappa; ++i) {
    if (d.get_u8() != 0) throw DecodeError("non-canonical signature padding");
  }
  return s;
}

inline std::uint64_t keyed_tag(std::uint64_t secret, std::uint64_t digest) {
  Encoder e;
  e.put_u64(secret);
  e.put_u64(digest);
  return fnv1a64(e.bytes());
}

class KeyPair {
 public:
  KeyPair() = default;
  KeyPair(PlayerId id, std::uint64_t secret, std::uint16_t kappa)
      : id_(id), secret_(secret), kappa_(kappa) {}

  PlayerId id() const { return id_; }
  std::uint16_t kappa() const { return kappa_; }

  Signature sign(std::span<const std::uint8_t> msg) const {
    Signature s;
    s.signer = id_;
    s.kappa = kappa_;
    s.digest = fnv1a64(msg);
    s.tag = keyed_tag(secret_, s.digest);
    return s;
  }
  Signature sign(const ByteBuf& msg) const {
    return sign(std::span<const std::uint8_t>(msg.data(), msg.size()));
  }

 private:
  PlayerId id_ = 0;
  std::uint64_t secret_ = 0;
  std::uint16_t kappa_ = kDefaultKappa;

  friend class KeyRegistry;
};

// Trusted-setup key registry for one simulated system of n players. The
// registry can verify any player's signature; replicas hold their own KeyPair
// and a const reference to the registry for verification.
class KeyRegistry {
 public:
  static KeyRegistry setup(std::uint32_t n, std::uint16_t kappa, std::uint64_t seed) {
    if (kappa < kSigCoreBytes) throw std::invalid_argument("kappa below minimum signature size");
    KeyRegistry reg;
    reg.kappa_ = kappa;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    reg.keys_.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      std::uint64_t secret = 0;
      while (secret == 0) secret = rng();
      reg.keys_.emplace_back(static_cast<PlayerId>(i), secret, kappa);
    }
    return reg;
  }

  std::uint32_t n() const { return static_cast<std::uint32_t>(keys_.size()); }
  std::uint16_t kappa() const { return kappa_; }
  const KeyPair& key(PlayerId p) const { return keys_.at(p); }

  bool verify(const Signature& s, std::span<const std::uint8_t> msg) const {
    if (s.digest != fnv1a64(msg)) return false;
    return authentic(s);
  }

  // True when the tag really was produced with the claimed signer's secret.
  // Unlike verify() this does not need the signed bytes, so it can vet
  // signatures embedded in arbitrary positions of adversarial messages: an
  // authentic signature may be presented out of context, but a signature that
  // fails this check is an outright forgery, which the idealized scheme rules
  // out.
  bool authentic(const Signature& s) const {
    if (s.signer >= keys_.size()) return false;
    if (s.kappa != kappa_) return false;
    return s.tag == keyed_tag(keys_[s.signer].secret_, s.digest);
  }
  bool verify(const Signature& s, const ByteBuf& msg) const {
    return verify(s, std::span<const std::uint8_t>(msg.data(), msg.size()));
  }

 private:
  std::vector<KeyPair> keys_;
  std::uint16_t kappa_ = kDefaultKappa;
};

// ---------------------------------------------------------------------------
// What phase signatures cover
// ---------------------------------------------------------------------------
//
// A phase signature covers the canonical core of its message: the message
// kind, the round, the digest being endorsed, and the tag of the proposer
// signature it carries (0 where none applies). Certificate sets are *not*
// covered — a certificate is an unordered bag of other players' signatures,
// each independently verifiable by reconstructing that player's own core from
// fields of the enclosing message. Messages with bulk content of their own
// (fraud proofs, view-change certificates) bind it through the `extra` slot,
// which carries a hash of that content.

inline ByteBuf sign_core_bytes(MsgType type, Round round, const Digest& digest,
                               std::uint64_t proposer_tag, std::uint64_t extra = 0) {
  Encoder e;
  e.put_u8(static_cast<std::uint8_t>(type));
  e.put_u64(round);
  put_digest(e, digest);
  e.put_u64(proposer_tag);
  e.put_u64(extra);
  return e.take();
}

inline Signature sign_phase(const KeyPair& key, MsgType type, Round round,
                            const Digest& digest, std::uint64_t proposer_tag,
                            std::uint64_t extra = 0) {
  return key.sign(sign_core_bytes(type, round, digest, proposer_tag, extra));
}

inline bool verify_phase_sig(const KeyRegistry& reg, PlayerId signer, MsgType type,
                             Round round, const Digest& digest, std::uint64_t proposer_tag,
                             const Signature& sig, std::uint64_t extra = 0) {
  if (sig.signer != signer) return false;
  return reg.verify(sig, sign_core_bytes(type, round, digest, proposer_tag, extra));
}

} // namespace prft
