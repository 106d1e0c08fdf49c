#pragma once

#include <sodium.h>

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "trade/bytes.hpp"

namespace trade {

inline void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("sodium_init failed");
}

// 256-bit content digest. Used for transaction ids, block links, payload
// authenticity checks and address derivation.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const Digest&) const = default;

  std::string hex() const { return hex_encode(bytes.data(), bytes.size()); }

  // Pseudonym addresses and short references use a 20-byte prefix.
  std::string prefix_hex(std::size_t n = 20) const { return hex_encode(bytes.data(), n); }

  bool is_zero() const {
    for (auto b : bytes)
      if (b != 0) return false;
    return true;
  }

  Bytes to_bytes() const { return Bytes(bytes.begin(), bytes.end()); }

  static Digest from_bytes(const Bytes& b) {
    if (b.size() != 32) throw std::runtime_error("digest: expected 32 bytes");
    Digest d;
    std::copy(b.begin(), b.end(), d.bytes.begin());
    return d;
  }
};

inline Digest sha256(const std::uint8_t* data, std::size_t n) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), data, n);
  return d;
}

inline Digest sha256(const Bytes& data) { return sha256(data.data(), data.size()); }
inline Digest sha256(std::string_view text) {
  return sha256(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
}

// Signature scheme used across both ledgers. The protocol only requires a
// scheme where (a) a signature binds message and key and (b) verification
// against a different key fails; Ed25519 with seed-derived keys keeps the
// whole simulation deterministic. Key management beyond in-memory pairs is
// out of scope.
struct Signature {
  std::array<std::uint8_t, 64> bytes{};

  auto operator<=>(const Signature&) const = default;

  Bytes to_bytes() const { return Bytes(bytes.begin(), bytes.end()); }

  static Signature from_bytes(const Bytes& b) {
    if (b.size() != 64) throw std::runtime_error("signature: expected 64 bytes");
    Signature s;
    std::copy(b.begin(), b.end(), s.bytes.begin());
    return s;
  }
};

struct PublicKey {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const PublicKey&) const = default;

  std::string hex() const { return hex_encode(bytes.data(), bytes.size()); }

  Bytes to_bytes() const { return Bytes(bytes.begin(), bytes.end()); }

  static PublicKey from_bytes(const Bytes& b) {
    if (b.size() != 32) throw std::runtime_error("public key: expected 32 bytes");
    PublicKey k;
    std::copy(b.begin(), b.end(), k.bytes.begin());
    return k;
  }
};

struct KeyPair {
  PublicKey public_key;
  std::array<std::uint8_t, 64> secret_key{};

  static KeyPair from_seed(const Digest& seed) {
    ensure_sodium();
    KeyPair kp;
    crypto_sign_seed_keypair(kp.public_key.bytes.data(), kp.secret_key.data(), seed.bytes.data());
    return kp;
  }

  Signature sign(const Bytes& message) const {
    ensure_sodium();
    Signature sig;
    crypto_sign_detached(sig.bytes.data(), nullptr, message.data(), message.size(),
                         secret_key.data());
    return sig;
  }
};

inline bool verify_signature(const PublicKey& key, const Bytes& message, const Signature& sig) {
  ensure_sodium();
  return crypto_sign_verify_detached(sig.bytes.data(), message.data(), message.size(),
                                     key.bytes.data()) == 0;
}

// On-chain address of a pseudo-identity: 20-byte digest prefix of the
// verification key, hex encoded.
inline std::string address_of(const PublicKey& key) {
  return sha256(key.bytes.data(), key.bytes.size()).prefix_hex(20);
}

}  // namespace trade
