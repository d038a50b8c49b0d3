// Content hashing and the signature abstraction.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string_view>

#include "pod/types.hpp"

namespace pod {

/// SHA-256 of the input.
Digest content_hash(std::span<const std::uint8_t> bytes);
Digest content_hash(std::string_view text);

/// Incremental SHA-256, used for trace hashes.
class HashStream {
 public:
  HashStream();
  ~HashStream();
  HashStream(const HashStream&) = delete;
  HashStream& operator=(const HashStream&) = delete;

  void update(std::span<const std::uint8_t> bytes);
  void update(std::string_view text);
  Digest finish();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

struct PublicKey {
  std::array<std::uint8_t, 32> bytes{};

  friend auto operator<=>(const PublicKey&, const PublicKey&) = default;
};

struct SecretKey {
  Bytes bytes;
};

struct KeyPair {
  PublicKey public_key;
  SecretKey secret_key;
};

/// keygen / sign / verify. verify never throws: malformed input is false.
class SignatureScheme {
 public:
  virtual ~SignatureScheme() = default;

  virtual KeyPair keygen(std::uint64_t seed) = 0;
  virtual Bytes sign(const SecretKey& sk,
                     std::span<const std::uint8_t> message) const = 0;
  virtual bool verify(const PublicKey& pk,
                      std::span<const std::uint8_t> message,
                      std::span<const std::uint8_t> signature) const = 0;
};

/// HMAC-SHA256 stand-in. Each keygen registers the node secret with a
/// simulated PKI under public key = SHA-256(secret); verification looks the
/// secret up. Unforgeable for anyone without access to the registry.
class MacSignatureScheme final : public SignatureScheme {
 public:
  KeyPair keygen(std::uint64_t seed) override;
  Bytes sign(const SecretKey& sk,
             std::span<const std::uint8_t> message) const override;
  bool verify(const PublicKey& pk, std::span<const std::uint8_t> message,
              std::span<const std::uint8_t> signature) const override;

 private:
  std::map<PublicKey, Bytes> registry_;
};

/// Ed25519 from libsodium with seeded keygen.
class Ed25519SignatureScheme final : public SignatureScheme {
 public:
  KeyPair keygen(std::uint64_t seed) override;
  Bytes sign(const SecretKey& sk,
             std::span<const std::uint8_t> message) const override;
  bool verify(const PublicKey& pk, std::span<const std::uint8_t> message,
              std::span<const std::uint8_t> signature) const override;
};

/// Maps node identities to their public keys.
class KeyDirectory {
 public:
  void add(NodeId id, const PublicKey& pk) { keys_[id] = pk; }
  const PublicKey* find(NodeId id) const;

 private:
  std::map<NodeId, PublicKey> keys_;
};

/// Convenience: verify `signature` by `signer` through the directory.
bool verify_by(const SignatureScheme& scheme, const KeyDirectory& dir,
               NodeId signer, std::span<const std::uint8_t> message,
               std::span<const std::uint8_t> signature);

}  // namespace pod
