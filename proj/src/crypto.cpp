#include "pod/crypto.hpp"

#include <sodium.h>

#include <stdexcept>

#include "pod/serialize.hpp"

namespace pod {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

std::array<std::uint8_t, 32> seed_material(std::string_view domain,
                                           std::uint64_t seed) {
  ByteWriter w;
  w.str(domain);
  w.u64(seed);
  return content_hash(w.bytes()).bytes;
}

}  // namespace

Digest content_hash(std::span<const std::uint8_t> bytes) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), bytes.data(), bytes.size());
  return d;
}

Digest content_hash(std::string_view text) {
  return content_hash(std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                text.size()));
}

struct HashStream::State {
  crypto_hash_sha256_state st;
};

HashStream::HashStream() : state_(std::make_unique<State>()) {
  ensure_sodium();
  crypto_hash_sha256_init(&state_->st);
}

HashStream::~HashStream() = default;

void HashStream::update(std::span<const std::uint8_t> bytes) {
  crypto_hash_sha256_update(&state_->st, bytes.data(), bytes.size());
}

void HashStream::update(std::string_view text) {
  update(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Digest HashStream::finish() {
  Digest d;
  crypto_hash_sha256_final(&state_->st, d.bytes.data());
  return d;
}

KeyPair MacSignatureScheme::keygen(std::uint64_t seed) {
  ensure_sodium();
  KeyPair kp;
  const auto secret = seed_material("pod-mac-secret", seed);
  kp.secret_key.bytes.assign(secret.begin(), secret.end());
  kp.public_key.bytes = content_hash(kp.secret_key.bytes).bytes;
  registry_[kp.public_key] = kp.secret_key.bytes;
  return kp;
}

Bytes MacSignatureScheme::sign(const SecretKey& sk,
                               std::span<const std::uint8_t> message) const {
  if (sk.bytes.size() != crypto_auth_hmacsha256_KEYBYTES) {
    throw std::invalid_argument("MAC secret must be 32 bytes");
  }
  Bytes tag(crypto_auth_hmacsha256_BYTES);
  crypto_auth_hmacsha256(tag.data(), message.data(), message.size(),
                         sk.bytes.data());
  return tag;
}

bool MacSignatureScheme::verify(const PublicKey& pk,
                                std::span<const std::uint8_t> message,
                                std::span<const std::uint8_t> signature) const {
  if (signature.size() != crypto_auth_hmacsha256_BYTES) return false;
  auto it = registry_.find(pk);
  if (it == registry_.end()) return false;
  return crypto_auth_hmacsha256_verify(signature.data(), message.data(),
                                       message.size(), it->second.data()) == 0;
}

KeyPair Ed25519SignatureScheme::keygen(std::uint64_t seed) {
  ensure_sodium();
  const auto material = seed_material("pod-ed25519-seed", seed);
  KeyPair kp;
  kp.secret_key.bytes.resize(crypto_sign_SECRETKEYBYTES);
  crypto_sign_seed_keypair(kp.public_key.bytes.data(), kp.secret_key.bytes.data(),
                           material.data());
  return kp;
}

Bytes Ed25519SignatureScheme::sign(const SecretKey& sk,
                                   std::span<const std::uint8_t> message) const {
  if (sk.bytes.size() != crypto_sign_SECRETKEYBYTES) {
    throw std::invalid_argument("Ed25519 secret key has wrong length");
  }
  Bytes sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(),
                       sk.bytes.data());
  return sig;
}

bool Ed25519SignatureScheme::verify(const PublicKey& pk,
                                    std::span<const std::uint8_t> message,
                                    std::span<const std::uint8_t> signature) const {
  if (signature.size() != crypto_sign_BYTES) return false;
  return crypto_sign_verify_detached(signature.data(), message.data(),
                                     message.size(), pk.bytes.data()) == 0;
}

const PublicKey* KeyDirectory::find(NodeId id) const {
  auto it = keys_.find(id);
  return it == keys_.end() ? nullptr : &it->second;
}

bool verify_by(const SignatureScheme& scheme, const KeyDirectory& dir,
               NodeId signer, std::span<const std::uint8_t> message,
               std::span<const std::uint8_t> signature) {
  const auto* pk = dir.find(signer);
  return pk != nullptr && scheme.verify(*pk, message, signature);
}

}  // namespace pod
