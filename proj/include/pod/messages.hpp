// Protocol messages exchanged through the simulated network.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pod/crypto.hpp"
#include "pod/types.hpp"

namespace pod {

/// Request from a sharing node asking the committee to settle an epoch with
/// the carried block. `block` is the last-height block of the epoch.
struct SettlementRequest {
  NodeId proposer;
  Digest block_digest;
  std::vector<NodeId> merge_list;
  std::uint64_t epoch_height = 0;
  Block block;
};

/// What the committee agrees on for one epoch.
struct Proposal {
  std::uint64_t epoch_height = 0;
  Block block;
  ModelWeights final_weights;
  RewardAllocation settlement;
  std::uint64_t proposed_at = 0;  // tick, used by the dynamic threshold

  Digest digest() const;
};

struct PrePrepare {
  std::uint64_t epoch_height = 0;
  std::uint64_t view = 0;
  Proposal proposal;
  Bytes signature;  // primary
};

struct Prepare {
  std::uint64_t epoch_height = 0;
  std::uint64_t view = 0;
  Digest proposal_digest;
  NodeId voter;
  Bytes signature;
};

struct CommitVote {
  std::uint64_t epoch_height = 0;
  std::uint64_t view = 0;
  Digest proposal_digest;
  NodeId voter;
  Bytes signature;  // over (epoch, proposal digest): view independent
};

/// Proof that a proposal gathered a prepare quorum in some view.
struct PreparedCertificate {
  std::uint64_t view = 0;
  Proposal proposal;
  std::vector<Prepare> prepares;
};

struct ViewChange {
  std::uint64_t epoch_height = 0;
  std::uint64_t new_view = 0;
  NodeId voter;
  std::optional<PreparedCertificate> prepared;
  Bytes signature;
};

struct NewView {
  std::uint64_t epoch_height = 0;
  std::uint64_t view = 0;
  std::vector<ViewChange> view_changes;
  std::optional<Proposal> proposal;
  Bytes signature;  // new primary
};

/// A locked epoch with everything needed to check its certificate.
struct LockMessage {
  Epoch epoch;
  Block block;
};

/// Asks a voter for the latest lock.
struct SyncRequest {
  std::uint64_t known_epoch = 0;
};

/// A block whose bytes were corrupted in flight beyond decoding.
struct CorruptBlock {
  Bytes bytes;
};

using MessageBody = std::variant<Block, SettlementRequest, PrePrepare, Prepare, CommitVote,
                                 ViewChange, NewView, LockMessage, SyncRequest, CorruptBlock>;

struct Message {
  NodeId from;
  MessageBody body;

  std::string kind() const;
  /// Estimated encoded size in bytes.
  std::size_t wire_size() const;
};

using MessagePtr = std::shared_ptr<const Message>;

/// "small" (< 256 B), "medium" (< 16 KiB) or "large".
std::string size_class(std::size_t bytes);

// Signing payloads.
Bytes preprepare_payload(std::uint64_t epoch, std::uint64_t view, const Digest& proposal);
Bytes prepare_payload(std::uint64_t epoch, std::uint64_t view, const Digest& proposal);
Bytes commit_payload(std::uint64_t epoch, const Digest& proposal);
Bytes view_change_payload(const ViewChange& vc);
Bytes new_view_payload(std::uint64_t epoch, std::uint64_t view,
                       const std::optional<Digest>& proposal);

/// Proposal digest of a locked epoch as carried by a lock message.
Digest lock_proposal_digest(const Epoch& e, const Block& b);

/// Certificate check: at least `quorum` distinct committee members with valid
/// commit signatures over (epoch, proposal digest), and the digest matches the
/// carried epoch contents.
bool verify_lock(const LockMessage& lock, const std::vector<NodeId>& committee,
                 std::size_t quorum, const SignatureScheme& scheme, const KeyDirectory& dir);

bool verify_prepared(const PreparedCertificate& pc, std::uint64_t epoch,
                     const std::vector<NodeId>& committee, std::size_t quorum,
                     const SignatureScheme& scheme, const KeyDirectory& dir);

}  // namespace pod
