// Sharing-layer node: trains on private data, merges peers' updates into
// blocks, rolls back when it learns of missed updates, and asks the committee
// to settle once its last-height block reaches the threshold.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pod/crypto.hpp"
#include "pod/protocol.hpp"
#include "pod/rng.hpp"
#include "pod/verification.hpp"

namespace pod {

enum class AdversaryKind {
  none,
  rush_epoch,
  delay_liveness,
  dos_flood,
  eclipse_collude,
  data_falsify,
  data_redundancy,
  tamper_block,
};

std::string to_string(AdversaryKind k);
AdversaryKind parse_adversary_kind(const std::string& text);

struct AdversaryBehavior {
  AdversaryKind kind = AdversaryKind::none;
  std::uint32_t flood_rate = 50;  // dos_flood requests per tick per voter
  double delay_factor = 10.0;     // delay_liveness: withhold for factor x training time
  std::vector<NodeId> colluders;  // eclipse_collude
  double forged_shift = 5.0;      // data_falsify: claimed mean shift in sigmas
  double duplication = 2.0;       // data_redundancy

  bool honest() const { return kind == AdversaryKind::none; }
};

/// What a node trains on and what it claims about its data, per epoch.
class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual const Dataset& dataset(NodeId node, std::uint64_t epoch) const = 0;
  virtual const DataSummary& claimed_summary(NodeId node, std::uint64_t epoch) const = 0;
  /// Claim checked by data verification; honest by default.
  virtual HolderClaim holder_claim(NodeId node, std::uint64_t epoch) const {
    return honest_claim(dataset(node, epoch), claimed_summary(node, epoch));
  }
  /// Data that did not change between epochs shares a version, so its
  /// verification outcome can be reused.
  virtual std::uint64_t data_version(NodeId, std::uint64_t epoch) const { return epoch; }
};

enum class MergeAction { ignore, buffer, merge_and_broadcast, rollback, reject };

std::string to_string(MergeAction a);

struct MergeOutcome {
  MergeAction action = MergeAction::ignore;
  std::uint64_t rollback_height = 0;  // set for rollback
  std::optional<Block> new_block;     // merged local block, when one was made
  std::string reason;                 // set for reject
};

class SharingNode final : public Actor {
 public:
  struct Setup {
    NodeId id;
    KeyPair keys;
    const SignatureScheme* scheme = nullptr;
    const KeyDirectory* directory = nullptr;
    const ProtocolParams* params = nullptr;
    std::shared_ptr<const DataSource> data;
    AdversaryBehavior behavior;
    ModelWeights initial;
    std::uint64_t seed = 0;
  };

  explicit SharingNode(Setup setup);

  NodeId id() const override { return s_.id; }
  void start(Context& ctx) override;
  void on_message(const Message& m, Context& ctx) override;
  void on_timer(std::uint64_t kind, std::uint64_t token, Context& ctx) override;
  const std::map<std::uint64_t, Epoch>& locked_epochs() const override { return locked_; }

  // State transitions, usable without a network.

  /// Starts the epoch after `locked`: weights reset to its final weights,
  /// height to the new epoch's first height, pending updates cleared.
  void begin_epoch(const Epoch& locked);
  /// Trains at the current height and signs the result.
  Update produce_update();
  /// Block at the current height carrying pending updates plus `own`.
  Block generate_block(const Update& own);
  /// Stores `b` as the local block at the current height and moves on.
  void append_local(const Block& b);
  /// Applies an incoming block to the local chain.
  MergeOutcome on_block(const Block& incoming);
  /// Adopts a certified lock. False when rejected or a replay.
  bool on_lock(const LockMessage& lock);

  // Inspection.
  std::uint64_t epoch() const { return epoch_; }
  std::uint64_t current_height() const { return height_; }
  const ModelWeights& base_weights() const { return base_; }
  const ModelWeights& weights() const { return weights_; }
  bool deposited() const { return deposited_; }
  bool finished() const { return finished_; }
  const EpochRules& rules() const { return rules_; }
  const std::map<std::uint64_t, Block>& chain() const { return chain_; }
  std::vector<NodeId> merge_list_at(std::uint64_t height) const;
  std::vector<NodeId> pending_senders(std::uint64_t height) const;
  /// Digest over the full protocol state, for idempotence checks.
  Digest state_digest() const;
  std::size_t rejected_blocks() const { return rejected_; }
  std::size_t rejected_locks() const { return rejected_locks_; }

 private:
  enum TimerKind : std::uint64_t {
    kTrainDone = 1,
    kFlush,
    kResubmit,
    kFlood,
    kDelayedBroadcast,
  };

  const ProtocolParams& p() const { return *s_.params; }
  bool accepts_sender(NodeId sender) const;
  Tick training_duration() const;
  ModelWeights weights_for(std::uint64_t height) const;
  void start_training(Context& ctx, std::uint64_t height);
  void finish_training(Context& ctx);
  void mark_dirty(Context& ctx, std::uint64_t height);
  void broadcast(Context& ctx, const Block& b);
  void maybe_submit(Context& ctx, bool force);
  void send_request(Context& ctx, const Block& b);
  void request_sync(Context& ctx);
  void handle_lock(const LockMessage& lock, Context& ctx);
  void enter_epoch(Context& ctx);
  void handle_block(const Block& b, Context& ctx);
  Block self_only_block();
  void record(Context& ctx, const std::string& kind, std::uint64_t height,
              std::size_t list, const std::string& detail = {});

  Setup s_;
  Rng rng_;
  EpochRules rules_;
  std::uint64_t epoch_ = 1;
  std::uint64_t height_ = 1;
  ModelWeights base_;
  ModelWeights weights_;
  Digest anchor_;  // digest of the last locked block
  bool deposited_ = false;
  bool finished_ = false;
  bool training_ = false;
  std::uint64_t token_ = 0;
  std::map<std::uint64_t, Block> chain_;
  std::map<std::uint64_t, std::map<NodeId, Update>> pending_;
  std::map<std::uint64_t, std::vector<Block>> future_;  // later epochs
  std::set<std::uint64_t> dirty_;
  bool flush_scheduled_ = false;
  std::size_t submitted_size_ = 0;
  Tick last_sync_ = 0;
  bool synced_once_ = false;
  std::map<std::uint64_t, Epoch> locked_;
  std::uint64_t locked_epoch_ = 0;
  std::size_t rejected_ = 0;
  std::size_t rejected_locks_ = 0;
  std::uint32_t sync_cursor_ = 0;
};

}  // namespace pod
