// Voting layer: settlement request checks, request prioritisation, reward
// settlement, and a single-slot-per-epoch PBFT committee member.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pod/crypto.hpp"
#include "pod/protocol.hpp"

namespace pod {

struct RequestDecision {
  bool accept = false;
  std::string reason;  // empty when accepted
};

/// Threshold rule alone: every member active and |list| >= ceil(tau * |active|).
RequestDecision check_merge_list(const std::vector<NodeId>& merge_list, const EpochRules& rules);

/// Full check of a request against the epoch: structure, block signatures,
/// epoch and height, then the threshold rule.
RequestDecision validate_request(const SettlementRequest& req, const EpochRules& rules,
                                 const ProtocolParams& p, const SignatureScheme& scheme,
                                 const KeyDirectory& dir);

struct QueuedRequest {
  SettlementRequest request;
  std::uint64_t arrival = 0;
};

/// Ascending requester count this epoch, ties by arrival.
std::vector<QueuedRequest> prioritize(std::vector<QueuedRequest> queue,
                                      const std::map<NodeId, std::uint64_t>& counts);

/// Pays (pool + forfeited deposits) in proportion to the members' shares, in
/// exact arithmetic. Every node in `participants` gets an entry; nodes outside
/// `members` receive 0. Throws when `members` is empty.
RewardAllocation settle_rewards(std::uint64_t epoch, const std::vector<NodeId>& members,
                                const std::vector<double>& shares,
                                const std::vector<NodeId>& forfeited,
                                const std::vector<NodeId>& participants, const Rational& pool,
                                const Rational& deposit);

/// Settlement of a last-height block: members that passed verification are
/// paid by contribution share and make up the final weights; the others
/// forfeit their deposit. `verified[i]` refers to block.merge_list[i].
Proposal build_proposal(std::uint64_t epoch, const Block& block, const std::vector<bool>& verified,
                        const ProtocolParams& p, std::uint64_t proposed_at);

/// Weighted mean of update weights, weights renormalised to sum 1.
ModelWeights weighted_merge(const std::vector<const Update*>& updates,
                            const std::vector<double>& weights);

enum class VoterFault { none, silent, equivocate, forge_lock };

std::string to_string(VoterFault f);
VoterFault parse_voter_fault(const std::string& text);

/// Primary of a view: round robin over the committee, shifted by epoch.
NodeId primary_for(const ProtocolParams& p, std::uint64_t epoch, std::uint64_t view);

class Voter final : public Actor {
 public:
  struct Setup {
    NodeId id;
    KeyPair keys;
    const SignatureScheme* scheme = nullptr;
    const KeyDirectory* directory = nullptr;
    const ProtocolParams* params = nullptr;
    VoterFault fault = VoterFault::none;
    std::uint64_t seed = 0;
  };

  struct Stats {
    std::uint64_t received = 0;
    std::uint64_t dropped = 0;    // queue full
    std::uint64_t accepted = 0;
    std::uint64_t declined = 0;
    std::map<std::string, std::uint64_t> decline_reasons;
    std::uint64_t view_changes = 0;
    std::uint64_t rejected_locks = 0;
  };

  explicit Voter(Setup setup);

  NodeId id() const override { return s_.id; }
  void start(Context& ctx) override;
  void on_message(const Message& m, Context& ctx) override;
  void on_timer(std::uint64_t kind, std::uint64_t token, Context& ctx) override;
  const std::map<std::uint64_t, Epoch>& locked_epochs() const override { return locked_; }

  std::uint64_t epoch() const { return epoch_; }
  std::uint64_t view() const { return view_; }
  const EpochRules& rules() const { return rules_; }
  const Stats& stats() const { return stats_; }
  /// Tick at which the first request of each epoch was accepted here.
  const std::map<std::uint64_t, Tick>& first_accept() const { return first_accept_; }
  std::size_t queue_size() const { return queue_.size(); }

 private:
  enum TimerKind : std::uint64_t { kProcess = 1, kWindow, kView };

  const ProtocolParams& p() const { return *s_.params; }
  bool byzantine() const { return s_.fault != VoterFault::none; }
  NodeId primary(std::uint64_t view) const { return primary_for(p(), epoch_, view); }
  Bytes sign(const Bytes& payload) const;

  void on_request(const SettlementRequest& req, Context& ctx);
  void process_queue(Context& ctx);
  void note_accepted(const Block& b, Context& ctx);
  void arm_view_timer(Context& ctx, std::uint64_t view);
  void propose(Context& ctx);
  std::optional<Proposal> validate_proposal(const Proposal& prop, Context& ctx);
  void accept_proposal(const Proposal& prop, std::uint64_t view, Context& ctx);
  void send_prepare(std::uint64_t view, const Digest& d, Context& ctx);
  void send_commit(const Digest& d, Context& ctx);
  void on_preprepare(const PrePrepare& pp, NodeId from, Context& ctx);
  void on_prepare(const Prepare& pr, Context& ctx);
  void on_commit(const CommitVote& cv, Context& ctx);
  void check_prepared(std::uint64_t view, const Digest& d, Context& ctx);
  void check_commit(const Digest& d, Context& ctx);
  void lock(const Proposal& prop, Context& ctx);
  void adopt_lock(const LockMessage& lock, Context& ctx);
  void advance(const Epoch& locked, Context& ctx);
  void start_view_change(std::uint64_t new_view, Context& ctx);
  void on_view_change(const ViewChange& vc, Context& ctx);
  void try_new_view(std::uint64_t new_view, Context& ctx);
  void on_new_view(const NewView& nv, NodeId from, Context& ctx);
  void enter_view(std::uint64_t view, Context& ctx);
  bool valid_view_change(const ViewChange& vc) const;
  void forge_lock(const Block& b, Context& ctx);
  std::uint64_t message_epoch(const Message& m) const;

  Setup s_;
  EpochRules rules_;
  std::uint64_t epoch_ = 1;
  bool finished_ = false;
  Stats stats_;

  // Request intake.
  std::vector<QueuedRequest> queue_;
  std::map<NodeId, std::uint64_t> counts_;
  std::uint64_t arrivals_ = 0;
  bool process_scheduled_ = false;
  std::optional<Block> best_;
  bool window_started_ = false;
  bool window_fired_ = false;
  std::map<std::uint64_t, Tick> first_accept_;
  std::map<std::pair<NodeId, std::uint64_t>, bool> lock_replies_;

  // Agreement.
  std::uint64_t view_ = 0;
  bool in_view_change_ = false;
  std::uint64_t target_view_ = 0;
  std::set<std::uint64_t> armed_views_;
  std::set<std::uint64_t> proposed_views_;
  std::map<std::uint64_t, Digest> preprepared_;
  std::map<Digest, Proposal> proposals_;
  std::map<std::pair<std::uint64_t, Digest>, std::map<NodeId, Prepare>> prepares_;
  std::map<Digest, std::map<NodeId, CommitVote>> commits_;
  std::set<std::pair<std::uint64_t, Digest>> sent_prepare_;
  std::set<Digest> sent_commit_;
  std::optional<PreparedCertificate> prepared_;
  std::map<std::uint64_t, std::map<NodeId, ViewChange>> view_changes_;
  std::set<std::uint64_t> sent_new_view_;
  bool forged_ = false;

  std::map<std::uint64_t, Epoch> locked_;
  std::map<std::uint64_t, LockMessage> lock_messages_;
  std::map<std::uint64_t, std::vector<Message>> future_;
};

}  // namespace pod
