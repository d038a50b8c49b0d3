// Parameters shared by sharing nodes and voters, epoch geometry, and the
// actor interface the simulator drives.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pod/contribution.hpp"
#include "pod/messages.hpp"
#include "pod/trainer.hpp"
#include "pod/types.hpp"

namespace pod {

/// Static threshold, or one that steps down after a slow epoch.
struct ThresholdSchedule {
  double start = 2.0 / 3.0;
  bool dynamic = false;
  double step = 0.1;
  double floor = 0.5;
  Tick latency_bound = 0;  // an epoch slower than this lowers the next threshold
};

/// Threshold for the epoch after one that took `latency` ticks at threshold `tau`.
double next_threshold(const ThresholdSchedule& s, double tau, Tick latency);

/// ceil(tau * active), at least 1.
std::size_t threshold_count(double tau, std::size_t active);

enum class SettlementMerge { count_weighted, contribution_weighted };
enum class QueueOrder { priority, fifo };

struct TimingParams {
  Tick train_base = 5;
  double ticks_per_row = 0.05;
  Tick coalesce = 2;
  Tick resubmit = 60;
  Tick settlement_window = 26;
  Tick view_timeout = 80;  // doubled per view change
  std::size_t voter_capacity = 8;  // requests validated per tick
  std::size_t queue_cap = 256;
};

struct ProtocolParams {
  std::uint32_t n = 4;
  std::uint32_t m = 4;
  std::uint32_t f_v = 1;
  ThresholdSchedule tau;
  std::uint64_t epoch_length = 2;
  std::uint64_t epochs = 3;
  TrainerConfig trainer;
  FitOptions fit;
  ContributionParams contribution;
  std::uint64_t contribution_seed = 0;
  Rational pool = 100;
  Rational deposit = 1;
  SettlementMerge settlement_merge = SettlementMerge::contribution_weighted;
  QueueOrder queue_order = QueueOrder::priority;
  TimingParams timing;
  std::size_t dimension = 4;

  std::size_t quorum() const { return 2 * f_v + 1; }
  std::vector<NodeId> sharing_ids() const;
  std::vector<NodeId> committee() const;  // ids n .. n+m-1
  bool is_voter(NodeId id) const { return id.value >= n && id.value < n + m; }

  std::uint64_t first_height(std::uint64_t epoch) const { return (epoch - 1) * epoch_length + 1; }
  std::uint64_t last_height(std::uint64_t epoch) const { return epoch * epoch_length; }
  std::uint64_t epoch_of(std::uint64_t height) const {
    return height == 0 ? 0 : (height - 1) / epoch_length + 1;
  }
};

/// Who may take part in an epoch and at what threshold. Derived purely from
/// the locked chain so every honest party computes the same value.
struct EpochRules {
  std::uint64_t epoch = 1;
  std::vector<NodeId> active;  // sorted
  double tau = 2.0 / 3.0;
  Tick previous_proposed_at = 0;

  bool is_active(NodeId id) const;
  std::size_t threshold() const { return threshold_count(tau, active.size()); }
};

EpochRules genesis_rules(const ProtocolParams& p);
/// Rules for epoch e+1 given the locked epoch e and its rules: nodes that
/// forfeited in e sit out e+1.
EpochRules advance_rules(const ProtocolParams& p, const EpochRules& current, const Epoch& locked);

/// Sharing-node transition record for the event trace.
struct NodeEvent {
  NodeId node;
  std::string kind;
  std::uint64_t height = 0;
  std::size_t merge_list = 0;
  std::string detail;
};

/// Everything an actor may do in response to an event.
class Context {
 public:
  virtual ~Context() = default;

  virtual Tick now() const = 0;
  virtual void send(NodeId to, MessageBody body) = 0;
  /// Block propagation to sharing peers under the configured topology.
  virtual void gossip(MessageBody body) = 0;
  virtual void send_voters(MessageBody body) = 0;
  virtual void send_sharing(MessageBody body) = 0;
  virtual void set_timer(Tick delay, std::uint64_t kind, std::uint64_t token) = 0;
  /// Outcome of the three-party verification of `node` for `epoch`.
  virtual bool verify_member(NodeId node, std::uint64_t epoch) = 0;
  virtual void record(const NodeEvent& e) = 0;
  /// Called whenever an actor considers an epoch final.
  virtual void report_lock(NodeId who, const Epoch& e, const Block& b) = 0;
};

class Actor {
 public:
  virtual ~Actor() = default;
  virtual NodeId id() const = 0;
  virtual void start(Context& ctx) = 0;
  virtual void on_message(const Message& m, Context& ctx) = 0;
  virtual void on_timer(std::uint64_t kind, std::uint64_t token, Context& ctx) = 0;
  /// Epochs this actor holds as locked, by height.
  virtual const std::map<std::uint64_t, Epoch>& locked_epochs() const = 0;
};

}  // namespace pod
