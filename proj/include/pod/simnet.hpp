// Deterministic discrete-event network: seeded delays, partitions, partial
// synchrony on committee links, Byzantine assignments, and global monitors.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "pod/crypto.hpp"
#include "pod/protocol.hpp"
#include "pod/rng.hpp"
#include "pod/sharing.hpp"
#include "pod/verification.hpp"
#include "pod/voting.hpp"

namespace pod {

struct DelayRange {
  Tick min = 1;
  Tick max = 5;
};

/// Messages crossing the boundary of `side` are dropped during [start, end).
struct Partition {
  Tick start = 0;
  Tick end = 0;
  std::vector<NodeId> side;
};

enum class Topology { full, gossip };

struct NetworkProfile {
  DelayRange sharing{1, 5};   // between sharing nodes
  DelayRange committee{1, 3};  // any link touching a voter, after stabilization
  Tick gst = 0;                // global stabilization time
  Tick pre_gst_max = 20;       // committee-link delay bound before stabilization
  std::map<std::pair<NodeId, NodeId>, double> link_multipliers;
  std::vector<Partition> partitions;
  Topology topology = Topology::full;
  std::uint32_t fanout = 4;
};

struct SimEvent {
  Tick tick = 0;
  std::uint64_t seq = 0;
  NodeId to;
  MessagePtr message;  // null for timers
  std::uint64_t timer_kind = 0;
  std::uint64_t timer_token = 0;
};

struct WorldConfig {
  ProtocolParams params;
  NetworkProfile network;
  std::uint64_t seed = 1;
  Tick tick_budget = 5000;
  Tick drain = 0;  // ticks to keep running after the last lock
  std::vector<AdversaryBehavior> sharing_faults;  // empty or one per sharing node
  std::vector<VoterFault> voter_faults;           // empty or one per voter
  VerificationParams verification;
  bool keep_trace = false;
  bool keep_transcripts = false;
  bool ed25519 = false;  // MAC signatures otherwise
};

/// Faults within the tolerated bounds: at most floor(n/3) Byzantine sharing
/// nodes and at most f_v faulty voters with m >= 3 f_v + 1.
bool faults_within_bounds(const WorldConfig& cfg);

struct TraceRecord {
  Tick tick = 0;
  NodeId from;
  NodeId to;
  std::string kind;
  std::string size_class;
};

struct EventRecord {
  Tick tick = 0;
  NodeEvent event;
};

struct EpochOutcome {
  std::uint64_t epoch = 0;
  Tick lock_tick = 0;  // first honest lock
  Epoch locked;
  Block block;
  EpochRules rules;  // rules the epoch was settled under
};

struct Census {
  std::uint64_t sharing = 0;
  std::uint64_t voting = 0;
};

struct VerificationRecord {
  NodeId node;
  std::uint64_t epoch = 0;
  std::uint64_t version = 0;
  bool pass = false;
  std::string failure;
  std::shared_ptr<const VerificationReport> report;  // kept when transcripts are on
};

enum ExitCode : int { kExitOk = 0, kExitSafety = 1, kExitLiveness = 2, kExitFaultsExceeded = 3,
                      kExitAborted = 4 };

struct RunResult {
  int exit_code = kExitOk;
  bool safety_ok = true;
  bool finality_ok = true;
  bool liveness_ok = true;
  bool faults_exceeded = false;
  std::size_t threshold_violations = 0;
  std::vector<std::string> violations;
  std::map<std::uint64_t, EpochOutcome> epochs;
  std::map<std::uint64_t, Census> census;  // by epoch; epochs+1 collects the tail
  Digest trace_hash;
  std::uint64_t messages = 0;
  std::uint64_t dropped = 0;
  std::uint64_t events = 0;
  Tick end_tick = 0;
  std::string error;
};

class World {
 public:
  World(WorldConfig cfg, std::shared_ptr<const DataSource> data, ModelWeights initial);
  ~World();
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  /// Runs to completion: last epoch locked plus drain, empty queue, or budget.
  RunResult run();

  /// Queues a message from `from` to `to` under the network profile. Returns
  /// the scheduled event, or nothing when the link is partitioned.
  std::optional<SimEvent> schedule(NodeId from, NodeId to, MessagePtr m);
  /// Processes one event. False at fixpoint.
  bool step();
  void start();

  Tick now() const { return now_; }
  const WorldConfig& config() const { return cfg_; }
  SharingNode& node(std::uint32_t i);
  Voter& voter(std::uint32_t j);
  bool honest(NodeId id) const;

  const std::vector<TraceRecord>& trace() const { return trace_; }
  const std::vector<EventRecord>& events() const { return events_; }
  const std::vector<VerificationRecord>& verifications() const { return verifications_; }
  const RunResult& result() const { return result_; }
  /// Digest of everything observed so far.
  Digest trace_hash();

 private:
  class ActorContext;
  friend class ActorContext;

  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.tick != b.tick ? a.tick > b.tick : a.seq > b.seq;
    }
  };

  Tick sample_delay(NodeId from, NodeId to);
  bool partitioned(NodeId from, NodeId to) const;
  void send(NodeId from, NodeId to, MessagePtr m);
  void gossip(NodeId from, MessageBody body);
  void timer(NodeId who, Tick delay, std::uint64_t kind, std::uint64_t token);
  bool verify_member(NodeId node, std::uint64_t epoch);
  void report_lock(NodeId who, const Epoch& e, const Block& b);
  void record_event(const NodeEvent& e);
  std::uint64_t census_epoch() const;
  void finish();
  Actor& actor(NodeId id);

  WorldConfig cfg_;
  std::shared_ptr<const DataSource> data_;
  std::unique_ptr<SignatureScheme> scheme_;
  KeyDirectory directory_;
  std::vector<std::unique_ptr<Actor>> actors_;
  std::vector<std::unique_ptr<ActorContext>> contexts_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  Rng net_rng_;
  Tick now_ = 0;
  std::uint64_t seq_ = 0;
  bool started_ = false;
  HashStream hash_;
  std::optional<Digest> final_hash_;
  std::vector<TraceRecord> trace_;
  std::vector<EventRecord> events_;
  std::map<std::pair<NodeId, std::uint64_t>, bool> verify_cache_;
  std::vector<VerificationRecord> verifications_;
  std::map<std::pair<NodeId, std::uint64_t>, Digest> snapshots_;  // (actor, epoch) -> hash
  EpochRules canonical_rules_;
  std::uint64_t first_unlocked_ = 1;
  std::optional<Tick> all_locked_at_;
  RunResult result_;
};

}  // namespace pod
