// Scenario configuration, synthetic data allocation, fairness metrics, and
// run artifacts.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pod/protocol.hpp"
#include "pod/simnet.hpp"

namespace pod {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class AllocationMode { uniform, imbalance, overlap, dynamic };

std::string to_string(AllocationMode m);

struct AllocationSpec {
  AllocationMode mode = AllocationMode::uniform;
  std::size_t rows = 100;  // mean rows per node
  std::size_t features = 4;
  std::size_t test_rows = 2000;
  double label_noise = 0.5;
  std::vector<double> volumes;        // imbalance: relative volumes, one per node
  std::optional<double> uneven_rate;  // imbalance: target rate in rows
  double overlap = 0.0;               // overlap: target redundancy rate
  std::vector<double> growth;         // dynamic: per-epoch growth factor per node
};

/// Synthetic classification data: x ~ N(0, I), label = [w*.x + noise > 0].
struct AllocatedData {
  std::vector<std::vector<Dataset>> per_epoch;  // [epoch-1][node]; one entry unless dynamic
  Dataset test;
  ModelWeights truth;

  const Dataset& at(std::size_t node, std::uint64_t epoch) const;
};

AllocatedData allocate_data(const AllocationSpec& spec, std::uint32_t n, std::uint64_t epochs,
                            std::uint64_t seed);

struct SharingFaultSpec {
  std::uint32_t node = 0;
  AdversaryBehavior behavior;
};

struct VoterFaultSpec {
  std::uint32_t index = 0;  // position in the committee
  VoterFault fault = VoterFault::none;
};

struct ScenarioConfig {
  std::string name = "scenario";
  ProtocolParams protocol;
  double f = 0.0;  // declared sharing-layer fault ratio
  NetworkProfile network;
  VerificationParams verification;
  AllocationSpec data;
  std::vector<SharingFaultSpec> sharing_faults;
  std::vector<VoterFaultSpec> voter_faults;
  std::uint64_t seed = 1;
  Tick tick_budget = 0;  // 0: 1500 ticks per epoch
  Tick drain = 0;
  bool ed25519 = false;
  bool write_trace = true;
  bool write_transcripts = true;

  Tick budget() const;
};

/// Enforces tau <= 1 - f, m >= 3 f_v + 1, epoch_length >= 1 and the other
/// parameter ranges. Throws ConfigError naming the offending key.
void validate(const ScenarioConfig& cfg);

/// YAML text to a validated config. Unknown keys are rejected.
ScenarioConfig parse_config(const std::string& yaml);
ScenarioConfig load_config(const std::filesystem::path& path);
std::string to_yaml(const ScenarioConfig& cfg);

std::vector<std::string> preset_names();
ScenarioConfig preset(const std::string& name);

/// Data each node trains on and claims, with adversarial data behaviors
/// applied. Summaries are fitted lazily and cached per data version.
class ScenarioData final : public DataSource {
 public:
  explicit ScenarioData(const ScenarioConfig& cfg);

  const Dataset& dataset(NodeId node, std::uint64_t epoch) const override;
  const DataSummary& claimed_summary(NodeId node, std::uint64_t epoch) const override;
  HolderClaim holder_claim(NodeId node, std::uint64_t epoch) const override;
  std::uint64_t data_version(NodeId node, std::uint64_t epoch) const override;

  /// Generating distribution of the node's genuine rows, with their count.
  DataSummary true_summary(NodeId node, std::uint64_t epoch) const;
  std::uint64_t genuine_count(NodeId node, std::uint64_t epoch) const;
  const AllocatedData& allocated() const { return data_; }
  const Dataset& test_set() const { return data_.test; }

 private:
  const AdversaryBehavior& behavior(NodeId node) const;

  std::uint32_t n_;
  std::size_t features_;
  bool dynamic_;
  FitOptions fit_;
  std::uint64_t seed_;
  AllocatedData data_;
  std::vector<AdversaryBehavior> behaviors_;
  std::map<std::pair<std::uint32_t, std::uint64_t>, Dataset> duplicated_;
  mutable std::map<std::pair<std::uint32_t, std::uint64_t>, DataSummary> summaries_;
  mutable std::map<std::pair<std::uint32_t, std::uint64_t>, DataSummary> honest_summaries_;
};

struct EpochMetrics {
  std::uint64_t epoch = 0;
  double acc = 0.0;
  std::vector<double> theoretical;  // oracle shares, one per node
  std::vector<double> actual;       // settled shares, 0 for non-members
  double sys_diff = 0.0;
  double max_diff = 0.0;
  Tick lock_latency = 0;
  std::uint64_t msgs_sharing = 0;
  std::uint64_t msgs_voting = 0;
  std::vector<NodeId> members;
  std::vector<NodeId> forfeited;
};

/// Per locked epoch: accuracy of the locked weights on the held-out set and
/// the gap between oracle and settled shares.
std::vector<EpochMetrics> compute_metrics(const RunResult& run, const ScenarioData& data,
                                          const ScenarioConfig& cfg);

inline constexpr const char* kMetricsHeader =
    "epoch,acc,sys_diff,max_diff,lock_latency_ticks,msgs_sharing,msgs_voting";

void emit_csv(const std::vector<EpochMetrics>& metrics, std::ostream& out);
void emit_csv(const std::vector<EpochMetrics>& metrics, const std::filesystem::path& path);

struct ScenarioResult {
  RunResult run;
  std::vector<EpochMetrics> metrics;
  std::vector<VerificationRecord> verifications;
  int exit_code = 0;
};

/// Runs a scenario. With `out`, writes metrics.csv, ledger.jsonl,
/// contribution.jsonl, trace.jsonl, events.jsonl, run.json, datasets/ and
/// transcripts/ there.
ScenarioResult run_scenario(const ScenarioConfig& cfg,
                            const std::optional<std::filesystem::path>& out = std::nullopt);

/// Scans every transcript under dir/transcripts against the matching
/// dataset under dir/datasets. Returns the number of violations.
std::size_t verify_transcripts(const std::filesystem::path& dir, std::ostream& log);

}  // namespace pod
