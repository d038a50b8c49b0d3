// Chain data model shared by every layer of the protocol.
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace pod {

using Rational = boost::multiprecision::cpp_rational;
using Tick = std::uint64_t;
using Bytes = std::vector<std::uint8_t>;

struct NodeId {
  std::uint32_t value = 0;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

std::string to_string(NodeId id);

struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  friend auto operator<=>(const Digest&, const Digest&) = default;

  std::string hex() const;
  static Digest from_hex(const std::string& hex);
};

/// Model parameters of one node. Dimension is fixed per scenario.
struct ModelWeights {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool all_finite() const;

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

struct GaussianComponent {
  double weight = 1.0;
  double mean = 0.0;
  double variance = 1.0;

  friend bool operator==(const GaussianComponent&,
                         const GaussianComponent&) = default;
};

/// One-dimensional Gaussian mixture fitted to a single feature column.
struct GaussianFit {
  std::vector<GaussianComponent> components;
  std::uint64_t count = 0;

  /// Weights sum to 1 (within 1e-9) and every variance is positive.
  bool valid() const;
  double mean() const;
  double variance() const;

  friend bool operator==(const GaussianFit&, const GaussianFit&) = default;
};

struct DataSummary {
  std::vector<GaussianFit> per_feature;
  std::uint64_t count = 0;

  std::size_t feature_count() const { return per_feature.size(); }

  friend bool operator==(const DataSummary&, const DataSummary&) = default;
};

/// Signed training result of one sharing node at one block height.
struct Update {
  ModelWeights weights;
  NodeId sender;
  DataSummary summary;
  Bytes signature;
  std::uint64_t height = 0;

  friend bool operator==(const Update&, const Update&) = default;
};

struct Block {
  std::uint64_t height = 0;
  Digest parent_digest;
  std::vector<NodeId> merge_list;  // sorted, unique
  std::vector<Update> updates;     // sorted by sender
  NodeId proposer;
  Digest digest;

  friend bool operator==(const Block&, const Block&) = default;
};

struct Vote {
  NodeId voter;
  Bytes signature;

  friend bool operator==(const Vote&, const Vote&) = default;
};

struct LockCertificate {
  std::uint64_t epoch_height = 0;
  Digest proposal_digest;
  std::vector<Vote> votes;  // sorted by voter

  friend bool operator==(const LockCertificate&,
                         const LockCertificate&) = default;
};

struct RewardEntry {
  NodeId node;
  double share = 0.0;         // contribution share r_i (0 for non-members)
  Rational share_exact = 0;   // normalised exact share used for payouts
  Rational reward = 0;
  bool forfeited = false;

  friend bool operator==(const RewardEntry&, const RewardEntry&) = default;
};

struct RewardAllocation {
  std::uint64_t epoch_height = 0;
  Rational pool = 0;
  Rational forfeited_total = 0;
  std::vector<RewardEntry> entries;  // sorted by node

  Rational total_paid() const;

  friend bool operator==(const RewardAllocation&,
                         const RewardAllocation&) = default;
};

struct Epoch {
  std::uint64_t epoch_height = 0;
  std::uint64_t first_height = 0;
  std::uint64_t last_height = 0;
  std::uint64_t proposed_at = 0;  // tick at which the settled proposal was made
  bool locked = false;
  std::optional<LockCertificate> certificate;
  std::optional<ModelWeights> final_weights;
  std::optional<RewardAllocation> settlement;

  friend bool operator==(const Epoch&, const Epoch&) = default;
};

}  // namespace pod

template <>
struct std::hash<pod::NodeId> {
  std::size_t operator()(const pod::NodeId& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
