// Fixtures for the protocol state machines: in-memory data, a keyed
// directory covering sharing nodes and voters, and certified locks.
#pragma once

#include <memory>
#include <vector>

#include "pod/chain.hpp"
#include "pod/contribution.hpp"
#include "pod/crypto.hpp"
#include "pod/messages.hpp"
#include "pod/protocol.hpp"
#include "pod/rng.hpp"
#include "pod/sharing.hpp"
#include "pod/simnet.hpp"
#include "pod/voting.hpp"

namespace podtest {

/// Fixed datasets, one per node, with honest summaries.
class VecData final : public pod::DataSource {
 public:
  explicit VecData(std::vector<pod::Dataset> sets) : sets_(std::move(sets)) {
    for (const auto& d : sets_) {
      summaries_.push_back(d.empty() ? pod::DataSummary{} : pod::summarize(d, pod::FitOptions{1}));
    }
  }
  const pod::Dataset& dataset(pod::NodeId node, std::uint64_t) const override {
    return sets_.at(node.value);
  }
  const pod::DataSummary& claimed_summary(pod::NodeId node, std::uint64_t) const override {
    return summaries_.at(node.value);
  }
  std::uint64_t data_version(pod::NodeId, std::uint64_t) const override { return 0; }

 private:
  std::vector<pod::Dataset> sets_;
  std::vector<pod::DataSummary> summaries_;
};

inline pod::Dataset gaussian_rows(std::size_t rows, std::size_t q, std::uint32_t owner,
                                  std::uint64_t seed) {
  pod::Rng rng(seed);
  pod::Dataset d;
  d.owner = pod::NodeId{owner};
  for (std::size_t r = 0; r < rows; ++r) {
    pod::Row row;
    row.id = static_cast<std::uint64_t>(owner) * 1000000 + r;
    double s = 0.0;
    for (std::size_t k = 0; k < q; ++k) {
      row.features.push_back(rng.normal());
      s += row.features.back() * (k % 2 == 0 ? 1.0 : -0.5);
    }
    row.label = s > 0 ? 1.0 : 0.0;
    d.rows.push_back(std::move(row));
  }
  return d;
}

inline std::shared_ptr<VecData> uniform_data(std::uint32_t n, std::size_t rows, std::size_t q = 2) {
  std::vector<pod::Dataset> sets;
  for (std::uint32_t i = 0; i < n; ++i) sets.push_back(gaussian_rows(rows, q, i, 77 + i));
  return std::make_shared<VecData>(std::move(sets));
}

/// Keys for sharing nodes 0..n-1 and voters n..n+m-1.
struct Keyring {
  pod::MacSignatureScheme scheme;
  pod::KeyDirectory dir;
  std::vector<pod::KeyPair> keys;

  explicit Keyring(std::uint32_t total) {
    for (std::uint32_t i = 0; i < total; ++i) {
      keys.push_back(scheme.keygen(5000 + i));
      dir.add(pod::NodeId{i}, keys.back().public_key);
    }
  }
};

inline pod::ProtocolParams small_params(std::uint32_t n, std::uint32_t m, std::uint32_t f_v,
                                        std::uint64_t epoch_length, std::size_t q = 2) {
  pod::ProtocolParams p;
  p.n = n;
  p.m = m;
  p.f_v = f_v;
  p.epoch_length = epoch_length;
  p.epochs = 3;
  p.dimension = q;
  return p;
}

/// A lock for `epoch` whose certificate carries commit votes from the first
/// `votes` committee members.
inline pod::LockMessage make_lock(const pod::ProtocolParams& p, Keyring& ring, std::uint64_t epoch,
                                  const pod::Block& block, pod::ModelWeights final_weights,
                                  const std::vector<pod::NodeId>& forfeited, std::size_t votes) {
  pod::Epoch e;
  e.epoch_height = epoch;
  e.first_height = p.first_height(epoch);
  e.last_height = p.last_height(epoch);
  e.locked = true;
  e.final_weights = std::move(final_weights);
  std::vector<pod::NodeId> members;
  std::vector<double> shares;
  for (auto id : block.merge_list) {
    if (std::find(forfeited.begin(), forfeited.end(), id) != forfeited.end()) continue;
    members.push_back(id);
    shares.push_back(1.0);
  }
  e.settlement = pod::settle_rewards(epoch, members, shares, forfeited, p.sharing_ids(), p.pool,
                                     p.deposit);
  const pod::Digest d = pod::lock_proposal_digest(e, block);
  pod::LockCertificate cert;
  cert.epoch_height = epoch;
  cert.proposal_digest = d;
  const auto committee = p.committee();
  for (std::size_t i = 0; i < votes && i < committee.size(); ++i) {
    const auto id = committee[i];
    cert.votes.push_back(
        {id, ring.scheme.sign(ring.keys[id.value].secret_key, pod::commit_payload(epoch, d))});
  }
  e.certificate = cert;
  return {e, block};
}

inline pod::WorldConfig world_config(const pod::ProtocolParams& p, std::uint64_t seed,
                                     pod::Tick budget = 4000) {
  pod::WorldConfig wc;
  wc.params = p;
  wc.seed = seed;
  wc.tick_budget = budget;
  wc.verification.field.challenges = 4;
  return wc;
}

inline pod::ModelWeights zeros(std::size_t q) {
  pod::ModelWeights w;
  w.values.assign(q, 0.0);
  return w;
}

}  // namespace podtest
