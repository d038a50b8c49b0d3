#include "pod/messages.hpp"

#include <set>

#include "pod/chain.hpp"
#include "pod/serialize.hpp"

namespace pod {

namespace {

constexpr std::uint8_t kTagProposal = 0x50;  // 'P'

std::size_t update_size(const Update& u) {
  std::size_t s = 8 + 4 + 8 * u.weights.size() + 8 + 4 + u.signature.size() + 8;
  for (const auto& f : u.summary.per_feature) s += 12 + 24 * f.components.size();
  return s;
}

std::size_t block_size(const Block& b) {
  std::size_t s = 2 + 8 + 32 + 4 + 4 + 4 * b.merge_list.size() + 4 + 32;
  for (const auto& u : b.updates) s += update_size(u);
  return s;
}

std::size_t proposal_size(const Proposal& p) {
  return 16 + block_size(p.block) + 8 * p.final_weights.size() +
         48 * p.settlement.entries.size() + 32;
}

Digest proposal_digest_of(std::uint64_t epoch, const Digest& block_digest,
                          const ModelWeights& weights, const RewardAllocation& alloc,
                          std::uint64_t proposed_at) {
  ByteWriter w;
  w.u8(kTagProposal);
  w.u8(kFormatVersion);
  w.u64(epoch);
  w.raw(block_digest.bytes);
  write_weights(w, weights);
  write_allocation(w, alloc);
  w.u64(proposed_at);
  return content_hash(w.bytes());
}

Bytes tagged(char tag, std::uint64_t epoch, std::uint64_t view, const Digest& d) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(tag));
  w.u64(epoch);
  w.u64(view);
  w.raw(d.bytes);
  return std::move(w).take();
}

}  // namespace

Digest Proposal::digest() const {
  return proposal_digest_of(epoch_height, block.digest, final_weights, settlement, proposed_at);
}

std::string Message::kind() const {
  static const char* names[] = {"block",     "settlement_request", "pre_prepare",
                                "prepare",   "commit",             "view_change",
                                "new_view",  "lock",               "sync_request",
                                "corrupt_block"};
  return names[body.index()];
}

std::size_t Message::wire_size() const {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Block>) {
          return block_size(m);
        } else if constexpr (std::is_same_v<T, SettlementRequest>) {
          return 48 + 4 * m.merge_list.size() + block_size(m.block);
        } else if constexpr (std::is_same_v<T, PrePrepare>) {
          return 16 + proposal_size(m.proposal) + m.signature.size();
        } else if constexpr (std::is_same_v<T, Prepare> || std::is_same_v<T, CommitVote>) {
          return 16 + 32 + 4 + m.signature.size();
        } else if constexpr (std::is_same_v<T, ViewChange>) {
          std::size_t s = 20 + m.signature.size();
          if (m.prepared) s += 8 + proposal_size(m.prepared->proposal) + 72 * m.prepared->prepares.size();
          return s;
        } else if constexpr (std::is_same_v<T, NewView>) {
          std::size_t s = 16 + m.signature.size() + 64 * m.view_changes.size();
          if (m.proposal) s += proposal_size(*m.proposal);
          return s;
        } else if constexpr (std::is_same_v<T, LockMessage>) {
          return canonical_serialize(m.epoch).size() + block_size(m.block);
        } else if constexpr (std::is_same_v<T, SyncRequest>) {
          return 8;
        } else {
          return m.bytes.size();
        }
      },
      body);
}

std::string size_class(std::size_t bytes) {
  if (bytes < 256) return "small";
  if (bytes < 16384) return "medium";
  return "large";
}

Bytes preprepare_payload(std::uint64_t epoch, std::uint64_t view, const Digest& proposal) {
  return tagged('R', epoch, view, proposal);
}

Bytes prepare_payload(std::uint64_t epoch, std::uint64_t view, const Digest& proposal) {
  return tagged('p', epoch, view, proposal);
}

Bytes commit_payload(std::uint64_t epoch, const Digest& proposal) {
  return tagged('c', epoch, 0, proposal);
}

Bytes view_change_payload(const ViewChange& vc) {
  ByteWriter w;
  w.u8('v');
  w.u64(vc.epoch_height);
  w.u64(vc.new_view);
  w.u32(vc.voter.value);
  w.u8(vc.prepared ? 1 : 0);
  if (vc.prepared) {
    w.u64(vc.prepared->view);
    w.raw(vc.prepared->proposal.digest().bytes);
  }
  return std::move(w).take();
}

Bytes new_view_payload(std::uint64_t epoch, std::uint64_t view,
                       const std::optional<Digest>& proposal) {
  return tagged('n', epoch, view, proposal.value_or(Digest{}));
}

Digest lock_proposal_digest(const Epoch& e, const Block& b) {
  if (!e.final_weights || !e.settlement) return Digest{};
  return proposal_digest_of(e.epoch_height, b.digest, *e.final_weights, *e.settlement,
                            e.proposed_at);
}

namespace {

bool member(const std::vector<NodeId>& committee, NodeId id) {
  for (auto c : committee) {
    if (c == id) return true;
  }
  return false;
}

}  // namespace

bool verify_lock(const LockMessage& lock, const std::vector<NodeId>& committee,
                 std::size_t quorum, const SignatureScheme& scheme, const KeyDirectory& dir) {
  const auto& e = lock.epoch;
  if (!e.locked || !e.certificate || !e.final_weights || !e.settlement) return false;
  const auto& cert = *e.certificate;
  if (cert.epoch_height != e.epoch_height) return false;
  if (lock.block.height != e.last_height) return false;
  Digest expected;
  try {
    if (compute_block_digest(lock.block) != lock.block.digest) return false;
    expected = lock_proposal_digest(e, lock.block);
  } catch (const EncodingError&) {
    return false;
  }
  if (expected != cert.proposal_digest) return false;
  const auto payload = commit_payload(e.epoch_height, cert.proposal_digest);
  std::set<NodeId> signers;
  for (const auto& v : cert.votes) {
    if (!member(committee, v.voter) || signers.count(v.voter)) continue;
    if (verify_by(scheme, dir, v.voter, payload, v.signature)) signers.insert(v.voter);
  }
  return signers.size() >= quorum;
}

bool verify_prepared(const PreparedCertificate& pc, std::uint64_t epoch,
                     const std::vector<NodeId>& committee, std::size_t quorum,
                     const SignatureScheme& scheme, const KeyDirectory& dir) {
  if (pc.proposal.epoch_height != epoch) return false;
  Digest d;
  try {
    d = pc.proposal.digest();
  } catch (const EncodingError&) {
    return false;
  }
  const auto payload = prepare_payload(epoch, pc.view, d);
  std::set<NodeId> signers;
  for (const auto& p : pc.prepares) {
    if (p.epoch_height != epoch || p.view != pc.view || p.proposal_digest != d) continue;
    if (!member(committee, p.voter) || signers.count(p.voter)) continue;
    if (verify_by(scheme, dir, p.voter, payload, p.signature)) signers.insert(p.voter);
  }
  return signers.size() >= quorum;
}

}  // namespace pod
