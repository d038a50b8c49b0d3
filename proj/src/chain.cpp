#include "pod/chain.hpp"

#include <algorithm>
#include <bit>
#include <tuple>

#include "pod/serialize.hpp"

namespace pod {

void sign_update(Update& u, const SignatureScheme& scheme, const SecretKey& sk) {
  u.signature = scheme.sign(sk, update_signing_payload(u));
}

bool verify_update(const Update& u, const SignatureScheme& scheme,
                   const KeyDirectory& dir) {
  Bytes payload;
  try {
    payload = update_signing_payload(u);
  } catch (const EncodingError&) {
    return false;
  }
  return verify_by(scheme, dir, u.sender, payload, u.signature);
}

Digest compute_block_digest(const Block& b) {
  return content_hash(block_content_bytes(b));
}

Block make_block(std::uint64_t height, const Digest& parent, NodeId proposer,
                 std::vector<Update> updates) {
  std::stable_sort(updates.begin(), updates.end(),
                   [](const Update& a, const Update& b) { return a.sender < b.sender; });
  updates.erase(std::unique(updates.begin(), updates.end(),
                            [](const Update& a, const Update& b) {
                              return a.sender == b.sender;
                            }),
                updates.end());
  Block b;
  b.height = height;
  b.parent_digest = parent;
  b.proposer = proposer;
  b.merge_list.reserve(updates.size());
  for (const auto& u : updates) b.merge_list.push_back(u.sender);
  b.updates = std::move(updates);
  b.digest = compute_block_digest(b);
  return b;
}

std::string to_string(BlockFault f) {
  switch (f) {
    case BlockFault::none: return "none";
    case BlockFault::digest_mismatch: return "digest_mismatch";
    case BlockFault::merge_list_mismatch: return "merge_list_mismatch";
    case BlockFault::height_mismatch: return "height_mismatch";
    case BlockFault::bad_signature: return "bad_signature";
  }
  return "unknown";
}

BlockFault validate_block(const Block& b, const SignatureScheme& scheme,
                          const KeyDirectory& dir) {
  if (b.merge_list.size() != b.updates.size()) return BlockFault::merge_list_mismatch;
  for (std::size_t i = 0; i < b.updates.size(); ++i) {
    if (b.updates[i].sender != b.merge_list[i]) return BlockFault::merge_list_mismatch;
    if (i > 0 && !(b.merge_list[i - 1] < b.merge_list[i])) {
      return BlockFault::merge_list_mismatch;
    }
    if (b.updates[i].height != b.height) return BlockFault::height_mismatch;
  }
  try {
    if (compute_block_digest(b) != b.digest) return BlockFault::digest_mismatch;
  } catch (const EncodingError&) {
    return BlockFault::digest_mismatch;
  }
  for (const auto& u : b.updates) {
    if (!verify_update(u, scheme, dir)) return BlockFault::bad_signature;
  }
  return BlockFault::none;
}

ModelWeights merge_weights(std::span<const WeightedWeights> inputs) {
  if (inputs.empty()) throw std::invalid_argument("merge_weights: empty input");
  const auto dim = inputs.front().weights->size();
  for (const auto& in : inputs) {
    if (in.weights->size() != dim) {
      throw std::invalid_argument("merge_weights: dimension mismatch");
    }
  }
  // Canonical order so the floating-point sum is permutation invariant.
  std::vector<const WeightedWeights*> order;
  order.reserve(inputs.size());
  for (const auto& in : inputs) order.push_back(&in);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    if (a->count != b->count) return a->count < b->count;
    const auto& va = a->weights->values;
    const auto& vb = b->weights->values;
    return std::lexicographical_compare(
        va.begin(), va.end(), vb.begin(), vb.end(), [](double x, double y) {
          return std::bit_cast<std::uint64_t>(x) < std::bit_cast<std::uint64_t>(y);
        });
  });

  std::uint64_t total = 0;
  for (const auto* in : order) total += in->count;
  ModelWeights out;
  out.values.assign(dim, 0.0);
  for (const auto* in : order) {
    const double w = total == 0 ? 1.0 / static_cast<double>(order.size())
                                : static_cast<double>(in->count) / static_cast<double>(total);
    for (std::size_t k = 0; k < dim; ++k) out.values[k] += w * in->weights->values[k];
  }
  return out;
}

ModelWeights merged_weights(const Block& b) {
  std::vector<WeightedWeights> in;
  in.reserve(b.updates.size());
  for (const auto& u : b.updates) in.push_back({&u.weights, u.summary.count});
  return merge_weights(in);
}

bool fork_prefers(const Block& a, const Block& b) {
  if (a.merge_list.size() != b.merge_list.size()) {
    return a.merge_list.size() > b.merge_list.size();
  }
  return a.digest < b.digest;
}

const Block& fork_choice(std::span<const Block> candidates) {
  if (candidates.empty()) throw std::invalid_argument("fork_choice: no candidates");
  const Block* best = &candidates.front();
  for (const auto& c : candidates.subspan(1)) {
    if (fork_prefers(c, *best)) best = &c;
  }
  return *best;
}

}  // namespace pod
