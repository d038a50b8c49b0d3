// Block construction, validation and fork choice.
#pragma once

#include <span>
#include <stdexcept>
#include <string>

#include "pod/crypto.hpp"
#include "pod/types.hpp"

namespace pod {

/// Signs `u` in place over its canonical signing payload.
void sign_update(Update& u, const SignatureScheme& scheme, const SecretKey& sk);
bool verify_update(const Update& u, const SignatureScheme& scheme,
                   const KeyDirectory& dir);

/// Builds a block from `updates` (deduplicated by sender, later entries win
/// only if the sender is new) and computes its digest.
Block make_block(std::uint64_t height, const Digest& parent, NodeId proposer,
                 std::vector<Update> updates);

Digest compute_block_digest(const Block& b);

enum class BlockFault {
  none,
  digest_mismatch,
  merge_list_mismatch,
  height_mismatch,
  bad_signature,
};

std::string to_string(BlockFault f);

/// Structural and signature validation of a received block.
BlockFault validate_block(const Block& b, const SignatureScheme& scheme,
                          const KeyDirectory& dir);

/// Weighted mean with weights proportional to `count`; unweighted mean when
/// every count is zero. Input order does not affect the result bits.
struct WeightedWeights {
  const ModelWeights* weights;
  std::uint64_t count;
};
ModelWeights merge_weights(std::span<const WeightedWeights> inputs);

/// Count-weighted merge of a block's updates.
ModelWeights merged_weights(const Block& b);

/// Largest merge list wins; ties go to the lexicographically smallest digest.
const Block& fork_choice(std::span<const Block> candidates);
/// Strict "a is preferred over b" relation underlying fork_choice.
bool fork_prefers(const Block& a, const Block& b);

}  // namespace pod
