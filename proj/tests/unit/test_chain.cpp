#include "doctest.h"
#include "helpers.hpp"
#include "pod/chain.hpp"

using namespace pod;
using namespace podtest;

namespace {

struct Signed {
  MacSignatureScheme scheme;
  KeyDirectory dir;
  std::vector<KeyPair> keys;

  Signed() {
    for (std::uint32_t i = 0; i < 3; ++i) {
      keys.push_back(scheme.keygen(100 + i));
      dir.add(NodeId{i}, keys.back().public_key);
    }
  }

  Update update(std::uint32_t sender, std::uint64_t height, Rng& rng) {
    Update u = random_update(rng, sender, height, 3);
    sign_update(u, scheme, keys[sender].secret_key);
    return u;
  }
};

}  // namespace

TEST_SUITE("chain") {
  TEST_CASE("signed updates verify and reject changes") {
    Signed s;
    Rng rng(1);
    Update u = s.update(1, 4, rng);
    CHECK(verify_update(u, s.scheme, s.dir));
    Update moved = u;
    moved.height = 5;
    CHECK_FALSE(verify_update(moved, s.scheme, s.dir));
    Update relabeled = u;
    relabeled.sender = NodeId{2};
    CHECK_FALSE(verify_update(relabeled, s.scheme, s.dir));
    Update unknown = u;
    unknown.sender = NodeId{9};
    CHECK_FALSE(verify_update(unknown, s.scheme, s.dir));
  }

  TEST_CASE("block validation names the fault") {
    Signed s;
    Rng rng(2);
    const Block good = make_block(3, Digest{}, NodeId{0}, {s.update(0, 3, rng), s.update(1, 3, rng)});
    CHECK(validate_block(good, s.scheme, s.dir) == BlockFault::none);
    CHECK(good.merge_list == std::vector<NodeId>{NodeId{0}, NodeId{1}});

    Block b = good;
    b.digest.bytes[0] ^= 1;
    CHECK(validate_block(b, s.scheme, s.dir) == BlockFault::digest_mismatch);

    b = good;
    b.merge_list.pop_back();
    b.digest = compute_block_digest(b);
    CHECK(validate_block(b, s.scheme, s.dir) == BlockFault::merge_list_mismatch);

    b = good;
    b.height = 4;
    b.digest = compute_block_digest(b);
    CHECK(validate_block(b, s.scheme, s.dir) == BlockFault::height_mismatch);

    b = good;
    b.updates[1].weights.values[0] += 0.5;
    b.digest = compute_block_digest(b);
    CHECK(validate_block(b, s.scheme, s.dir) == BlockFault::bad_signature);

    for (auto f : {BlockFault::none, BlockFault::digest_mismatch, BlockFault::merge_list_mismatch,
                   BlockFault::height_mismatch, BlockFault::bad_signature}) {
      CHECK_FALSE(to_string(f).empty());
    }
  }

  TEST_CASE("duplicate senders keep the first update") {
    Signed s;
    Rng rng(3);
    const Update first = s.update(2, 1, rng);
    const Update second = s.update(2, 1, rng);
    const Block b = make_block(1, Digest{}, NodeId{2}, {first, second});
    REQUIRE(b.updates.size() == 1);
    CHECK(b.updates[0].weights == first.weights);
  }

  TEST_CASE("block merge is count weighted and order free") {
    Signed s;
    Rng rng(4);
    Update a = s.update(0, 1, rng);
    Update c = s.update(1, 1, rng);
    a.weights = ModelWeights{{1.0, 0.0, 2.0}};
    a.summary.count = 30;
    c.weights = ModelWeights{{0.0, 1.0, 2.0}};
    c.summary.count = 10;
    const auto m1 = merged_weights(make_block(1, Digest{}, NodeId{0}, {a, c}));
    const auto m2 = merged_weights(make_block(1, Digest{}, NodeId{1}, {c, a}));
    CHECK(m1 == m2);
    CHECK(m1.values[0] == doctest::Approx(0.75));
    CHECK(m1.values[1] == doctest::Approx(0.25));
    CHECK(m1.values[2] == doctest::Approx(2.0));
  }
}
