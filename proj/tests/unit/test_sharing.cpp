#include <algorithm>

#include "doctest.h"
#include "protocol_helpers.hpp"

using namespace pod;
using namespace podtest;

namespace {

struct Bench {
  ProtocolParams params;
  Keyring ring;
  std::shared_ptr<VecData> data;
  std::vector<std::unique_ptr<SharingNode>> nodes;

  Bench(std::uint32_t n, std::uint64_t epoch_length, std::uint32_t m = 4, std::uint32_t f_v = 1,
        std::shared_ptr<VecData> d = nullptr)
      : params(small_params(n, m, f_v, epoch_length)),
        ring(n + m),
        data(d ? std::move(d) : uniform_data(n, 20)) {
    for (std::uint32_t i = 0; i < n; ++i) {
      SharingNode::Setup s;
      s.id = NodeId{i};
      s.keys = ring.keys[i];
      s.scheme = &ring.scheme;
      s.directory = &ring.dir;
      s.params = &params;
      s.data = data;
      s.initial = zeros(params.dimension);
      s.seed = 9;
      nodes.push_back(std::make_unique<SharingNode>(std::move(s)));
    }
  }

  SharingNode& node(std::uint32_t i) { return *nodes[i]; }

  /// Trains, builds and stores a block at the node's current height.
  Block step(std::uint32_t i) {
    auto& nd = node(i);
    const Block b = nd.generate_block(nd.produce_update());
    nd.append_local(b);
    return b;
  }
};

std::vector<NodeId> ids(std::initializer_list<std::uint32_t> v) {
  std::vector<NodeId> out;
  for (auto x : v) out.push_back(NodeId{x});
  return out;
}

}  // namespace

TEST_SUITE("sharing") {
  TEST_CASE("produced updates are signed and trained") {
    Bench b(3, 2);
    const Update u = b.node(0).produce_update();
    CHECK(verify_update(u, b.ring.scheme, b.ring.dir));
    CHECK(u.weights == local_train(zeros(2), b.data->dataset(NodeId{0}, 1), b.params.trainer));
    CHECK(u.summary.count == 20);
  }

  TEST_CASE("empty dataset keeps weights and claims zero rows") {
    std::vector<Dataset> sets{gaussian_rows(10, 2, 0, 1), Dataset{}};
    sets[1].owner = NodeId{1};
    Bench b(2, 1, 4, 1, std::make_shared<VecData>(sets));
    const Update u = b.node(1).produce_update();
    CHECK(u.weights == zeros(2));
    CHECK(u.summary.count == 0);
  }

  TEST_CASE("fresh epoch block lists only its producer") {
    Bench b(4, 2);
    const Block blk = b.step(2);
    CHECK(blk.merge_list == ids({2}));
    CHECK(blk.height == 1);
    CHECK(b.node(2).current_height() == 2);
  }

  TEST_CASE("merge examples from the block protocol") {
    Bench b(3, 1);
    const Block a = b.step(0);
    const Block bb = b.step(1);

    // Local {A}, incoming {B} at the same height: merge and broadcast.
    const auto out = b.node(0).on_block(bb);
    CHECK(out.action == MergeAction::merge_and_broadcast);
    REQUIRE(out.new_block);
    CHECK(out.new_block->merge_list == ids({0, 1}));
    CHECK(b.node(0).merge_list_at(1) == ids({0, 1}));

    // Local {A, B}, incoming {A}: nothing to merge.
    CHECK(b.node(0).on_block(a).action == MergeAction::ignore);
    CHECK(b.node(0).on_block(*out.new_block).action == MergeAction::ignore);

    // C hears A's block before producing: its own block carries both.
    CHECK(b.node(2).on_block(a).action == MergeAction::buffer);
    CHECK(b.node(2).pending_senders(1) == ids({0}));
    const Block c = b.step(2);
    CHECK(c.merge_list == ids({0, 2}));
  }

  TEST_CASE("duplicate senders in pending updates are deduplicated") {
    Bench b(3, 1);
    const Block a = b.step(0);
    b.node(2).on_block(a);
    b.node(2).on_block(a);
    CHECK(b.node(2).pending_senders(1) == ids({0}));
    const Block c = b.step(2);
    CHECK(c.merge_list == ids({0, 2}));
    CHECK(c.updates.size() == 2);
  }

  TEST_CASE("history block with an unseen sender rolls back") {
    Bench b(2, 10);
    for (int h = 0; h < 7; ++h) b.step(0);
    CHECK(b.node(0).current_height() == 8);
    for (int h = 0; h < 5; ++h) b.step(1);
    const Block late = b.node(1).chain().at(5);

    const auto out = b.node(0).on_block(late);
    CHECK(out.action == MergeAction::rollback);
    CHECK(out.rollback_height == 5);
    CHECK(b.node(0).current_height() == 6);
    CHECK(b.node(0).merge_list_at(5) == ids({0, 1}));
    CHECK(b.node(0).chain().count(6) == 0);
    // Retraining forward starts from the merged block.
    const Update u = b.node(0).produce_update();
    CHECK(u.height == 6);
    CHECK(u.weights == local_train(merged_weights(b.node(0).chain().at(5)),
                                   b.data->dataset(NodeId{0}, 1), b.params.trainer));
  }

  TEST_CASE("merge list only grows within an epoch") {
    Bench b(4, 1);
    std::vector<Block> blocks;
    for (std::uint32_t i = 0; i < 4; ++i) blocks.push_back(b.step(i));
    std::size_t last = 1;
    for (std::uint32_t i = 1; i < 4; ++i) {
      b.node(0).on_block(blocks[i]);
      const auto now = b.node(0).merge_list_at(1).size();
      CHECK(now >= last);
      last = now;
    }
    CHECK(last == 4);
  }

  TEST_CASE("delivering the same block twice leaves the state unchanged") {
    Bench b(3, 2);
    b.step(0);
    const Block other = b.step(1);
    b.node(0).on_block(other);
    const Digest once = b.node(0).state_digest();
    CHECK(b.node(0).on_block(other).action == MergeAction::ignore);
    CHECK(b.node(0).state_digest() == once);
  }

  TEST_CASE("tampered block is rejected") {
    Bench b(2, 1);
    Block blk = b.step(1);
    blk.updates[0].weights.values[0] += 1.0;
    const auto out = b.node(0).on_block(blk);
    CHECK(out.action == MergeAction::reject);
    CHECK_FALSE(out.reason.empty());
  }

  TEST_CASE("begin_epoch resets to the locked weights") {
    Bench b(2, 2);
    Epoch e;
    e.epoch_height = 1;
    CHECK_THROWS(b.node(0).begin_epoch(e));
    e.locked = true;
    e.final_weights = ModelWeights{{0.5, -0.25}};
    b.step(0);
    b.node(0).begin_epoch(e);
    b.node(1).begin_epoch(e);
    for (std::uint32_t i = 0; i < 2; ++i) {
      CHECK(b.node(i).weights() == *e.final_weights);
      CHECK(b.node(i).base_weights() == *e.final_weights);
      CHECK(b.node(i).epoch() == 2);
      CHECK(b.node(i).current_height() == 3);
      CHECK(b.node(i).pending_senders(3).empty());
      CHECK(b.node(i).chain().empty());
    }
  }

  TEST_CASE("certified lock is adopted, replays ignored, short certificates rejected") {
    Bench b(4, 1, 10, 3);
    std::vector<Block> blocks;
    for (std::uint32_t i = 0; i < 3; ++i) blocks.push_back(b.step(i));
    b.node(0).on_block(blocks[1]);
    b.node(0).on_block(blocks[2]);
    const Block settled = b.node(0).chain().at(1);
    const ModelWeights fin{{0.1, 0.2}};

    // Quorum for m = 10, f_v = 3 is 7: six votes are not enough.
    const auto short_lock = make_lock(b.params, b.ring, 1, settled, fin, {}, 6);
    CHECK_FALSE(b.node(3).on_lock(short_lock));
    CHECK(b.node(3).rejected_locks() == 1);
    CHECK(b.node(3).epoch() == 1);

    // The straggler (node 3) was mid-epoch; the lock moves it on.
    const auto lock = make_lock(b.params, b.ring, 1, settled, fin, {}, 7);
    CHECK(b.node(3).on_lock(lock));
    CHECK(b.node(3).epoch() == 2);
    CHECK(b.node(3).weights() == fin);
    CHECK(b.node(3).locked_epochs().count(1) == 1);
    CHECK_FALSE(b.node(3).on_lock(lock));
  }

  TEST_CASE("a node that forfeited sits out the next epoch") {
    Bench b(4, 1);
    std::vector<Block> blocks;
    for (std::uint32_t i = 0; i < 4; ++i) blocks.push_back(b.step(i));
    for (std::uint32_t i = 1; i < 4; ++i) b.node(0).on_block(blocks[i]);
    const Block settled = b.node(0).chain().at(1);
    const auto lock = make_lock(b.params, b.ring, 1, settled, zeros(2), ids({2}), 3);
    for (std::uint32_t i = 0; i < 4; ++i) REQUIRE(b.node(i).on_lock(lock));
    CHECK_FALSE(b.node(2).deposited());
    CHECK_THROWS_AS(b.node(2).produce_update(), std::logic_error);
    CHECK(b.node(1).deposited());
    CHECK_FALSE(b.node(1).rules().is_active(NodeId{2}));
  }

  TEST_CASE("a stale node jumps to the newest lock") {
    Bench b(3, 1);
    std::vector<Block> blocks;
    for (std::uint32_t i = 0; i < 3; ++i) blocks.push_back(b.step(i));
    for (std::uint32_t i = 1; i < 3; ++i) b.node(0).on_block(blocks[i]);
    const auto l1 = make_lock(b.params, b.ring, 1, b.node(0).chain().at(1), zeros(2), {}, 3);
    REQUIRE(b.node(0).on_lock(l1));
    REQUIRE(b.node(1).on_lock(l1));
    std::vector<Block> second;
    for (std::uint32_t i = 0; i < 2; ++i) second.push_back(b.step(i));
    b.node(0).on_block(second[1]);
    const ModelWeights w2{{0.3, 0.4}};
    const auto l2 = make_lock(b.params, b.ring, 2, b.node(0).chain().at(2), w2, {}, 3);
    // Node 2 never saw epoch 1 lock.
    CHECK(b.node(2).on_lock(l2));
    CHECK(b.node(2).epoch() == 3);
    CHECK(b.node(2).weights() == w2);
  }

  TEST_CASE("gossip converges to the full node set") {
    for (std::uint32_t n : {4u, 16u, 64u}) {
      CAPTURE(n);
      auto p = small_params(n, 4, 1, 1);
      p.epochs = 1;
      p.tau.start = 1.0;
      auto wc = world_config(p, 11 + n);
      wc.keep_trace = true;
      World w(wc, uniform_data(n, 10), zeros(2));
      const auto r = w.run();
      CHECK(r.exit_code == kExitOk);
      REQUIRE(r.epochs.count(1) == 1);
      CHECK(r.epochs.at(1).block.merge_list.size() == n);
      std::vector<std::size_t> best(n, 0);
      for (const auto& e : w.events()) {
        if (e.event.height == 1) {
          best[e.event.node.value] = std::max(best[e.event.node.value], e.event.merge_list);
        }
      }
      CHECK(std::all_of(best.begin(), best.end(), [n](std::size_t s) { return s == n; }));
    }
  }
}
