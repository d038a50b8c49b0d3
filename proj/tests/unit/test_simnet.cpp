#include <algorithm>

#include "doctest.h"
#include "pod/serialize.hpp"
#include "protocol_helpers.hpp"

using namespace pod;
using namespace podtest;

namespace {

MessagePtr sync_from(std::uint32_t from) {
  return std::make_shared<const Message>(Message{NodeId{from}, SyncRequest{0}});
}

std::shared_ptr<VecData> slow_last(std::uint32_t n, std::size_t rows, std::size_t slow_rows) {
  std::vector<Dataset> sets;
  for (std::uint32_t i = 0; i < n; ++i) {
    sets.push_back(gaussian_rows(i + 1 == n ? slow_rows : rows, 2, i, 31 + i));
  }
  return std::make_shared<VecData>(std::move(sets));
}

}  // namespace

TEST_SUITE("simnet") {
  TEST_CASE("zero delay still takes one tick") {
    auto p = small_params(4, 4, 1, 1);
    auto wc = world_config(p, 1);
    wc.network.sharing = {0, 0};
    wc.network.committee = {0, 0};
    wc.network.pre_gst_max = 0;
    World w(wc, uniform_data(4, 5), zeros(2));
    const auto ev = w.schedule(NodeId{0}, NodeId{1}, sync_from(0));
    REQUIRE(ev);
    CHECK(ev->tick == w.now() + 1);
  }

  TEST_CASE("partitioned links schedule nothing during the window") {
    auto p = small_params(4, 4, 1, 1);
    auto wc = world_config(p, 1);
    wc.network.partitions = {Partition{0, 50, {NodeId{0}, NodeId{1}}}};
    World w(wc, uniform_data(4, 5), zeros(2));
    CHECK_FALSE(w.schedule(NodeId{0}, NodeId{2}, sync_from(0)));
    CHECK_FALSE(w.schedule(NodeId{3}, NodeId{1}, sync_from(3)));
    CHECK(w.schedule(NodeId{0}, NodeId{1}, sync_from(0)));
    CHECK(w.schedule(NodeId{2}, NodeId{3}, sync_from(2)));
  }

  TEST_CASE("equal-time events run in sequence order") {
    auto p = small_params(4, 4, 1, 1);
    auto wc = world_config(p, 1);
    wc.network.committee = {3, 3};
    wc.network.pre_gst_max = 3;
    wc.keep_trace = true;
    World w(wc, uniform_data(4, 5), zeros(2));
    for (std::uint32_t from : {2u, 0u, 3u, 1u}) {
      const auto ev = w.schedule(NodeId{from}, NodeId{5}, sync_from(from));
      REQUIRE(ev);
      CHECK(ev->tick == 3);
    }
    while (w.step()) {
    }
    REQUIRE(w.trace().size() >= 4);
    std::vector<std::uint32_t> order;
    for (const auto& t : w.trace()) {
      if (t.to == NodeId{5} && t.kind == "sync_request") order.push_back(t.from.value);
    }
    CHECK(order == std::vector<std::uint32_t>{2, 0, 3, 1});
    CHECK_FALSE(w.step());
  }

  TEST_CASE("same seed gives the same trace, another seed does not") {
    auto p = small_params(6, 4, 1, 2);
    auto run = [&](std::uint64_t seed) {
      World w(world_config(p, seed), uniform_data(6, 20), zeros(2));
      return w.run();
    };
    const auto a = run(21);
    const auto b = run(21);
    const auto c = run(22);
    CHECK(a.trace_hash == b.trace_hash);
    CHECK(a.messages == b.messages);
    CHECK(a.end_tick == b.end_tick);
    CHECK(a.trace_hash != c.trace_hash);
    REQUIRE(a.epochs.size() == 3);
    for (const auto& [e, o] : a.epochs) {
      CHECK(canonical_serialize(o.locked) == canonical_serialize(b.epochs.at(e).locked));
    }
  }

  TEST_CASE("four nodes: the slow node is left out and catches up next epoch") {
    auto p = small_params(4, 4, 1, 1);
    p.tau.start = 0.6;
    p.epochs = 2;
    auto wc = world_config(p, 3);
    wc.keep_trace = true;
    World w(wc, slow_last(4, 20, 2000), zeros(2));
    const auto r = w.run();
    CHECK(r.exit_code == kExitOk);
    REQUIRE(r.epochs.count(1));
    const auto& first = r.epochs.at(1);
    CHECK(first.block.merge_list == std::vector<NodeId>{NodeId{0}, NodeId{1}, NodeId{2}});
    // D adopts the lock and is still active for epoch 2.
    CHECK(w.node(3).locked_epochs().count(1) == 1);
    REQUIRE(r.epochs.count(2));
    CHECK(r.epochs.at(2).rules.is_active(NodeId{3}));
    // The ordering: A, B, C finish training before D.
    Tick d_block = 0;
    Tick others = 0;
    for (const auto& e : w.events()) {
      if (e.event.kind != "block" || e.event.height != 1) continue;
      if (e.event.node == NodeId{3}) {
        if (d_block == 0) d_block = e.tick;
      } else {
        others = std::max(others, e.tick);
      }
    }
    CHECK((d_block == 0 || d_block > others));
    CHECK(first.lock_tick < 100);
  }

  TEST_CASE("voting census stays within a constant times m squared") {
    for (std::uint32_t n : {4u, 10u}) {
      auto p = small_params(n, 4, 1, 1);
      World w(world_config(p, 40 + n), uniform_data(n, 10), zeros(2));
      const auto r = w.run();
      REQUIRE(r.exit_code == kExitOk);
      for (std::uint64_t e = 1; e <= p.epochs; ++e) {
        CHECK(r.census.at(e).voting <= 4 * 16);
        CHECK(r.census.at(e).sharing > 0);
      }
    }
  }

  TEST_CASE("rush requests are declined and never lock below threshold") {
    auto p = small_params(4, 4, 1, 1);
    auto wc = world_config(p, 12);
    wc.sharing_faults.assign(4, AdversaryBehavior{});
    wc.sharing_faults[0].kind = AdversaryKind::rush_epoch;
    World w(wc, uniform_data(4, 40), zeros(2));
    const auto r = w.run();
    CHECK(r.exit_code == kExitOk);
    CHECK(r.threshold_violations == 0);
    for (const auto& [e, o] : r.epochs) CHECK(o.block.merge_list.size() >= 3);
    std::uint64_t below = 0;
    for (std::uint32_t j = 0; j < 4; ++j) {
      const auto& reasons = w.voter(j).stats().decline_reasons;
      if (auto it = reasons.find("below threshold"); it != reasons.end()) below += it->second;
    }
    CHECK(below > 0);
  }

  TEST_CASE("tampered blocks are discarded and the run still locks") {
    auto p = small_params(4, 4, 1, 1);
    auto wc = world_config(p, 13);
    wc.sharing_faults.assign(4, AdversaryBehavior{});
    wc.sharing_faults[3].kind = AdversaryKind::tamper_block;
    World w(wc, uniform_data(4, 20), zeros(2));
    const auto r = w.run();
    CHECK(r.exit_code == kExitOk);
    std::size_t rejected = 0;
    for (std::uint32_t i = 0; i < 3; ++i) rejected += w.node(i).rejected_blocks();
    CHECK(rejected > 0);
  }

  TEST_CASE("a flood does not stop settlement") {
    auto p = small_params(4, 4, 1, 1);
    auto wc = world_config(p, 14);
    wc.sharing_faults.assign(4, AdversaryBehavior{});
    wc.sharing_faults[2].kind = AdversaryKind::dos_flood;
    wc.sharing_faults[2].flood_rate = 200;
    World w(wc, uniform_data(4, 20), zeros(2));
    const auto r = w.run();
    CHECK(r.exit_code == kExitOk);
    CHECK(r.epochs.size() == p.epochs);
  }

  TEST_CASE("too many Byzantine nodes is reported with its own exit code") {
    auto p = small_params(4, 4, 1, 1);
    auto wc = world_config(p, 15);
    wc.sharing_faults.assign(4, AdversaryBehavior{});
    wc.sharing_faults[0].kind = AdversaryKind::rush_epoch;
    wc.sharing_faults[1].kind = AdversaryKind::tamper_block;
    CHECK_FALSE(faults_within_bounds(wc));
    World w(wc, uniform_data(4, 20), zeros(2));
    const auto r = w.run();
    CHECK(r.faults_exceeded);
    CHECK(r.exit_code == kExitFaultsExceeded);
  }

  TEST_CASE("exhausted budget is a liveness failure") {
    auto p = small_params(4, 4, 1, 1);
    World w(world_config(p, 16, 5), uniform_data(4, 20), zeros(2));
    const auto r = w.run();
    CHECK_FALSE(r.liveness_ok);
    CHECK(r.exit_code == kExitLiveness);
  }

  TEST_CASE("committee partition heals and the run locks after stabilization") {
    auto p = small_params(4, 4, 1, 1);
    auto wc = world_config(p, 17);
    wc.network.gst = 200;
    wc.network.partitions = {Partition{0, 150, {NodeId{4}, NodeId{5}}}};
    World w(wc, uniform_data(4, 20), zeros(2));
    const auto r = w.run();
    CHECK(r.exit_code == kExitOk);
    CHECK(r.dropped > 0);
    CHECK(r.safety_ok);
  }
}
