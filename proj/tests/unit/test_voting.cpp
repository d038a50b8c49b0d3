#include <algorithm>

#include "doctest.h"
#include "protocol_helpers.hpp"

using namespace pod;
using namespace podtest;

namespace {

std::vector<NodeId> ids(std::initializer_list<std::uint32_t> v) {
  std::vector<NodeId> out;
  for (auto x : v) out.push_back(NodeId{x});
  return out;
}

EpochRules rules_of(std::uint32_t active, double tau) {
  EpochRules r;
  r.epoch = 1;
  for (std::uint32_t i = 0; i < active; ++i) r.active.push_back(NodeId{i});
  r.tau = tau;
  return r;
}

SettlementRequest request_for(const Block& b, std::uint64_t epoch) {
  return SettlementRequest{b.proposer, b.digest, b.merge_list, epoch, b};
}

QueuedRequest queued(std::uint32_t proposer, std::uint64_t arrival) {
  QueuedRequest q;
  q.request.proposer = NodeId{proposer};
  q.arrival = arrival;
  return q;
}

Rational ratio(long a, long b) { return Rational(a) / Rational(b); }

}  // namespace

TEST_SUITE("voting") {
  TEST_CASE("threshold rule examples") {
    const auto r = rules_of(4, 0.6);
    CHECK_FALSE(check_merge_list(ids({0}), r).accept);
    CHECK(check_merge_list(ids({0}), r).reason == "below threshold");
    CHECK(check_merge_list(ids({0, 1, 2}), r).accept);
    for (double tau : {0.1, 0.5, 2.0 / 3.0, 0.9, 1.0}) {
      CHECK(check_merge_list(ids({0, 1, 2, 3}), rules_of(4, tau)).accept);
    }
    CHECK(threshold_count(2.0 / 3.0, 3) == 2);
    CHECK(threshold_count(2.0 / 3.0, 4) == 3);
    CHECK(threshold_count(0.6, 4) == 3);
    CHECK(threshold_count(0.1, 1) == 1);
  }

  TEST_CASE("inactive member or empty list declines with a reason") {
    const auto r = rules_of(3, 0.5);
    const auto d = check_merge_list(ids({0, 7}), r);
    CHECK_FALSE(d.accept);
    CHECK(d.reason.find("not active") != std::string::npos);
    CHECK_FALSE(check_merge_list({}, r).accept);
  }

  TEST_CASE("request validation checks epoch, height, block and signatures") {
    Keyring ring(8);
    const auto p = small_params(4, 4, 1, 2);
    std::vector<Update> ups;
    for (std::uint32_t i = 0; i < 3; ++i) {
      Update u;
      u.weights = zeros(2);
      u.sender = NodeId{i};
      u.height = 2;
      sign_update(u, ring.scheme, ring.keys[i].secret_key);
      ups.push_back(u);
    }
    const Block b = make_block(2, Digest{}, NodeId{0}, ups);
    const auto rules = genesis_rules(p);
    CHECK(validate_request(request_for(b, 1), rules, p, ring.scheme, ring.dir).accept);
    CHECK(validate_request(request_for(b, 2), rules, p, ring.scheme, ring.dir).reason == "wrong epoch");

    const Block early = make_block(1, Digest{}, NodeId{0}, {});
    CHECK(validate_request(request_for(early, 1), rules, p, ring.scheme, ring.dir).reason ==
          "not a last-height block");

    auto mismatched = request_for(b, 1);
    mismatched.merge_list = ids({0, 1, 2, 3});
    CHECK(validate_request(mismatched, rules, p, ring.scheme, ring.dir).reason ==
          "request does not match its block");

    Block forged = b;
    forged.updates[1].weights.values[0] = 3.0;
    forged.digest = compute_block_digest(forged);
    const auto d = validate_request(request_for(forged, 1), rules, p, ring.scheme, ring.dir);
    CHECK_FALSE(d.accept);
    CHECK(d.reason.find("invalid block") == 0);
  }

  TEST_CASE("prioritize by request count then arrival") {
    std::map<NodeId, std::uint64_t> counts{{NodeId{0}, 1}, {NodeId{1}, 5}};
    auto out = prioritize({queued(1, 0), queued(0, 1)}, counts);
    CHECK(out[0].request.proposer == NodeId{0});

    counts = {{NodeId{0}, 2}, {NodeId{1}, 2}};
    out = prioritize({queued(1, 0), queued(0, 1), queued(1, 2)}, counts);
    CHECK(out[0].arrival == 0);
    CHECK(out[1].arrival == 1);
    CHECK(out[2].arrival == 2);

    std::vector<QueuedRequest> flood;
    for (std::uint64_t t = 0; t < 1000; ++t) flood.push_back(queued(3, t));
    flood.push_back(queued(2, 1000));
    counts = {{NodeId{3}, 1000}, {NodeId{2}, 1}};
    out = prioritize(flood, counts);
    CHECK(out.front().request.proposer == NodeId{2});
  }

  TEST_CASE("settlement examples") {
    const auto one = settle_rewards(1, ids({4}), {1.0}, {}, ids({4}), 100, 1);
    CHECK(one.entries.size() == 1);
    CHECK(one.entries[0].reward == 100);

    const auto two = settle_rewards(1, ids({0, 1}), {0.25, 0.75}, {}, ids({0, 1, 2}), 100, 1);
    REQUIRE(two.entries.size() == 3);
    CHECK(two.entries[0].reward == 25);
    CHECK(two.entries[1].reward == 75);
    CHECK(two.entries[2].reward == 0);
    CHECK(two.total_paid() == 100);

    // A forfeited deposit goes to the honest members pro rata.
    const auto forfeit = settle_rewards(1, ids({0, 1}), {0.5, 0.5}, ids({2}), ids({0, 1, 2}), 100, 1);
    CHECK(forfeit.forfeited_total == 1);
    CHECK(forfeit.entries[0].reward == ratio(101, 2));
    CHECK(forfeit.entries[1].reward == ratio(101, 2));
    CHECK(forfeit.entries[2].forfeited);
    CHECK(forfeit.entries[2].reward == 0);
    CHECK(forfeit.total_paid() == forfeit.pool + forfeit.forfeited_total);

    CHECK_THROWS_AS(settle_rewards(1, {}, {}, {}, ids({0}), 100, 1), std::invalid_argument);
  }

  TEST_CASE("settlement conserves tokens under fuzzing") {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
      std::vector<NodeId> members;
      std::vector<double> shares;
      std::vector<NodeId> forfeited;
      for (std::uint32_t i = 0; i < 10; ++i) {
        const auto roll = rng.below(3);
        if (roll == 0) {
          members.push_back(NodeId{i});
          shares.push_back(rng.uniform());
        } else if (roll == 1) {
          forfeited.push_back(NodeId{i});
        }
      }
      if (members.empty()) continue;
      const auto a = settle_rewards(1, members, shares, forfeited, {}, Rational(rng.below(1000)),
                                    Rational(1 + rng.below(5)));
      CHECK(a.total_paid() == a.pool + a.forfeited_total);
    }
  }

  TEST_CASE("proposal excludes members that failed verification") {
    Keyring ring(8);
    auto p = small_params(4, 4, 1, 1);
    std::vector<Update> ups;
    for (std::uint32_t i = 0; i < 3; ++i) {
      Update u;
      u.weights.values = {static_cast<double>(i), 1.0};
      u.sender = NodeId{i};
      u.height = 1;
      u.summary.count = 100;
      GaussianFit fit;
      fit.components = {{1.0, 0.0, 1.0}};
      fit.count = 100;
      u.summary.per_feature = {fit, fit};
      sign_update(u, ring.scheme, ring.keys[i].secret_key);
      ups.push_back(u);
    }
    const Block b = make_block(1, Digest{}, NodeId{0}, ups);
    const Proposal prop = build_proposal(1, b, {true, false, true}, p, 9);
    CHECK(prop.final_weights.values[0] == doctest::Approx(1.0));
    CHECK(prop.final_weights.values[1] == doctest::Approx(1.0));
    const auto& entries = prop.settlement.entries;
    REQUIRE(entries.size() == 4);
    CHECK(entries[1].forfeited);
    CHECK(entries[1].reward == 0);
    CHECK(entries[3].reward == 0);
    CHECK_FALSE(entries[3].forfeited);
    CHECK(entries[0].reward == entries[2].reward);
    CHECK(prop.settlement.total_paid() == 101);
    CHECK(prop.proposed_at == 9);
    CHECK_THROWS(build_proposal(1, b, {false, false, false}, p, 9));
  }

  TEST_CASE("rules advance: forfeits sit out one epoch, threshold steps on slow epochs") {
    auto p = small_params(4, 4, 1, 1);
    p.tau.dynamic = true;
    p.tau.start = 0.9;
    p.tau.latency_bound = 50;
    const auto g = genesis_rules(p);
    CHECK(g.active.size() == 4);
    Epoch e;
    e.epoch_height = 1;
    e.proposed_at = 80;
    e.settlement = settle_rewards(1, ids({0, 1, 2}), {1, 1, 1}, ids({3}), p.sharing_ids(), 100, 1);
    const auto r2 = advance_rules(p, g, e);
    CHECK(r2.epoch == 2);
    CHECK(r2.active == ids({0, 1, 2}));
    CHECK(r2.tau == doctest::Approx(0.8));
    Epoch e2;
    e2.epoch_height = 2;
    e2.proposed_at = 100;
    e2.settlement = settle_rewards(2, ids({0, 1, 2}), {1, 1, 1}, {}, p.sharing_ids(), 100, 1);
    const auto r3 = advance_rules(p, r2, e2);
    CHECK(r3.active.size() == 4);
    CHECK(r3.tau == doctest::Approx(0.8));
  }

  TEST_CASE("quorum arithmetic and round robin primaries") {
    auto p = small_params(4, 10, 3, 1);
    CHECK(p.quorum() == 7);
    CHECK(primary_for(p, 1, 0) == NodeId{5});
    CHECK(primary_for(p, 1, 1) == NodeId{6});
    CHECK(primary_for(p, 1, 9) == NodeId{4});
    CHECK(primary_for(p, 2, 0) == NodeId{6});
  }

  TEST_CASE("certificates need a quorum of distinct committee votes") {
    auto p = small_params(4, 10, 3, 1);
    Keyring ring(14);
    Update u;
    u.weights = zeros(2);
    u.sender = NodeId{0};
    u.height = 1;
    sign_update(u, ring.scheme, ring.keys[0].secret_key);
    const Block b = make_block(1, Digest{}, NodeId{0}, {u});
    const auto seven = make_lock(p, ring, 1, b, zeros(2), {}, 7);
    const auto six = make_lock(p, ring, 1, b, zeros(2), {}, 6);
    CHECK(verify_lock(seven, p.committee(), p.quorum(), ring.scheme, ring.dir));
    CHECK_FALSE(verify_lock(six, p.committee(), p.quorum(), ring.scheme, ring.dir));
    auto dup = six;
    dup.epoch.certificate->votes.push_back(dup.epoch.certificate->votes.front());
    CHECK_FALSE(verify_lock(dup, p.committee(), p.quorum(), ring.scheme, ring.dir));
    auto altered = seven;
    altered.epoch.final_weights->values[0] = 1.0;
    CHECK_FALSE(verify_lock(altered, p.committee(), p.quorum(), ring.scheme, ring.dir));
  }

  TEST_CASE("honest committee locks with at least a quorum of votes") {
    auto p = small_params(4, 4, 1, 1);
    p.epochs = 2;
    World w(world_config(p, 5), uniform_data(4, 20), zeros(2));
    const auto r = w.run();
    CHECK(r.exit_code == kExitOk);
    REQUIRE(r.epochs.size() == 2);
    for (const auto& [e, o] : r.epochs) {
      CHECK(o.locked.locked);
      REQUIRE(o.locked.certificate);
      CHECK(o.locked.certificate->votes.size() >= 3);
    }
  }

  TEST_CASE("silent primary triggers a view change and the epoch still locks") {
    auto p = small_params(4, 4, 1, 1);
    p.epochs = 2;
    auto wc = world_config(p, 6);
    wc.voter_faults = {VoterFault::none, VoterFault::silent, VoterFault::none, VoterFault::none};
    REQUIRE(primary_for(p, 1, 0) == NodeId{5});
    World w(wc, uniform_data(4, 20), zeros(2));
    const auto r = w.run();
    CHECK(r.exit_code == kExitOk);
    CHECK(r.epochs.size() == 2);
    CHECK(w.voter(0).stats().view_changes >= 1);
  }

  TEST_CASE("equivocating and forging voters cannot split the committee") {
    for (auto fault : {VoterFault::equivocate, VoterFault::forge_lock}) {
      CAPTURE(to_string(fault));
      auto p = small_params(4, 4, 1, 1);
      auto wc = world_config(p, 8);
      wc.voter_faults = {VoterFault::none, fault, VoterFault::none, VoterFault::none};
      World w(wc, uniform_data(4, 20), zeros(2));
      const auto r = w.run();
      CHECK(r.safety_ok);
      CHECK(r.finality_ok);
      CHECK(r.exit_code == kExitOk);
    }
  }

  TEST_CASE("voter fault names round trip") {
    for (auto f : {VoterFault::none, VoterFault::silent, VoterFault::equivocate, VoterFault::forge_lock}) {
      CHECK(parse_voter_fault(to_string(f)) == f);
    }
    CHECK_THROWS(parse_voter_fault("sleepy"));
  }
}
