#include "pod/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pod/serialize.hpp"

namespace pod {

namespace {

constexpr std::uint64_t kTagKey = 0x4b4559;
constexpr std::uint64_t kTagNet = 0x4e4554;
constexpr std::uint64_t kTagVerify = 0x564552;
constexpr std::uint64_t kTagNode = 0x4e4f44;

std::size_t byzantine_sharing(const WorldConfig& cfg) {
  std::size_t k = 0;
  for (const auto& b : cfg.sharing_faults) k += b.honest() ? 0 : 1;
  return k;
}

std::size_t faulty_voters(const WorldConfig& cfg) {
  std::size_t k = 0;
  for (auto f : cfg.voter_faults) k += f == VoterFault::none ? 0 : 1;
  return k;
}

}  // namespace

bool faults_within_bounds(const WorldConfig& cfg) {
  const auto& p = cfg.params;
  return byzantine_sharing(cfg) <= p.n / 3 && faulty_voters(cfg) <= p.f_v && p.m >= 3 * p.f_v + 1;
}

class World::ActorContext final : public Context {
 public:
  ActorContext(World& w, NodeId self) : w_(w), self_(self) {}

  Tick now() const override { return w_.now_; }
  void send(NodeId to, MessageBody body) override {
    w_.send(self_, to, std::make_shared<const Message>(Message{self_, std::move(body)}));
  }
  void gossip(MessageBody body) override { w_.gossip(self_, std::move(body)); }
  void send_voters(MessageBody body) override {
    auto m = std::make_shared<const Message>(Message{self_, std::move(body)});
    for (auto id : w_.cfg_.params.committee()) {
      if (id != self_) w_.send(self_, id, m);
    }
  }
  void send_sharing(MessageBody body) override {
    auto m = std::make_shared<const Message>(Message{self_, std::move(body)});
    for (auto id : w_.cfg_.params.sharing_ids()) {
      if (id != self_) w_.send(self_, id, m);
    }
  }
  void set_timer(Tick delay, std::uint64_t kind, std::uint64_t token) override {
    w_.timer(self_, delay, kind, token);
  }
  bool verify_member(NodeId node, std::uint64_t epoch) override {
    return w_.verify_member(node, epoch);
  }
  void record(const NodeEvent& e) override { w_.record_event(e); }
  void report_lock(NodeId who, const Epoch& e, const Block& b) override {
    w_.report_lock(who, e, b);
  }

 private:
  World& w_;
  NodeId self_;
};

World::World(WorldConfig cfg, std::shared_ptr<const DataSource> data, ModelWeights initial)
    : cfg_(std::move(cfg)),
      data_(std::move(data)),
      net_rng_(derive_seed(cfg_.seed, {kTagNet})) {
  const auto& p = cfg_.params;
  if (p.n == 0) throw std::invalid_argument("at least one sharing node is required");
  if (p.m == 0) throw std::invalid_argument("at least one voter is required");
  if (!cfg_.sharing_faults.empty() && cfg_.sharing_faults.size() != p.n) {
    throw std::invalid_argument("sharing_faults must list every sharing node");
  }
  if (!cfg_.voter_faults.empty() && cfg_.voter_faults.size() != p.m) {
    throw std::invalid_argument("voter_faults must list every voter");
  }
  if (cfg_.sharing_faults.empty()) cfg_.sharing_faults.assign(p.n, AdversaryBehavior{});
  if (cfg_.voter_faults.empty()) cfg_.voter_faults.assign(p.m, VoterFault::none);
  if (cfg_.ed25519) {
    scheme_ = std::make_unique<Ed25519SignatureScheme>();
  } else {
    scheme_ = std::make_unique<MacSignatureScheme>();
  }
  std::vector<KeyPair> keys;
  for (std::uint32_t i = 0; i < p.n + p.m; ++i) {
    keys.push_back(scheme_->keygen(derive_seed(cfg_.seed, {kTagKey, i})));
    directory_.add(NodeId{i}, keys.back().public_key);
  }
  for (std::uint32_t i = 0; i < p.n; ++i) {
    SharingNode::Setup s;
    s.id = NodeId{i};
    s.keys = keys[i];
    s.scheme = scheme_.get();
    s.directory = &directory_;
    s.params = &cfg_.params;
    s.data = data_;
    s.behavior = cfg_.sharing_faults[i];
    s.initial = initial;
    s.seed = derive_seed(cfg_.seed, {kTagNode, i});
    actors_.push_back(std::make_unique<SharingNode>(std::move(s)));
  }
  for (std::uint32_t j = 0; j < p.m; ++j) {
    Voter::Setup s;
    s.id = NodeId{p.n + j};
    s.keys = keys[p.n + j];
    s.scheme = scheme_.get();
    s.directory = &directory_;
    s.params = &cfg_.params;
    s.fault = cfg_.voter_faults[j];
    s.seed = derive_seed(cfg_.seed, {kTagNode, p.n + j});
    actors_.push_back(std::make_unique<Voter>(std::move(s)));
  }
  for (const auto& a : actors_) contexts_.push_back(std::make_unique<ActorContext>(*this, a->id()));
  canonical_rules_ = genesis_rules(p);
}

World::~World() = default;

Actor& World::actor(NodeId id) {
  if (id.value >= actors_.size()) throw std::out_of_range("no such node " + to_string(id));
  return *actors_[id.value];
}

SharingNode& World::node(std::uint32_t i) {
  if (i >= cfg_.params.n) throw std::out_of_range("no such sharing node");
  return static_cast<SharingNode&>(*actors_[i]);
}

Voter& World::voter(std::uint32_t j) {
  if (j >= cfg_.params.m) throw std::out_of_range("no such voter");
  return static_cast<Voter&>(*actors_[cfg_.params.n + j]);
}

bool World::honest(NodeId id) const {
  const auto& p = cfg_.params;
  if (id.value < p.n) return cfg_.sharing_faults[id.value].honest();
  if (id.value < p.n + p.m) return cfg_.voter_faults[id.value - p.n] == VoterFault::none;
  return false;
}

bool World::partitioned(NodeId from, NodeId to) const {
  for (const auto& part : cfg_.network.partitions) {
    if (now_ < part.start || now_ >= part.end) continue;
    const bool a = std::find(part.side.begin(), part.side.end(), from) != part.side.end();
    const bool b = std::find(part.side.begin(), part.side.end(), to) != part.side.end();
    if (a != b) return true;
  }
  return false;
}

Tick World::sample_delay(NodeId from, NodeId to) {
  const auto& net = cfg_.network;
  const bool committee_link = cfg_.params.is_voter(from) || cfg_.params.is_voter(to);
  DelayRange r = committee_link ? net.committee : net.sharing;
  if (committee_link && now_ < net.gst) r.max = std::max(r.max, net.pre_gst_max);
  const Tick lo = std::max<Tick>(1, r.min);
  const Tick hi = std::max(lo, r.max);
  Tick d = lo + net_rng_.below(hi - lo + 1);
  if (auto it = net.link_multipliers.find({from, to}); it != net.link_multipliers.end()) {
    d = static_cast<Tick>(std::ceil(static_cast<double>(d) * it->second));
  }
  return std::max<Tick>(1, d);
}

std::uint64_t World::census_epoch() const { return first_unlocked_; }

std::optional<SimEvent> World::schedule(NodeId from, NodeId to, MessagePtr m) {
  if (partitioned(from, to)) {
    ++result_.dropped;
    return std::nullopt;
  }
  SimEvent ev;
  ev.tick = now_ + sample_delay(from, to);
  ev.seq = seq_++;
  ev.to = to;
  ev.message = std::move(m);
  queue_.push(ev);
  return ev;
}

void World::send(NodeId from, NodeId to, MessagePtr m) {
  if (from == to) return;
  auto& c = result_.census[census_epoch()];
  if (cfg_.params.is_voter(from) && cfg_.params.is_voter(to)) {
    ++c.voting;
  } else {
    ++c.sharing;
  }
  ++result_.messages;
  schedule(from, to, std::move(m));
}

void World::gossip(NodeId from, MessageBody body) {
  auto m = std::make_shared<const Message>(Message{from, std::move(body)});
  const auto ids = cfg_.params.sharing_ids();
  if (cfg_.network.topology == Topology::full) {
    for (auto id : ids) {
      if (id != from) send(from, id, m);
    }
    return;
  }
  std::vector<NodeId> peers;
  for (auto id : ids) {
    if (id != from) peers.push_back(id);
  }
  const auto k = std::min<std::size_t>(cfg_.network.fanout, peers.size());
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + net_rng_.below(peers.size() - i);
    std::swap(peers[i], peers[j]);
    send(from, peers[i], m);
  }
}

void World::timer(NodeId who, Tick delay, std::uint64_t kind, std::uint64_t token) {
  SimEvent ev;
  ev.tick = now_ + std::max<Tick>(1, delay);
  ev.seq = seq_++;
  ev.to = who;
  ev.timer_kind = kind;
  ev.timer_token = token;
  queue_.push(ev);
}

bool World::verify_member(NodeId node, std::uint64_t epoch) {
  if (node.value >= cfg_.params.n) return false;
  const auto version = data_->data_version(node, epoch);
  const auto key = std::make_pair(node, version);
  if (auto it = verify_cache_.find(key); it != verify_cache_.end()) return it->second;
  VerificationRecord rec;
  rec.node = node;
  rec.epoch = epoch;
  rec.version = version;
  const auto& d = data_->dataset(node, epoch);
  if (d.empty()) {
    rec.pass = true;
  } else {
    auto report = std::make_shared<VerificationReport>(
        verify_holder(d, data_->holder_claim(node, epoch), cfg_.verification,
                      derive_seed(cfg_.seed, {kTagVerify, node.value, version})));
    rec.pass = report->pass();
    rec.failure = report->failure;
    if (cfg_.keep_transcripts) rec.report = std::move(report);
  }
  verify_cache_[key] = rec.pass;
  const bool pass = rec.pass;
  verifications_.push_back(std::move(rec));
  return pass;
}

void World::record_event(const NodeEvent& e) {
  std::ostringstream line;
  line << "E " << now_ << ' ' << e.node.value << ' ' << e.kind << ' ' << e.height << ' '
       << e.merge_list << ' ' << e.detail << '\n';
  hash_.update(line.str());
  if (cfg_.keep_trace) events_.push_back({now_, e});
}

void World::report_lock(NodeId who, const Epoch& e, const Block& b) {
  if (!honest(who)) return;
  const auto h = e.epoch_height;
  const Digest snap = content_hash(canonical_serialize(e));
  const auto key = std::make_pair(who, h);
  if (auto it = snapshots_.find(key); it != snapshots_.end()) {
    if (it->second != snap) {
      result_.finality_ok = false;
      result_.violations.push_back("finality: " + to_string(who) + " relocked epoch " +
                                   std::to_string(h));
    }
    return;
  }
  snapshots_[key] = snap;
  const Digest d = e.certificate ? e.certificate->proposal_digest : Digest{};
  if (auto it = result_.epochs.find(h); it != result_.epochs.end()) {
    if (it->second.locked.certificate->proposal_digest != d) {
      result_.safety_ok = false;
      result_.violations.push_back("safety: conflicting locks at epoch " + std::to_string(h) +
                                   " reported by " + to_string(who));
    }
    return;
  }
  EpochOutcome out;
  out.epoch = h;
  out.lock_tick = now_;
  out.locked = e;
  out.block = b;
  // Rules for epoch h follow from the canonical outcome of h-1.
  if (h > 1 && result_.epochs.count(h - 1)) {
    const auto& prev = result_.epochs.at(h - 1);
    out.rules = advance_rules(cfg_.params, prev.rules, prev.locked);
  } else {
    out.rules = genesis_rules(cfg_.params);
    out.rules.epoch = h;
  }
  const auto verdict = check_merge_list(b.merge_list, out.rules);
  if (!verdict.accept) {
    ++result_.threshold_violations;
    result_.violations.push_back("threshold: epoch " + std::to_string(h) + " locked with " +
                                 std::to_string(b.merge_list.size()) + " members (" +
                                 verdict.reason + ")");
  }
  result_.epochs[h] = std::move(out);
  while (result_.epochs.count(first_unlocked_)) ++first_unlocked_;
  if (first_unlocked_ > cfg_.params.epochs && !all_locked_at_) all_locked_at_ = now_;
  std::ostringstream line;
  line << "L " << now_ << ' ' << h << ' ' << d.hex() << '\n';
  hash_.update(line.str());
}

void World::start() {
  if (started_) return;
  started_ = true;
  for (std::size_t i = 0; i < actors_.size(); ++i) actors_[i]->start(*contexts_[i]);
}

bool World::step() {
  if (queue_.empty()) return false;
  SimEvent ev = queue_.top();
  queue_.pop();
  now_ = ev.tick;
  ++result_.events;
  auto& a = actor(ev.to);
  auto& ctx = *contexts_[ev.to.value];
  if (ev.message) {
    const auto kind = ev.message->kind();
    const auto size = size_class(ev.message->wire_size());
    std::ostringstream line;
    line << "M " << now_ << ' ' << ev.message->from.value << ' ' << ev.to.value << ' ' << kind
         << ' ' << size << '\n';
    hash_.update(line.str());
    if (cfg_.keep_trace) trace_.push_back({now_, ev.message->from, ev.to, kind, size});
    a.on_message(*ev.message, ctx);
  } else {
    a.on_timer(ev.timer_kind, ev.timer_token, ctx);
  }
  return true;
}

RunResult World::run() {
  try {
    start();
    while (!queue_.empty()) {
      const auto next = queue_.top().tick;
      if (next > cfg_.tick_budget) break;
      if (all_locked_at_ && next > *all_locked_at_ + cfg_.drain) break;
      step();
    }
  } catch (const std::exception& e) {
    result_.error = e.what();
  }
  finish();
  return result_;
}

void World::finish() {
  result_.end_tick = now_;
  for (const auto& a : actors_) {
    if (!honest(a->id())) continue;
    for (const auto& [h, e] : a->locked_epochs()) {
      auto it = snapshots_.find({a->id(), h});
      if (it == snapshots_.end()) continue;
      if (it->second != content_hash(canonical_serialize(e))) {
        result_.finality_ok = false;
        result_.violations.push_back("finality: " + to_string(a->id()) + " epoch " +
                                     std::to_string(h) + " changed after lock");
      }
    }
  }
  result_.liveness_ok = first_unlocked_ > cfg_.params.epochs;
  if (!result_.liveness_ok) {
    result_.violations.push_back("liveness: epoch " + std::to_string(first_unlocked_) +
                                 " not locked by tick " + std::to_string(cfg_.tick_budget));
  }
  result_.faults_exceeded = !faults_within_bounds(cfg_);
  if (!result_.error.empty()) {
    result_.exit_code = kExitAborted;
  } else if (result_.faults_exceeded) {
    result_.exit_code = kExitFaultsExceeded;
  } else if (!result_.safety_ok || !result_.finality_ok || result_.threshold_violations > 0) {
    result_.exit_code = kExitSafety;
  } else if (!result_.liveness_ok) {
    result_.exit_code = kExitLiveness;
  } else {
    result_.exit_code = kExitOk;
  }
  result_.trace_hash = trace_hash();
}

Digest World::trace_hash() {
  if (!final_hash_) final_hash_ = hash_.finish();
  return *final_hash_;
}

}  // namespace pod
