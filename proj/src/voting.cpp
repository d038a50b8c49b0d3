#include "pod/voting.hpp"

#include <algorithm>
#include <stdexcept>

#include "pod/chain.hpp"
#include "pod/contribution.hpp"

namespace pod {

namespace {

constexpr std::size_t kFutureBufferPerVoter = 256;

bool in_committee(const ProtocolParams& p, NodeId id) { return p.is_voter(id); }

}  // namespace

RequestDecision check_merge_list(const std::vector<NodeId>& merge_list, const EpochRules& rules) {
  if (merge_list.empty()) return {false, "empty merge list"};
  for (auto id : merge_list) {
    if (!rules.is_active(id)) return {false, "member " + to_string(id) + " not active"};
  }
  if (merge_list.size() < rules.threshold()) return {false, "below threshold"};
  return {true, {}};
}

RequestDecision validate_request(const SettlementRequest& req, const EpochRules& rules,
                                 const ProtocolParams& p, const SignatureScheme& scheme,
                                 const KeyDirectory& dir) {
  if (req.epoch_height != rules.epoch) return {false, "wrong epoch"};
  if (req.block.height != p.last_height(rules.epoch)) return {false, "not a last-height block"};
  if (req.block_digest != req.block.digest || req.merge_list != req.block.merge_list) {
    return {false, "request does not match its block"};
  }
  const auto fault = validate_block(req.block, scheme, dir);
  if (fault != BlockFault::none) return {false, "invalid block: " + to_string(fault)};
  return check_merge_list(req.merge_list, rules);
}

std::vector<QueuedRequest> prioritize(std::vector<QueuedRequest> queue,
                                      const std::map<NodeId, std::uint64_t>& counts) {
  auto count_of = [&](NodeId id) {
    auto it = counts.find(id);
    return it == counts.end() ? std::uint64_t{0} : it->second;
  };
  std::stable_sort(queue.begin(), queue.end(), [&](const QueuedRequest& a, const QueuedRequest& b) {
    const auto ca = count_of(a.request.proposer);
    const auto cb = count_of(b.request.proposer);
    if (ca != cb) return ca < cb;
    return a.arrival < b.arrival;
  });
  return queue;
}

RewardAllocation settle_rewards(std::uint64_t epoch, const std::vector<NodeId>& members,
                                const std::vector<double>& shares,
                                const std::vector<NodeId>& forfeited,
                                const std::vector<NodeId>& participants, const Rational& pool,
                                const Rational& deposit) {
  if (members.empty()) throw std::invalid_argument("settlement needs at least one member");
  if (shares.size() != members.size()) throw std::invalid_argument("one share per member");
  if (pool < 0 || deposit < 0) throw std::invalid_argument("pool and deposit must be nonnegative");

  std::vector<Rational> exact;
  Rational total = 0;
  for (double r : shares) {
    if (!(r >= 0.0)) throw std::invalid_argument("shares must be nonnegative");
    exact.emplace_back(r);
    total += exact.back();
  }
  if (total == 0) {
    for (auto& e : exact) e = 1;
    total = static_cast<long>(exact.size());
  }

  RewardAllocation alloc;
  alloc.epoch_height = epoch;
  alloc.pool = pool;
  alloc.forfeited_total = deposit * static_cast<long>(forfeited.size());
  const Rational payable = pool + alloc.forfeited_total;

  std::vector<NodeId> everyone = participants;
  everyone.insert(everyone.end(), members.begin(), members.end());
  everyone.insert(everyone.end(), forfeited.begin(), forfeited.end());
  std::sort(everyone.begin(), everyone.end());
  everyone.erase(std::unique(everyone.begin(), everyone.end()), everyone.end());

  for (auto id : everyone) {
    RewardEntry e;
    e.node = id;
    e.forfeited = std::find(forfeited.begin(), forfeited.end(), id) != forfeited.end();
    auto it = std::find(members.begin(), members.end(), id);
    if (it != members.end()) {
      const auto i = static_cast<std::size_t>(it - members.begin());
      e.share = shares[i];
      e.share_exact = exact[i] / total;
      e.reward = payable * e.share_exact;
    }
    alloc.entries.push_back(std::move(e));
  }
  return alloc;
}

ModelWeights weighted_merge(const std::vector<const Update*>& updates,
                            const std::vector<double>& weights) {
  if (updates.empty() || updates.size() != weights.size()) {
    throw std::invalid_argument("weighted_merge needs one weight per update");
  }
  const auto dim = updates.front()->weights.size();
  double total = 0.0;
  for (double w : weights) total += w;
  const bool uniform = !(total > 0.0);
  ModelWeights out;
  out.values.assign(dim, 0.0);
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (updates[i]->weights.size() != dim) throw std::invalid_argument("dimension mismatch");
    const double w = uniform ? 1.0 / static_cast<double>(updates.size()) : weights[i] / total;
    for (std::size_t j = 0; j < dim; ++j) out.values[j] += w * updates[i]->weights.values[j];
  }
  return out;
}

Proposal build_proposal(std::uint64_t epoch, const Block& block, const std::vector<bool>& verified,
                        const ProtocolParams& p, std::uint64_t proposed_at) {
  if (verified.size() != block.merge_list.size() || block.updates.size() != block.merge_list.size()) {
    throw std::invalid_argument("one verification outcome per merge-list member");
  }
  std::vector<NodeId> members;
  std::vector<NodeId> failed;
  std::vector<const Update*> ups;
  std::vector<DataSummary> summaries;
  std::vector<std::uint64_t> counts;
  std::vector<WeightedWeights> by_count;
  for (std::size_t i = 0; i < verified.size(); ++i) {
    const auto& u = block.updates[i];
    if (!verified[i]) {
      failed.push_back(u.sender);
      continue;
    }
    members.push_back(u.sender);
    ups.push_back(&u);
    summaries.push_back(u.summary);
    counts.push_back(u.summary.count);
    by_count.push_back({&u.weights, u.summary.count});
  }
  if (members.empty()) throw std::invalid_argument("no verified member to settle");

  const auto cv = compute_contribution(summaries, counts, p.contribution,
                                       derive_seed(p.contribution_seed, {epoch}));
  Proposal prop;
  prop.epoch_height = epoch;
  prop.block = block;
  prop.final_weights = p.settlement_merge == SettlementMerge::contribution_weighted
                           ? weighted_merge(ups, cv.shares)
                           : merge_weights(by_count);
  prop.settlement = settle_rewards(epoch, members, cv.shares, failed, p.sharing_ids(), p.pool,
                                   p.deposit);
  prop.proposed_at = proposed_at;
  return prop;
}

std::string to_string(VoterFault f) {
  switch (f) {
    case VoterFault::none: return "none";
    case VoterFault::silent: return "silent";
    case VoterFault::equivocate: return "equivocate";
    case VoterFault::forge_lock: return "forge_lock";
  }
  return "?";
}

VoterFault parse_voter_fault(const std::string& text) {
  for (auto f : {VoterFault::none, VoterFault::silent, VoterFault::equivocate, VoterFault::forge_lock}) {
    if (to_string(f) == text) return f;
  }
  throw std::invalid_argument("unknown voter fault: " + text);
}

NodeId primary_for(const ProtocolParams& p, std::uint64_t epoch, std::uint64_t view) {
  return NodeId{p.n + static_cast<std::uint32_t>((epoch + view) % p.m)};
}

Voter::Voter(Setup setup) : s_(std::move(setup)) {
  if (!s_.scheme || !s_.directory || !s_.params) throw std::invalid_argument("voter setup incomplete");
  rules_ = genesis_rules(p());
}

Bytes Voter::sign(const Bytes& payload) const { return s_.scheme->sign(s_.keys.secret_key, payload); }

void Voter::start(Context&) {}

std::uint64_t Voter::message_epoch(const Message& m) const {
  return std::visit(
      [](const auto& b) -> std::uint64_t {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, SettlementRequest> || std::is_same_v<T, PrePrepare> ||
                      std::is_same_v<T, Prepare> || std::is_same_v<T, CommitVote> ||
                      std::is_same_v<T, ViewChange> || std::is_same_v<T, NewView>) {
          return b.epoch_height;
        } else {
          return 0;
        }
      },
      m.body);
}

void Voter::on_message(const Message& m, Context& ctx) {
  if (s_.fault == VoterFault::silent) return;
  if (const auto* lock = std::get_if<LockMessage>(&m.body)) {
    adopt_lock(*lock, ctx);
    return;
  }
  if (const auto* sync = std::get_if<SyncRequest>(&m.body)) {
    if (!lock_messages_.empty() && lock_messages_.rbegin()->first > sync->known_epoch) {
      ctx.send(m.from, lock_messages_.rbegin()->second);
    }
    return;
  }
  const auto e = message_epoch(m);
  if (e == 0) return;
  if (e < epoch_ || finished_) {
    // A node still working on a settled epoch gets the latest lock once.
    if (const auto* req = std::get_if<SettlementRequest>(&m.body)) {
      auto key = std::make_pair(req->proposer, req->epoch_height);
      if (!lock_messages_.empty() && !lock_replies_[key]) {
        lock_replies_[key] = true;
        ctx.send(req->proposer, lock_messages_.rbegin()->second);
      }
    }
    return;
  }
  if (e > epoch_) {
    auto& slot = future_[e];
    if (slot.size() < kFutureBufferPerVoter * p().m) slot.push_back(m);
    return;
  }
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, SettlementRequest>) {
          on_request(b, ctx);
        } else if constexpr (std::is_same_v<T, PrePrepare>) {
          on_preprepare(b, m.from, ctx);
        } else if constexpr (std::is_same_v<T, Prepare>) {
          on_prepare(b, ctx);
        } else if constexpr (std::is_same_v<T, CommitVote>) {
          on_commit(b, ctx);
        } else if constexpr (std::is_same_v<T, ViewChange>) {
          on_view_change(b, ctx);
        } else if constexpr (std::is_same_v<T, NewView>) {
          on_new_view(b, m.from, ctx);
        }
      },
      m.body);
}

void Voter::on_timer(std::uint64_t kind, std::uint64_t token, Context& ctx) {
  if (s_.fault == VoterFault::silent || finished_) return;
  switch (kind) {
    case kProcess:
      if (token != epoch_) return;
      process_scheduled_ = false;
      process_queue(ctx);
      break;
    case kWindow:
      if (token != epoch_) return;
      window_fired_ = true;
      if (primary(view_) == s_.id && !in_view_change_) propose(ctx);
      break;
    case kView: {
      const auto e = token >> 20;
      const auto v = token & 0xfffff;
      if (e != epoch_) return;
      const auto current = in_view_change_ ? target_view_ : view_;
      if (v != current) return;
      start_view_change(current + 1, ctx);
      break;
    }
    default:
      break;
  }
}

// Request intake.

void Voter::on_request(const SettlementRequest& req, Context& ctx) {
  ++stats_.received;
  const auto count = ++counts_[req.proposer];
  QueuedRequest q{req, arrivals_++};
  if (queue_.size() >= p().timing.queue_cap && !queue_.empty()) {
    // Evict the lowest-priority entry, which may be the newcomer.
    auto worst = std::max_element(queue_.begin(), queue_.end(),
                                  [&](const QueuedRequest& a, const QueuedRequest& b) {
                                    const auto ca = counts_[a.request.proposer];
                                    const auto cb = counts_[b.request.proposer];
                                    if (ca != cb) return ca < cb;
                                    return a.arrival < b.arrival;
                                  });
    ++stats_.dropped;
    if (counts_[worst->request.proposer] >= count) {
      *worst = std::move(q);
    }
  } else {
    queue_.push_back(std::move(q));
  }
  if (!process_scheduled_) {
    process_scheduled_ = true;
    ctx.set_timer(1, kProcess, epoch_);
  }
}

void Voter::process_queue(Context& ctx) {
  if (queue_.empty()) return;
  auto ordered = p().queue_order == QueueOrder::priority ? prioritize(std::move(queue_), counts_)
                                                         : std::move(queue_);
  const auto take = std::min(p().timing.voter_capacity, ordered.size());
  queue_.assign(std::make_move_iterator(ordered.begin() + static_cast<std::ptrdiff_t>(take)),
                std::make_move_iterator(ordered.end()));
  for (std::size_t i = 0; i < take; ++i) {
    const auto& req = ordered[i].request;
    auto d = validate_request(req, rules_, p(), *s_.scheme, *s_.directory);
    if (d.accept) {
      std::size_t verified = 0;
      for (auto id : req.merge_list) verified += ctx.verify_member(id, epoch_) ? 1 : 0;
      if (verified < rules_.threshold()) d = {false, "verified members below threshold"};
    }
    if (!d.accept) {
      ++stats_.declined;
      ++stats_.decline_reasons[d.reason];
      continue;
    }
    ++stats_.accepted;
    note_accepted(req.block, ctx);
    if (finished_ || req.epoch_height != epoch_) return;
  }
  if (!queue_.empty() && !process_scheduled_) {
    process_scheduled_ = true;
    ctx.set_timer(1, kProcess, epoch_);
  }
}

void Voter::note_accepted(const Block& b, Context& ctx) {
  if (!best_ || fork_prefers(b, *best_)) best_ = b;
  if (!window_started_) {
    window_started_ = true;
    first_accept_[epoch_] = ctx.now();
    ctx.set_timer(std::max<Tick>(1, p().timing.settlement_window), kWindow, epoch_);
    if (!in_view_change_) arm_view_timer(ctx, view_);
  }
  if (s_.fault == VoterFault::forge_lock && !forged_) forge_lock(b, ctx);
  if (window_fired_ && primary(view_) == s_.id && !in_view_change_) propose(ctx);
}

void Voter::arm_view_timer(Context& ctx, std::uint64_t view) {
  if (!armed_views_.insert(view).second) return;
  const auto shift = std::min<std::uint64_t>(view, 8);
  ctx.set_timer(p().timing.view_timeout << shift, kView, epoch_ << 20 | view);
}

// Agreement.

void Voter::propose(Context& ctx) {
  if (!best_ || proposed_views_.count(view_)) return;
  std::vector<bool> verified;
  for (auto id : best_->merge_list) verified.push_back(ctx.verify_member(id, epoch_));
  Proposal prop;
  try {
    prop = build_proposal(epoch_, *best_, verified, p(), ctx.now());
  } catch (const std::invalid_argument&) {
    return;
  }
  proposed_views_.insert(view_);
  if (s_.fault == VoterFault::equivocate) {
    // Two conflicting proposals to two halves of the committee.
    Proposal other = prop;
    other.proposed_at += 1;
    const auto committee = p().committee();
    for (std::size_t i = 0; i < committee.size(); ++i) {
      if (committee[i] == s_.id) continue;
      const Proposal& pick = i % 2 == 0 ? prop : other;
      PrePrepare pp{epoch_, view_, pick, sign(preprepare_payload(epoch_, view_, pick.digest()))};
      ctx.send(committee[i], std::move(pp));
    }
    for (const Proposal* q : {&prop, &other}) {
      proposals_[q->digest()] = *q;
      send_prepare(view_, q->digest(), ctx);
    }
    return;
  }
  PrePrepare pp{epoch_, view_, prop, sign(preprepare_payload(epoch_, view_, prop.digest()))};
  ctx.send_voters(std::move(pp));
  accept_proposal(prop, view_, ctx);
}

std::optional<Proposal> Voter::validate_proposal(const Proposal& prop, Context& ctx) {
  if (prop.epoch_height != epoch_ || prop.proposed_at > ctx.now()) return std::nullopt;
  const auto& b = prop.block;
  if (b.height != p().last_height(epoch_)) return std::nullopt;
  if (validate_block(b, *s_.scheme, *s_.directory) != BlockFault::none) return std::nullopt;
  if (!check_merge_list(b.merge_list, rules_).accept) return std::nullopt;
  std::vector<bool> verified;
  std::size_t passed = 0;
  for (auto id : b.merge_list) {
    verified.push_back(ctx.verify_member(id, epoch_));
    passed += verified.back() ? 1 : 0;
  }
  if (passed < rules_.threshold()) return std::nullopt;
  try {
    auto expected = build_proposal(epoch_, b, verified, p(), prop.proposed_at);
    if (expected.digest() != prop.digest()) return std::nullopt;
    return expected;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void Voter::accept_proposal(const Proposal& prop, std::uint64_t view, Context& ctx) {
  const auto d = prop.digest();
  preprepared_[view] = d;
  proposals_[d] = prop;
  send_prepare(view, d, ctx);
  check_prepared(view, d, ctx);
}

void Voter::send_prepare(std::uint64_t view, const Digest& d, Context& ctx) {
  if (!sent_prepare_.insert({view, d}).second) return;
  Prepare pr{epoch_, view, d, s_.id, sign(prepare_payload(epoch_, view, d))};
  prepares_[{view, d}][s_.id] = pr;
  ctx.send_voters(std::move(pr));
}

void Voter::send_commit(const Digest& d, Context& ctx) {
  if (!sent_commit_.insert(d).second) return;
  CommitVote cv{epoch_, view_, d, s_.id, sign(commit_payload(epoch_, d))};
  commits_[d][s_.id] = cv;
  ctx.send_voters(std::move(cv));
}

void Voter::on_preprepare(const PrePrepare& pp, NodeId from, Context& ctx) {
  if (s_.fault == VoterFault::equivocate) {
    // Votes for whatever it is shown.
    const auto d = pp.proposal.digest();
    proposals_[d] = pp.proposal;
    send_prepare(pp.view, d, ctx);
    send_commit(d, ctx);
    return;
  }
  if (pp.view != view_ || in_view_change_ || from != primary(view_)) return;
  if (preprepared_.count(view_)) return;
  const auto d = pp.proposal.digest();
  if (!verify_by(*s_.scheme, *s_.directory, from, preprepare_payload(epoch_, pp.view, d),
                 pp.signature)) {
    return;
  }
  auto prop = validate_proposal(pp.proposal, ctx);
  if (!prop) return;
  arm_view_timer(ctx, view_);
  accept_proposal(*prop, view_, ctx);
}

void Voter::on_prepare(const Prepare& pr, Context& ctx) {
  if (!in_committee(p(), pr.voter)) return;
  if (!verify_by(*s_.scheme, *s_.directory, pr.voter,
                 prepare_payload(pr.epoch_height, pr.view, pr.proposal_digest), pr.signature)) {
    return;
  }
  prepares_[{pr.view, pr.proposal_digest}][pr.voter] = pr;
  if (s_.fault == VoterFault::equivocate && proposals_.count(pr.proposal_digest)) {
    send_commit(pr.proposal_digest, ctx);
  }
  check_prepared(pr.view, pr.proposal_digest, ctx);
}

void Voter::check_prepared(std::uint64_t view, const Digest& d, Context& ctx) {
  if (byzantine() || view != view_ || in_view_change_) return;
  auto pre = preprepared_.find(view);
  if (pre == preprepared_.end() || pre->second != d || sent_commit_.count(d)) return;
  const auto& votes = prepares_[{view, d}];
  if (votes.size() < p().quorum()) return;
  PreparedCertificate pc;
  pc.view = view;
  pc.proposal = proposals_.at(d);
  for (const auto& [id, pr] : votes) {
    if (pc.prepares.size() == p().quorum()) break;
    pc.prepares.push_back(pr);
  }
  if (!prepared_ || pc.view >= prepared_->view) prepared_ = std::move(pc);
  send_commit(d, ctx);
  check_commit(d, ctx);
}

void Voter::on_commit(const CommitVote& cv, Context& ctx) {
  if (!in_committee(p(), cv.voter)) return;
  if (!verify_by(*s_.scheme, *s_.directory, cv.voter,
                 commit_payload(cv.epoch_height, cv.proposal_digest), cv.signature)) {
    return;
  }
  commits_[cv.proposal_digest][cv.voter] = cv;
  check_commit(cv.proposal_digest, ctx);
}

void Voter::check_commit(const Digest& d, Context& ctx) {
  if (byzantine() || !sent_commit_.count(d)) return;
  auto it = commits_.find(d);
  if (it == commits_.end() || it->second.size() < p().quorum()) return;
  auto prop = proposals_.find(d);
  if (prop == proposals_.end()) return;
  lock(prop->second, ctx);
}

void Voter::lock(const Proposal& prop, Context& ctx) {
  const auto d = prop.digest();
  Epoch ep;
  ep.epoch_height = epoch_;
  ep.first_height = p().first_height(epoch_);
  ep.last_height = p().last_height(epoch_);
  ep.proposed_at = prop.proposed_at;
  ep.locked = true;
  LockCertificate cert;
  cert.epoch_height = epoch_;
  cert.proposal_digest = d;
  for (const auto& [id, cv] : commits_.at(d)) {
    if (cert.votes.size() == p().quorum()) break;
    cert.votes.push_back(Vote{id, cv.signature});
  }
  ep.certificate = std::move(cert);
  ep.final_weights = prop.final_weights;
  ep.settlement = prop.settlement;
  LockMessage lm{ep, prop.block};
  locked_[epoch_] = ep;
  lock_messages_[epoch_] = lm;
  ctx.report_lock(s_.id, ep, prop.block);
  ctx.send_sharing(lm);
  ctx.send_voters(lm);
  advance(ep, ctx);
}

void Voter::adopt_lock(const LockMessage& lm, Context& ctx) {
  const auto e = lm.epoch.epoch_height;
  if (e < epoch_ || locked_.count(e)) return;
  if (!verify_lock(lm, p().committee(), p().quorum(), *s_.scheme, *s_.directory)) {
    ++stats_.rejected_locks;
    return;
  }
  locked_[e] = lm.epoch;
  lock_messages_[e] = lm;
  if (!byzantine()) ctx.report_lock(s_.id, lm.epoch, lm.block);
  advance(lm.epoch, ctx);
}

void Voter::advance(const Epoch& locked, Context& ctx) {
  rules_ = advance_rules(p(), rules_, locked);
  epoch_ = locked.epoch_height + 1;
  queue_.clear();
  counts_.clear();
  process_scheduled_ = false;
  best_.reset();
  window_started_ = false;
  window_fired_ = false;
  view_ = 0;
  in_view_change_ = false;
  target_view_ = 0;
  armed_views_.clear();
  proposed_views_.clear();
  preprepared_.clear();
  proposals_.clear();
  prepares_.clear();
  commits_.clear();
  sent_prepare_.clear();
  sent_commit_.clear();
  prepared_.reset();
  view_changes_.clear();
  sent_new_view_.clear();
  forged_ = false;
  if (epoch_ > p().epochs) {
    finished_ = true;
    future_.clear();
    return;
  }
  for (auto it = future_.begin(); it != future_.end();) {
    it = it->first < epoch_ ? future_.erase(it) : std::next(it);
  }
  auto it = future_.find(epoch_);
  if (it == future_.end()) return;
  auto replay = std::move(it->second);
  future_.erase(it);
  for (const auto& m : replay) {
    on_message(m, ctx);
    if (epoch_ != locked.epoch_height + 1) return;  // locked again meanwhile
  }
}

// View change.

bool Voter::valid_view_change(const ViewChange& vc) const {
  if (!in_committee(p(), vc.voter) || vc.epoch_height != epoch_) return false;
  if (!verify_by(*s_.scheme, *s_.directory, vc.voter, view_change_payload(vc), vc.signature)) {
    return false;
  }
  if (vc.prepared) {
    if (vc.prepared->view >= vc.new_view) return false;
    if (!verify_prepared(*vc.prepared, epoch_, p().committee(), p().quorum(), *s_.scheme,
                         *s_.directory)) {
      return false;
    }
  }
  return true;
}

void Voter::start_view_change(std::uint64_t new_view, Context& ctx) {
  if (in_view_change_ && new_view <= target_view_) return;
  if (new_view <= view_) return;
  in_view_change_ = true;
  target_view_ = new_view;
  ++stats_.view_changes;
  ViewChange vc;
  vc.epoch_height = epoch_;
  vc.new_view = new_view;
  vc.voter = s_.id;
  vc.prepared = prepared_;
  vc.signature = sign(view_change_payload(vc));
  view_changes_[new_view][s_.id] = vc;
  ctx.send_voters(vc);
  arm_view_timer(ctx, new_view);
  try_new_view(new_view, ctx);
}

void Voter::on_view_change(const ViewChange& vc, Context& ctx) {
  if (vc.new_view <= view_ || !valid_view_change(vc)) return;
  view_changes_[vc.new_view][vc.voter] = vc;
  // Join once f+1 others want to move past our current target.
  const auto current = in_view_change_ ? target_view_ : view_;
  std::map<NodeId, std::uint64_t> wants;
  for (const auto& [v, by] : view_changes_) {
    if (v <= current) continue;
    for (const auto& [id, _] : by) {
      auto& w = wants[id];
      w = w == 0 ? v : std::min(w, v);
    }
  }
  if (wants.size() >= p().f_v + 1) {
    std::vector<std::uint64_t> views;
    for (const auto& [id, v] : wants) views.push_back(v);
    std::sort(views.begin(), views.end());
    // Smallest view that f+1 voters all want to reach or pass.
    start_view_change(views[views.size() - (p().f_v + 1)], ctx);
  }
  try_new_view(vc.new_view, ctx);
}

void Voter::try_new_view(std::uint64_t new_view, Context& ctx) {
  if (primary(new_view) != s_.id || sent_new_view_.count(new_view) || new_view <= view_) return;
  if (in_view_change_ && new_view < target_view_) return;
  const auto& by = view_changes_[new_view];
  if (by.size() < p().quorum()) return;
  sent_new_view_.insert(new_view);
  NewView nv;
  nv.epoch_height = epoch_;
  nv.view = new_view;
  const PreparedCertificate* highest = nullptr;
  for (const auto& [id, vc] : by) {
    if (nv.view_changes.size() == p().quorum()) break;
    nv.view_changes.push_back(vc);
    if (vc.prepared && (!highest || vc.prepared->view > highest->view)) highest = &*vc.prepared;
  }
  if (highest) {
    nv.proposal = highest->proposal;
  } else if (best_) {
    std::vector<bool> verified;
    for (auto id : best_->merge_list) verified.push_back(ctx.verify_member(id, epoch_));
    try {
      nv.proposal = build_proposal(epoch_, *best_, verified, p(), ctx.now());
    } catch (const std::invalid_argument&) {
    }
  }
  std::optional<Digest> d;
  if (nv.proposal) d = nv.proposal->digest();
  nv.signature = sign(new_view_payload(epoch_, new_view, d));
  const auto proposal = nv.proposal;
  ctx.send_voters(std::move(nv));
  enter_view(new_view, ctx);
  if (proposal) {
    proposed_views_.insert(new_view);
    accept_proposal(*proposal, new_view, ctx);
  }
}

void Voter::on_new_view(const NewView& nv, NodeId from, Context& ctx) {
  if (nv.view <= view_ || from != primary(nv.view)) return;
  std::optional<Digest> d;
  if (nv.proposal) d = nv.proposal->digest();
  if (!verify_by(*s_.scheme, *s_.directory, from, new_view_payload(epoch_, nv.view, d),
                 nv.signature)) {
    return;
  }
  std::set<NodeId> voters;
  const PreparedCertificate* highest = nullptr;
  for (const auto& vc : nv.view_changes) {
    if (vc.new_view != nv.view || voters.count(vc.voter) || !valid_view_change(vc)) continue;
    voters.insert(vc.voter);
    if (vc.prepared && (!highest || vc.prepared->view > highest->view)) highest = &*vc.prepared;
  }
  if (voters.size() < p().quorum()) return;
  std::optional<Proposal> prop;
  if (highest) {
    if (!nv.proposal || *d != highest->proposal.digest()) return;
    prop = highest->proposal;
  } else if (nv.proposal) {
    prop = validate_proposal(*nv.proposal, ctx);
    if (!prop) return;
  }
  enter_view(nv.view, ctx);
  if (prop) accept_proposal(*prop, nv.view, ctx);
}

void Voter::enter_view(std::uint64_t view, Context& ctx) {
  view_ = view;
  in_view_change_ = false;
  target_view_ = view;
  arm_view_timer(ctx, view);
  if (primary(view) == s_.id && window_fired_ && !proposed_views_.count(view)) propose(ctx);
}

void Voter::forge_lock(const Block& b, Context& ctx) {
  forged_ = true;
  Epoch ep;
  ep.epoch_height = epoch_;
  ep.first_height = p().first_height(epoch_);
  ep.last_height = p().last_height(epoch_);
  ep.proposed_at = ctx.now();
  ep.locked = true;
  ModelWeights zero;
  zero.values.assign(b.updates.empty() ? p().dimension : b.updates.front().weights.size(), 0.0);
  ep.final_weights = zero;
  ep.settlement = settle_rewards(epoch_, b.merge_list, std::vector<double>(b.merge_list.size(), 1.0),
                                 {}, p().sharing_ids(), p().pool, p().deposit);
  LockCertificate cert;
  cert.epoch_height = epoch_;
  cert.proposal_digest = lock_proposal_digest(ep, b);
  for (auto id : p().committee()) {
    Vote v{id, {}};
    if (id == s_.id) {
      v.signature = sign(commit_payload(epoch_, cert.proposal_digest));
    } else {
      v.signature.assign(64, static_cast<std::uint8_t>(0xA5 ^ id.value));
    }
    cert.votes.push_back(std::move(v));
  }
  ep.certificate = std::move(cert);
  LockMessage lm{ep, b};
  ctx.send_sharing(lm);
  ctx.send_voters(lm);
}

}  // namespace pod
