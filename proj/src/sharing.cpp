#include "pod/sharing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pod/chain.hpp"
#include "pod/serialize.hpp"

namespace pod {

namespace {

constexpr const char* kAdversaryNames[] = {"none",           "rush_epoch",      "delay_liveness",
                                           "dos_flood",      "eclipse_collude", "data_falsify",
                                           "data_redundancy", "tamper_block"};

std::size_t max_future_blocks(std::uint32_t n) { return 4 * static_cast<std::size_t>(n) + 16; }

}  // namespace

std::string to_string(AdversaryKind k) { return kAdversaryNames[static_cast<int>(k)]; }

AdversaryKind parse_adversary_kind(const std::string& text) {
  for (int i = 0; i < 8; ++i) {
    if (text == kAdversaryNames[i]) return static_cast<AdversaryKind>(i);
  }
  throw std::invalid_argument("unknown adversary kind: " + text);
}

std::string to_string(MergeAction a) {
  switch (a) {
    case MergeAction::ignore: return "ignore";
    case MergeAction::buffer: return "buffer";
    case MergeAction::merge_and_broadcast: return "merge_and_broadcast";
    case MergeAction::rollback: return "rollback";
    case MergeAction::reject: return "reject";
  }
  return "?";
}

SharingNode::SharingNode(Setup setup)
    : s_(std::move(setup)), rng_(derive_seed(s_.seed, {0x5348, s_.id.value})) {
  if (!s_.scheme || !s_.directory || !s_.params || !s_.data) {
    throw std::invalid_argument("sharing node setup incomplete");
  }
  rules_ = genesis_rules(p());
  base_ = s_.initial;
  weights_ = base_;
  height_ = p().first_height(1);
  deposited_ = rules_.is_active(s_.id);
}

bool SharingNode::accepts_sender(NodeId sender) const {
  if (!rules_.is_active(sender)) return false;
  if (s_.behavior.kind == AdversaryKind::eclipse_collude && sender != s_.id) {
    const auto& c = s_.behavior.colluders;
    return std::find(c.begin(), c.end(), sender) != c.end();
  }
  return true;
}

Tick SharingNode::training_duration() const {
  if (s_.behavior.kind == AdversaryKind::rush_epoch) return 1;
  const auto rows = s_.data->dataset(s_.id, epoch_).size();
  const auto extra = static_cast<Tick>(std::ceil(static_cast<double>(rows) * p().timing.ticks_per_row));
  return std::max<Tick>(1, p().timing.train_base + extra);
}

ModelWeights SharingNode::weights_for(std::uint64_t height) const {
  if (height <= p().first_height(epoch_)) return base_;
  auto it = chain_.find(height - 1);
  if (it == chain_.end()) throw std::logic_error("missing local block below the training height");
  return merged_weights(it->second);
}

void SharingNode::begin_epoch(const Epoch& locked) {
  if (!locked.locked || !locked.final_weights) {
    throw std::invalid_argument("begin_epoch requires a locked epoch with final weights");
  }
  epoch_ = locked.epoch_height + 1;
  base_ = *locked.final_weights;
  weights_ = base_;
  height_ = p().first_height(epoch_);
  chain_.clear();
  pending_.clear();
  dirty_.clear();
  flush_scheduled_ = false;
  training_ = false;
  ++token_;
  submitted_size_ = 0;
  deposited_ = rules_.is_active(s_.id);
  for (auto it = future_.begin(); it != future_.end();) {
    it = it->first < epoch_ ? future_.erase(it) : std::next(it);
  }
}

Update SharingNode::produce_update() {
  if (!deposited_) throw std::logic_error("node has no deposit for this epoch");
  Update u;
  const auto& data = s_.data->dataset(s_.id, epoch_);
  u.weights = local_train(weights_for(height_), data, p().trainer);
  u.sender = s_.id;
  u.height = height_;
  u.summary = s_.data->claimed_summary(s_.id, epoch_);
  sign_update(u, *s_.scheme, s_.keys.secret_key);
  return u;
}

Block SharingNode::generate_block(const Update& own) {
  std::vector<Update> updates;
  if (auto it = pending_.find(height_); it != pending_.end()) {
    for (const auto& [sender, u] : it->second) {
      if (sender != s_.id && accepts_sender(sender)) updates.push_back(u);
    }
  }
  updates.push_back(own);
  const Digest parent = height_ > p().first_height(epoch_) && chain_.count(height_ - 1)
                            ? chain_.at(height_ - 1).digest
                            : anchor_;
  return make_block(height_, parent, s_.id, std::move(updates));
}

void SharingNode::append_local(const Block& b) {
  chain_[b.height] = b;
  pending_.erase(b.height);
  if (b.height < p().last_height(epoch_)) {
    height_ = b.height + 1;
    weights_ = weights_for(height_);
  }
}

MergeOutcome SharingNode::on_block(const Block& incoming) {
  MergeOutcome out;
  const auto fault = validate_block(incoming, *s_.scheme, *s_.directory);
  if (fault != BlockFault::none) {
    out.action = MergeAction::reject;
    out.reason = to_string(fault);
    return out;
  }
  if (finished_) return out;
  const auto e = p().epoch_of(incoming.height);
  if (e < epoch_) return out;
  if (e > epoch_) {
    auto& slot = future_[e];
    if (slot.size() < max_future_blocks(p().n)) slot.push_back(incoming);
    out.action = MergeAction::buffer;
    out.reason = "future epoch";
    return out;
  }
  if (!deposited_) return out;

  const auto h = incoming.height;
  auto local = chain_.find(h);
  if (local != chain_.end()) {
    const auto& have = local->second.merge_list;
    std::vector<Update> merged = local->second.updates;
    bool fresh = false;
    for (const auto& u : incoming.updates) {
      if (u.sender == s_.id || !accepts_sender(u.sender)) continue;
      if (std::binary_search(have.begin(), have.end(), u.sender)) continue;
      merged.push_back(u);
      fresh = true;
    }
    if (!fresh) return out;
    Block b = make_block(h, local->second.parent_digest, s_.id, std::move(merged));
    local->second = b;
    out.new_block = b;
    const bool at_tip = chain_.rbegin()->first == h;
    if (h == p().last_height(epoch_) && at_tip && !training_) {
      out.action = MergeAction::merge_and_broadcast;
      return out;
    }
    // Blocks above h were built on stale weights; their peers' updates are
    // kept and merged again on the way forward.
    for (auto it = chain_.upper_bound(h); it != chain_.end();) {
      auto& slot = pending_[it->first];
      for (const auto& u : it->second.updates) {
        if (u.sender != s_.id) slot.emplace(u.sender, u);
      }
      it = chain_.erase(it);
    }
    training_ = false;
    ++token_;
    height_ = h + 1;
    weights_ = weights_for(height_);
    out.action = MergeAction::rollback;
    out.rollback_height = h;
    return out;
  }

  auto& slot = pending_[h];
  bool fresh = false;
  for (const auto& u : incoming.updates) {
    if (u.sender == s_.id || !accepts_sender(u.sender)) continue;
    fresh = slot.emplace(u.sender, u).second || fresh;
  }
  if (slot.empty()) pending_.erase(h);
  if (fresh) out.action = MergeAction::buffer;
  return out;
}

bool SharingNode::on_lock(const LockMessage& lock) {
  const auto e = lock.epoch.epoch_height;
  if (e <= locked_epoch_) return false;
  if (!verify_lock(lock, p().committee(), p().quorum(), *s_.scheme, *s_.directory)) {
    ++rejected_locks_;
    return false;
  }
  locked_[e] = lock.epoch;
  locked_epoch_ = e;
  rules_ = advance_rules(p(), rules_, lock.epoch);
  anchor_ = lock.block.digest;
  if (e >= p().epochs) {
    finished_ = true;
    training_ = false;
    ++token_;
    chain_.clear();
    pending_.clear();
    future_.clear();
    dirty_.clear();
    base_ = *lock.epoch.final_weights;
    weights_ = base_;
    epoch_ = e;
    return true;
  }
  begin_epoch(lock.epoch);
  return true;
}

std::vector<NodeId> SharingNode::merge_list_at(std::uint64_t height) const {
  auto it = chain_.find(height);
  return it == chain_.end() ? std::vector<NodeId>{} : it->second.merge_list;
}

std::vector<NodeId> SharingNode::pending_senders(std::uint64_t height) const {
  std::vector<NodeId> out;
  if (auto it = pending_.find(height); it != pending_.end()) {
    for (const auto& [id, u] : it->second) out.push_back(id);
  }
  return out;
}

Digest SharingNode::state_digest() const {
  ByteWriter w;
  w.u64(epoch_);
  w.u64(height_);
  w.u8(training_ ? 1 : 0);
  w.u8(deposited_ ? 1 : 0);
  w.u8(finished_ ? 1 : 0);
  write_weights(w, base_);
  write_weights(w, weights_);
  w.raw(anchor_.bytes);
  w.u64(chain_.size());
  for (const auto& [h, b] : chain_) w.raw(b.digest.bytes);
  for (const auto& [h, slot] : pending_) {
    w.u64(h);
    for (const auto& [id, u] : slot) w.u32(id.value);
  }
  for (const auto& [e, blocks] : future_) {
    w.u64(e);
    for (const auto& b : blocks) w.raw(b.digest.bytes);
  }
  w.u64(locked_epoch_);
  return content_hash(w.bytes());
}

// Actor side: timers and network effects around the transitions above.

void SharingNode::record(Context& ctx, const std::string& kind, std::uint64_t height,
                         std::size_t list, const std::string& detail) {
  ctx.record(NodeEvent{s_.id, kind, height, list, detail});
}

void SharingNode::start(Context& ctx) { enter_epoch(ctx); }

void SharingNode::enter_epoch(Context& ctx) {
  if (finished_) return;
  ctx.set_timer(p().timing.resubmit, kResubmit, epoch_);
  if (!deposited_) {
    record(ctx, "sit_out", height_, 0);
  } else {
    record(ctx, "deposit", height_, 0);
    if (s_.behavior.kind == AdversaryKind::dos_flood) {
      ctx.set_timer(1, kFlood, epoch_);
    } else {
      start_training(ctx, p().first_height(epoch_));
    }
  }
  auto it = future_.find(epoch_);
  if (it != future_.end()) {
    auto blocks = std::move(it->second);
    future_.erase(it);
    for (const auto& b : blocks) handle_block(b, ctx);
  }
}

void SharingNode::start_training(Context& ctx, std::uint64_t height) {
  height_ = height;
  weights_ = weights_for(height);
  training_ = true;
  ++token_;
  ctx.set_timer(training_duration(), kTrainDone, token_);
  record(ctx, "train", height, pending_senders(height).size());
}

void SharingNode::finish_training(Context& ctx) {
  training_ = false;
  const Update u = produce_update();
  const Block b = generate_block(u);
  const auto h = b.height;
  append_local(b);
  dirty_.erase(h);
  broadcast(ctx, b);
  record(ctx, "block", h, b.merge_list.size());
  if (s_.behavior.kind == AdversaryKind::rush_epoch) send_request(ctx, self_only_block());
  if (h < p().last_height(epoch_)) {
    start_training(ctx, h + 1);
  } else {
    maybe_submit(ctx, false);
  }
}

Block SharingNode::self_only_block() {
  Update u;
  u.weights = base_;
  u.sender = s_.id;
  u.height = p().last_height(epoch_);
  u.summary = s_.data->claimed_summary(s_.id, epoch_);
  sign_update(u, *s_.scheme, s_.keys.secret_key);
  return make_block(u.height, anchor_, s_.id, {u});
}

void SharingNode::broadcast(Context& ctx, const Block& b) {
  switch (s_.behavior.kind) {
    case AdversaryKind::delay_liveness: {
      const auto delay = static_cast<Tick>(
          std::ceil(s_.behavior.delay_factor * static_cast<double>(training_duration())));
      ctx.set_timer(std::max<Tick>(1, delay), kDelayedBroadcast, epoch_ << 32 | b.height);
      return;
    }
    case AdversaryKind::tamper_block: {
      Bytes bytes = canonical_serialize(b);
      const auto at = rng_.below(bytes.size());
      bytes[at] ^= static_cast<std::uint8_t>(1u << rng_.below(8));
      try {
        ctx.gossip(decode_block(bytes));
      } catch (const EncodingError&) {
        ctx.gossip(CorruptBlock{std::move(bytes)});
      }
      return;
    }
    default:
      ctx.gossip(b);
  }
}

void SharingNode::mark_dirty(Context& ctx, std::uint64_t height) {
  dirty_.insert(height);
  if (!flush_scheduled_) {
    flush_scheduled_ = true;
    ctx.set_timer(std::max<Tick>(1, p().timing.coalesce), kFlush, epoch_);
  }
}

void SharingNode::send_request(Context& ctx, const Block& b) {
  SettlementRequest req;
  req.proposer = s_.id;
  req.block_digest = b.digest;
  req.merge_list = b.merge_list;
  req.epoch_height = epoch_;
  req.block = b;
  ctx.send_voters(std::move(req));
  record(ctx, "submit", b.height, b.merge_list.size());
}

void SharingNode::maybe_submit(Context& ctx, bool force) {
  if (s_.behavior.kind == AdversaryKind::delay_liveness) return;
  auto it = chain_.find(p().last_height(epoch_));
  if (it == chain_.end() || training_) return;
  const auto size = it->second.merge_list.size();
  if (size < rules_.threshold()) return;
  // First time the threshold is met, once more when everyone is in, and on
  // the resubmit timer: a bounded number of requests per node and epoch.
  if (force || submitted_size_ == 0 ||
      (size > submitted_size_ && size == rules_.active.size())) {
    submitted_size_ = size;
    send_request(ctx, it->second);
  }
}

void SharingNode::request_sync(Context& ctx) {
  const auto committee = p().committee();
  if (committee.empty()) return;
  last_sync_ = ctx.now();
  synced_once_ = true;
  ctx.send(committee[sync_cursor_++ % committee.size()], SyncRequest{locked_epoch_});
}

void SharingNode::handle_block(const Block& b, Context& ctx) {
  const auto out = on_block(b);
  switch (out.action) {
    case MergeAction::reject:
      ++rejected_;
      record(ctx, "reject", b.height, b.merge_list.size(), out.reason);
      break;
    case MergeAction::ignore:
      break;
    case MergeAction::buffer:
      if (p().epoch_of(b.height) > epoch_ &&
          (!synced_once_ || ctx.now() >= last_sync_ + p().timing.resubmit / 4)) {
        request_sync(ctx);
      }
      record(ctx, "buffer", b.height, b.merge_list.size(), out.reason);
      break;
    case MergeAction::merge_and_broadcast:
      mark_dirty(ctx, b.height);
      record(ctx, "merge", b.height, out.new_block->merge_list.size());
      maybe_submit(ctx, false);
      break;
    case MergeAction::rollback:
      mark_dirty(ctx, out.rollback_height);
      record(ctx, "rollback", out.rollback_height, out.new_block->merge_list.size());
      start_training(ctx, out.rollback_height + 1);
      break;
  }
}

void SharingNode::handle_lock(const LockMessage& lock, Context& ctx) {
  const auto before = rejected_locks_;
  if (!on_lock(lock)) {
    if (rejected_locks_ > before) {
      record(ctx, "reject_lock", lock.epoch.last_height, 0, "certificate");
    }
    return;
  }
  record(ctx, "lock", lock.epoch.last_height, lock.block.merge_list.size());
  ctx.report_lock(s_.id, lock.epoch, lock.block);
  enter_epoch(ctx);
}

void SharingNode::on_message(const Message& m, Context& ctx) {
  if (const auto* b = std::get_if<Block>(&m.body)) {
    handle_block(*b, ctx);
  } else if (const auto* lock = std::get_if<LockMessage>(&m.body)) {
    handle_lock(*lock, ctx);
  } else if (std::holds_alternative<CorruptBlock>(m.body)) {
    ++rejected_;
    record(ctx, "reject", 0, 0, "undecodable");
  }
}

void SharingNode::on_timer(std::uint64_t kind, std::uint64_t token, Context& ctx) {
  switch (kind) {
    case kTrainDone:
      if (token == token_ && training_ && !finished_) finish_training(ctx);
      break;
    case kFlush:
      if (token != epoch_ || finished_) break;
      flush_scheduled_ = false;
      for (auto h : dirty_) {
        if (auto it = chain_.find(h); it != chain_.end()) broadcast(ctx, it->second);
      }
      dirty_.clear();
      break;
    case kResubmit: {
      if (token != epoch_ || finished_) break;
      auto it = chain_.find(p().last_height(epoch_));
      if (deposited_ && it != chain_.end() && !training_ &&
          it->second.merge_list.size() >= rules_.threshold() &&
          s_.behavior.kind != AdversaryKind::delay_liveness) {
        maybe_submit(ctx, true);
      } else {
        request_sync(ctx);
      }
      ctx.set_timer(p().timing.resubmit, kResubmit, epoch_);
      break;
    }
    case kFlood: {
      if (token != epoch_ || finished_) break;
      const Block b = self_only_block();
      for (std::uint32_t i = 0; i < s_.behavior.flood_rate; ++i) {
        SettlementRequest req{s_.id, b.digest, b.merge_list, epoch_, b};
        ctx.send_voters(std::move(req));
      }
      ctx.set_timer(1, kFlood, epoch_);
      break;
    }
    case kDelayedBroadcast: {
      if ((token >> 32) != epoch_ || finished_) break;
      if (auto it = chain_.find(token & 0xffffffffULL); it != chain_.end()) ctx.gossip(it->second);
      break;
    }
    default:
      break;
  }
}

}  // namespace pod
