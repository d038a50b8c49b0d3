#include "pod/serialize.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace pod {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) {
  if (!std::isfinite(v)) throw EncodingError("non-finite value in canonical encoding");
  u64(std::bit_cast<std::uint64_t>(v));
}

void ByteWriter::raw(std::span<const std::uint8_t> bytes) {
  out_.insert(out_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::blob(std::span<const std::uint8_t> bytes) {
  u32(static_cast<std::uint32_t>(bytes.size()));
  raw(bytes);
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.insert(out_.end(), s.begin(), s.end());
}

void ByteReader::need(std::size_t n) const {
  if (in_.size() - pos_ < n) throw EncodingError("truncated input");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return in_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_++]} << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_++]} << (8 * i);
  return v;
}

double ByteReader::f64() {
  double v = std::bit_cast<double>(u64());
  if (!std::isfinite(v)) throw EncodingError("non-finite value in encoding");
  return v;
}

void ByteReader::raw(std::span<std::uint8_t> out) {
  need(out.size());
  std::memcpy(out.data(), in_.data() + pos_, out.size());
  pos_ += out.size();
}

Bytes ByteReader::blob() {
  const auto n = u32();
  need(n);
  Bytes b(in_.begin() + pos_, in_.begin() + pos_ + n);
  pos_ += n;
  return b;
}

std::string ByteReader::str() {
  const auto n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(in_.data()) + pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::expect_done() const {
  if (!done()) throw EncodingError("trailing bytes");
}

namespace {

// Hard caps on decoded collection sizes so corrupted length prefixes fail
// fast instead of attempting huge allocations.
constexpr std::uint32_t kMaxItems = 1u << 20;

std::uint32_t read_len(ByteReader& r) {
  auto n = r.u32();
  if (n > kMaxItems) throw EncodingError("collection too large");
  return n;
}

void write_digest(ByteWriter& w, const Digest& d) { w.raw(d.bytes); }

Digest read_digest(ByteReader& r) {
  Digest d;
  r.raw(d.bytes);
  return d;
}

void write_rational(ByteWriter& w, const Rational& q) {
  w.str(boost::multiprecision::numerator(q).str());
  w.str(boost::multiprecision::denominator(q).str());
}

Rational read_rational(ByteReader& r) {
  try {
    boost::multiprecision::cpp_int num(r.str());
    boost::multiprecision::cpp_int den(r.str());
    if (den <= 0) throw EncodingError("non-positive denominator");
    return Rational(num, den);
  } catch (const std::runtime_error& e) {
    throw EncodingError(std::string("bad rational: ") + e.what());
  }
}

void expect_header(ByteReader& r, std::uint8_t tag) {
  if (r.u8() != tag) throw EncodingError("unexpected object tag");
  if (r.u8() != kFormatVersion) throw EncodingError("unsupported format version");
}

void write_block_content(ByteWriter& w, const Block& b) {
  w.u8(kTagBlock);
  w.u8(kFormatVersion);
  w.u64(b.height);
  write_digest(w, b.parent_digest);
  w.u32(b.proposer.value);
  w.u32(static_cast<std::uint32_t>(b.merge_list.size()));
  for (auto id : b.merge_list) w.u32(id.value);
  w.u32(static_cast<std::uint32_t>(b.updates.size()));
  for (const auto& u : b.updates) write_update(w, u);
}

}  // namespace

void write_weights(ByteWriter& w, const ModelWeights& weights) {
  w.u32(static_cast<std::uint32_t>(weights.values.size()));
  for (double v : weights.values) w.f64(v);
}

ModelWeights read_weights(ByteReader& r) {
  ModelWeights out;
  out.values.resize(read_len(r));
  for (auto& v : out.values) v = r.f64();
  return out;
}

void write_summary(ByteWriter& w, const DataSummary& summary) {
  w.u32(static_cast<std::uint32_t>(summary.per_feature.size()));
  for (const auto& fit : summary.per_feature) {
    w.u32(static_cast<std::uint32_t>(fit.components.size()));
    for (const auto& c : fit.components) {
      w.f64(c.weight);
      w.f64(c.mean);
      w.f64(c.variance);
    }
    w.u64(fit.count);
  }
  w.u64(summary.count);
}

DataSummary read_summary(ByteReader& r) {
  DataSummary s;
  s.per_feature.resize(read_len(r));
  for (auto& fit : s.per_feature) {
    fit.components.resize(read_len(r));
    for (auto& c : fit.components) {
      c.weight = r.f64();
      c.mean = r.f64();
      c.variance = r.f64();
    }
    fit.count = r.u64();
  }
  s.count = r.u64();
  return s;
}

void write_update(ByteWriter& w, const Update& u) {
  w.u8(kTagUpdate);
  w.u8(kFormatVersion);
  w.u32(u.sender.value);
  w.u64(u.height);
  write_weights(w, u.weights);
  write_summary(w, u.summary);
  w.blob(u.signature);
}

Update read_update(ByteReader& r) {
  expect_header(r, kTagUpdate);
  Update u;
  u.sender.value = r.u32();
  u.height = r.u64();
  u.weights = read_weights(r);
  u.summary = read_summary(r);
  u.signature = r.blob();
  return u;
}

void write_certificate(ByteWriter& w, const LockCertificate& cert) {
  w.u64(cert.epoch_height);
  write_digest(w, cert.proposal_digest);
  w.u32(static_cast<std::uint32_t>(cert.votes.size()));
  for (const auto& v : cert.votes) {
    w.u32(v.voter.value);
    w.blob(v.signature);
  }
}

LockCertificate read_certificate(ByteReader& r) {
  LockCertificate c;
  c.epoch_height = r.u64();
  c.proposal_digest = read_digest(r);
  c.votes.resize(read_len(r));
  for (auto& v : c.votes) {
    v.voter.value = r.u32();
    v.signature = r.blob();
  }
  return c;
}

void write_allocation(ByteWriter& w, const RewardAllocation& a) {
  w.u64(a.epoch_height);
  write_rational(w, a.pool);
  write_rational(w, a.forfeited_total);
  w.u32(static_cast<std::uint32_t>(a.entries.size()));
  for (const auto& e : a.entries) {
    w.u32(e.node.value);
    w.f64(e.share);
    write_rational(w, e.share_exact);
    write_rational(w, e.reward);
    w.u8(e.forfeited ? 1 : 0);
  }
}

RewardAllocation read_allocation(ByteReader& r) {
  RewardAllocation a;
  a.epoch_height = r.u64();
  a.pool = read_rational(r);
  a.forfeited_total = read_rational(r);
  a.entries.resize(read_len(r));
  for (auto& e : a.entries) {
    e.node.value = r.u32();
    e.share = r.f64();
    e.share_exact = read_rational(r);
    e.reward = read_rational(r);
    const auto flag = r.u8();
    if (flag > 1) throw EncodingError("bad boolean");
    e.forfeited = flag == 1;
  }
  return a;
}

Bytes canonical_serialize(const Update& u) {
  ByteWriter w;
  write_update(w, u);
  return std::move(w).take();
}

Bytes block_content_bytes(const Block& b) {
  ByteWriter w;
  write_block_content(w, b);
  return std::move(w).take();
}

Bytes canonical_serialize(const Block& b) {
  ByteWriter w;
  write_block_content(w, b);
  write_digest(w, b.digest);
  return std::move(w).take();
}

Bytes canonical_serialize(const Epoch& e) {
  ByteWriter w;
  w.u8(kTagEpoch);
  w.u8(kFormatVersion);
  w.u64(e.epoch_height);
  w.u64(e.first_height);
  w.u64(e.last_height);
  w.u64(e.proposed_at);
  w.u8(e.locked ? 1 : 0);
  w.u8(e.certificate ? 1 : 0);
  if (e.certificate) write_certificate(w, *e.certificate);
  w.u8(e.final_weights ? 1 : 0);
  if (e.final_weights) write_weights(w, *e.final_weights);
  w.u8(e.settlement ? 1 : 0);
  if (e.settlement) write_allocation(w, *e.settlement);
  return std::move(w).take();
}

Update decode_update(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto u = read_update(r);
  r.expect_done();
  return u;
}

Block decode_block(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  expect_header(r, kTagBlock);
  Block b;
  b.height = r.u64();
  b.parent_digest = read_digest(r);
  b.proposer.value = r.u32();
  b.merge_list.resize(read_len(r));
  for (auto& id : b.merge_list) id.value = r.u32();
  b.updates.resize(read_len(r));
  for (auto& u : b.updates) u = read_update(r);
  b.digest = read_digest(r);
  r.expect_done();
  return b;
}

Epoch decode_epoch(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  expect_header(r, kTagEpoch);
  Epoch e;
  e.epoch_height = r.u64();
  e.first_height = r.u64();
  e.last_height = r.u64();
  e.proposed_at = r.u64();
  auto flag = [&r] {
    const auto f = r.u8();
    if (f > 1) throw EncodingError("bad boolean");
    return f == 1;
  };
  e.locked = flag();
  if (flag()) e.certificate = read_certificate(r);
  if (flag()) e.final_weights = read_weights(r);
  if (flag()) e.settlement = read_allocation(r);
  r.expect_done();
  return e;
}

Bytes update_signing_payload(const Update& u) {
  ByteWriter w;
  w.u8(kTagSignPayload);
  w.u8(kFormatVersion);
  write_weights(w, u.weights);
  write_summary(w, u.summary);
  w.u64(u.height);
  return std::move(w).take();
}

}  // namespace pod
