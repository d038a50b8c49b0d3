// Canonical byte encoding of chain objects. Layout is documented in
// docs/serialization.md; block digests and golden vectors depend on it.
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pod/types.hpp"

namespace pod {

class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Appends fixed-width little-endian fields to a byte buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);  // throws EncodingError on non-finite input
  void raw(std::span<const std::uint8_t> bytes);
  void blob(std::span<const std::uint8_t> bytes);  // u32 length prefix
  void str(std::string_view s);

  const Bytes& bytes() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void raw(std::span<std::uint8_t> out);
  Bytes blob();
  std::string str();

  bool done() const { return pos_ == in_.size(); }
  void expect_done() const;

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

// Object tags, first byte of every top-level encoding.
inline constexpr std::uint8_t kTagUpdate = 0x55;       // 'U'
inline constexpr std::uint8_t kTagBlock = 0x42;        // 'B'
inline constexpr std::uint8_t kTagEpoch = 0x45;        // 'E'
inline constexpr std::uint8_t kTagSignPayload = 0x53;  // 'S'
inline constexpr std::uint8_t kFormatVersion = 1;

void write_weights(ByteWriter& w, const ModelWeights& weights);
ModelWeights read_weights(ByteReader& r);
void write_summary(ByteWriter& w, const DataSummary& summary);
DataSummary read_summary(ByteReader& r);
void write_update(ByteWriter& w, const Update& u);
Update read_update(ByteReader& r);
void write_certificate(ByteWriter& w, const LockCertificate& cert);
LockCertificate read_certificate(ByteReader& r);
void write_allocation(ByteWriter& w, const RewardAllocation& alloc);
RewardAllocation read_allocation(ByteReader& r);

Bytes canonical_serialize(const Update& u);
Bytes canonical_serialize(const Block& b);
Bytes canonical_serialize(const Epoch& e);

Update decode_update(std::span<const std::uint8_t> bytes);
Block decode_block(std::span<const std::uint8_t> bytes);
Epoch decode_epoch(std::span<const std::uint8_t> bytes);

/// Bytes covered by an update's signature: (weights, summary, height).
Bytes update_signing_payload(const Update& u);

/// Header and body of a block, i.e. everything except the digest.
Bytes block_content_bytes(const Block& b);

}  // namespace pod
