#include "pod/types.hpp"

#include <cmath>
#include <stdexcept>

namespace pod {

std::string to_string(NodeId id) { return "n" + std::to_string(id.value); }

std::string Digest::hex() const {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : bytes) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

Digest Digest::from_hex(const std::string& hex) {
  if (hex.size() != 64) throw std::invalid_argument("digest hex must be 64 chars");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit");
  };
  Digest d;
  for (std::size_t i = 0; i < 32; ++i) {
    d.bytes[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 |
                                           nibble(hex[2 * i + 1]));
  }
  return d;
}

bool ModelWeights::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool GaussianFit::valid() const {
  if (components.empty()) return false;
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.variance > 0.0) || c.weight < 0.0 || c.weight > 1.0) return false;
    total += c.weight;
  }
  return std::abs(total - 1.0) <= 1e-9;
}

double GaussianFit::mean() const {
  double m = 0.0;
  for (const auto& c : components) m += c.weight * c.mean;
  return m;
}

double GaussianFit::variance() const {
  const double mu = mean();
  double v = 0.0;
  for (const auto& c : components) {
    v += c.weight * (c.variance + (c.mean - mu) * (c.mean - mu));
  }
  return v;
}

Rational RewardAllocation::total_paid() const {
  Rational total = 0;
  for (const auto& e : entries) total += e.reward;
  return total;
}

}  // namespace pod
