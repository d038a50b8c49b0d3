#include "pod/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace pod {

double next_threshold(const ThresholdSchedule& s, double tau, Tick latency) {
  if (!s.dynamic) return s.start;
  if (latency > s.latency_bound) return std::max(s.floor, tau - s.step);
  return tau;
}

std::size_t threshold_count(double tau, std::size_t active) {
  // Guard against 2/3 * 15 landing a hair above 10.
  const auto t = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(active) - 1e-9));
  return std::max<std::size_t>(1, t);
}

std::vector<NodeId> ProtocolParams::sharing_ids() const {
  std::vector<NodeId> out;
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(NodeId{i});
  return out;
}

std::vector<NodeId> ProtocolParams::committee() const {
  std::vector<NodeId> out;
  for (std::uint32_t i = 0; i < m; ++i) out.push_back(NodeId{n + i});
  return out;
}

bool EpochRules::is_active(NodeId id) const {
  return std::binary_search(active.begin(), active.end(), id);
}

EpochRules genesis_rules(const ProtocolParams& p) {
  EpochRules r;
  r.epoch = 1;
  r.active = p.sharing_ids();
  r.tau = p.tau.start;
  return r;
}

EpochRules advance_rules(const ProtocolParams& p, const EpochRules& current, const Epoch& locked) {
  EpochRules r;
  r.epoch = locked.epoch_height + 1;
  for (auto id : p.sharing_ids()) {
    bool forfeited = false;
    if (locked.settlement) {
      for (const auto& e : locked.settlement->entries) {
        if (e.node == id && e.forfeited) forfeited = true;
      }
    }
    if (!forfeited) r.active.push_back(id);
  }
  const Tick latency = locked.proposed_at >= current.previous_proposed_at
                           ? locked.proposed_at - current.previous_proposed_at
                           : 0;
  r.tau = next_threshold(p.tau, current.tau, latency);
  r.previous_proposed_at = locked.proposed_at;
  return r;
}

}  // namespace pod
