// Fixture builders shared by the unit tests.
#pragma once

#include <vector>

#include "pod/chain.hpp"
#include "pod/crypto.hpp"
#include "pod/rng.hpp"
#include "pod/trainer.hpp"
#include "pod/types.hpp"

namespace podtest {

inline pod::DataSummary random_summary(pod::Rng& rng, std::size_t q) {
  pod::DataSummary s;
  s.count = rng.below(500);
  for (std::size_t k = 0; k < q; ++k) {
    pod::GaussianFit fit;
    const auto comps = 1 + rng.below(3);
    double left = 1.0;
    for (std::uint64_t c = 0; c < comps; ++c) {
      const double w = c + 1 == comps ? left : left * rng.uniform();
      left -= w;
      fit.components.push_back({w, rng.normal(0.0, 5.0), 0.1 + rng.uniform()});
    }
    fit.count = s.count;
    s.per_feature.push_back(fit);
  }
  return s;
}

inline pod::Update random_update(pod::Rng& rng, std::uint32_t sender, std::uint64_t height,
                                 std::size_t dim) {
  pod::Update u;
  for (std::size_t i = 0; i < dim; ++i) u.weights.values.push_back(rng.normal());
  u.sender = pod::NodeId{sender};
  u.summary = random_summary(rng, dim);
  u.height = height;
  const auto sig_len = rng.below(80);
  for (std::uint64_t i = 0; i < sig_len; ++i) {
    u.signature.push_back(static_cast<std::uint8_t>(rng.below(256)));
  }
  return u;
}

inline pod::Block random_block(pod::Rng& rng) {
  const auto height = rng.below(1000);
  const auto dim = 1 + rng.below(6);
  std::vector<pod::Update> ups;
  const auto k = 1 + rng.below(6);
  for (std::uint64_t i = 0; i < k; ++i) {
    ups.push_back(random_update(rng, static_cast<std::uint32_t>(rng.below(20)), height, dim));
  }
  pod::Digest parent;
  for (auto& b : parent.bytes) b = static_cast<std::uint8_t>(rng.below(256));
  return pod::make_block(height, parent, pod::NodeId{static_cast<std::uint32_t>(rng.below(20))},
                         std::move(ups));
}

/// A small signed world: n nodes with keys in one directory.
struct SignedNodes {
  pod::MacSignatureScheme scheme;
  pod::KeyDirectory dir;
  std::vector<pod::KeyPair> keys;

  explicit SignedNodes(std::uint32_t n) {
    for (std::uint32_t i = 0; i < n; ++i) {
      keys.push_back(scheme.keygen(1000 + i));
      dir.add(pod::NodeId{i}, keys.back().public_key);
    }
  }

  pod::Update signed_update(std::uint32_t sender, std::uint64_t height,
                            std::vector<double> w, std::uint64_t count = 10) {
    pod::Update u;
    u.weights.values = std::move(w);
    u.sender = pod::NodeId{sender};
    u.height = height;
    u.summary.count = count;
    pod::GaussianFit fit;
    fit.components.push_back({1.0, 0.0, 1.0});
    fit.count = count;
    u.summary.per_feature.assign(u.weights.size(), fit);
    pod::sign_update(u, scheme, keys[sender].secret_key);
    return u;
  }
};

inline pod::Dataset make_dataset(std::vector<std::vector<double>> xs, std::vector<double> ys,
                                 std::uint32_t owner = 0) {
  pod::Dataset d;
  d.owner = pod::NodeId{owner};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d.rows.push_back({std::move(xs[i]), ys[i], i});
  }
  return d;
}

}  // namespace podtest
