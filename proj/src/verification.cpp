#include "pod/verification.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <stdexcept>

#include "pod/contribution.hpp"
#include "pod/crypto.hpp"
#include "pod/serialize.hpp"

namespace pod {

namespace {

// Full share vectors are recorded for this many challenges; commitments for all.
constexpr int kRecordedShareChallenges = 1;

std::uint64_t pow_mod(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  b %= m;
  while (e) {
    if (e & 1) r = mul_mod(r, b, m);
    b = mul_mod(b, b, m);
    e >>= 1;
  }
  return r;
}

}  // namespace

std::uint64_t add_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  const std::uint64_t s = a + b;
  return (s >= m || s < a) ? s - m : s;
}

std::uint64_t sub_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return a >= b ? a - b : a + (m - b);
}

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  const auto p = static_cast<unsigned __int128>(a) * b;
  if (m == kDefaultModulus) {
    // Mersenne reduction: 2^61 == 1 (mod m).
    std::uint64_t r = (static_cast<std::uint64_t>(p) & m) + static_cast<std::uint64_t>(p >> 61);
    r = (r & m) + (r >> 61);
    return r >= m ? r - m : r;
  }
  return static_cast<std::uint64_t>(p % m);
}

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  // Deterministic for all 64-bit n with these bases.
  for (std::uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    std::uint64_t x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

void validate(const FieldParams& p) {
  if (!is_prime(p.modulus)) {
    throw std::invalid_argument("field modulus " + std::to_string(p.modulus) + " is not prime");
  }
  if (p.challenges < 1) throw std::invalid_argument("challenge count must be >= 1");
}

std::uint64_t encode_fixed(double x, std::uint64_t phi) {
  if (!std::isfinite(x)) throw std::invalid_argument("encode_fixed: non-finite value");
  const double scaled = std::round(x * kFixedPointScale);
  if (std::abs(scaled) >= static_cast<double>(phi / 2)) {
    throw std::out_of_range("encode_fixed: value exceeds field range");
  }
  const auto mag = static_cast<std::uint64_t>(std::abs(scaled));
  return scaled < 0 ? (mag == 0 ? 0 : phi - mag) : mag;
}

double decode_fixed(std::uint64_t e, std::uint64_t phi) {
  if (e > phi / 2) return -static_cast<double>(phi - e) / kFixedPointScale;
  return static_cast<double>(e) / kFixedPointScale;
}

SecretShares split_secret_with(std::uint64_t datum, std::uint64_t u, std::uint64_t phi,
                               std::size_t index) {
  if (datum >= phi) throw std::out_of_range("split_secret: datum outside the field");
  if (u >= phi) throw std::out_of_range("split_secret: share outside the field");
  return {u, sub_mod(datum, u, phi), index};
}

SecretShares split_secret(std::uint64_t datum, std::uint64_t phi, Rng& rng, std::size_t index) {
  if (datum >= phi) throw std::out_of_range("split_secret: datum outside the field");
  return split_secret_with(datum, rng.below(phi), phi, index);
}

ShareVectors split_vector(std::span<const std::uint64_t> data, std::uint64_t phi, Rng& rng) {
  ShareVectors s;
  s.u.reserve(data.size());
  s.v.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto sh = split_secret(data[i], phi, rng, i);
    s.u.push_back(sh.u);
    s.v.push_back(sh.v);
  }
  return s;
}

std::uint64_t inner_product(std::span<const std::uint64_t> c, std::span<const std::uint64_t> x,
                            std::uint64_t phi) {
  if (c.size() != x.size()) throw std::invalid_argument("inner_product: length mismatch");
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < c.size(); ++i) acc = add_mod(acc, mul_mod(c[i], x[i], phi), phi);
  return acc;
}

std::uint64_t delta_product(std::span<const std::uint64_t> c, std::span<const std::uint64_t> x,
                            std::span<const std::uint64_t> x0, std::uint64_t phi) {
  if (c.size() != x.size() || x.size() != x0.size()) {
    throw std::invalid_argument("delta_product: length mismatch");
  }
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    acc = add_mod(acc, mul_mod(c[i], sub_mod(x[i], x0[i], phi), phi), phi);
  }
  return acc;
}

std::vector<std::vector<std::uint64_t>> make_challenges(std::size_t length, int count,
                                                        std::uint64_t phi, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::uint64_t>> out(static_cast<std::size_t>(std::max(count, 0)));
  for (auto& c : out) {
    c.resize(length);
    for (auto& x : c) x = 1 + rng.below(phi - 1);
  }
  return out;
}

namespace {

Digest commitment_tag(std::span<const std::uint64_t> c, std::uint64_t X, std::uint64_t Y) {
  ByteWriter w;
  w.u8('Z');
  w.u64(c.size());
  w.u64(X);
  w.u64(Y);
  return content_hash(w.bytes());
}

}  // namespace

Commitment commit(std::span<const std::uint64_t> u, std::span<const std::uint64_t> v,
                  std::span<const std::uint64_t> u0, std::span<const std::uint64_t> v0,
                  std::span<const std::uint64_t> c, std::uint64_t phi) {
  Commitment cm;
  cm.X = inner_product(c, u, phi);
  cm.Y = inner_product(c, v, phi);
  cm.S = delta_product(c, u, u0, phi);
  cm.B = delta_product(c, v, v0, phi);
  cm.Z = commitment_tag(c, cm.X, cm.Y);
  return cm;
}

std::string to_string(PairCheck check) {
  switch (check) {
    case PairCheck::server_peer: return "server_peer";
    case PairCheck::user_server: return "user_server";
    case PairCheck::user_peer: return "user_peer";
  }
  return "unknown";
}

bool pair_consist_check(const PartyView& a, const PartyView& b,
                        std::span<const std::uint64_t> c, std::uint64_t phi,
                        PairCheck which) {
  auto own_delta = [&](const PartyView& p) -> std::optional<std::uint64_t> {
    if (p.share.size() != c.size() || p.registered.size() != c.size()) return std::nullopt;
    return delta_product(c, p.share, p.registered, phi);
  };
  if (which == PairCheck::server_peer) {
    if (!a.tag || !b.tag || *a.tag != *b.tag) return false;
    const auto da = own_delta(a);
    const auto db = own_delta(b);
    if (!da || !db) return false;
    return add_mod(*da, *db, phi) == 0;
  }
  // Holder claims (a) against the receiving party's own view (b).
  if (!a.linear || !a.delta || !a.tag || !b.tag || *a.tag != *b.tag) return false;
  if (b.share.size() != c.size()) return false;
  const auto d = own_delta(b);
  if (!d) return false;
  return inner_product(c, b.share, phi) == *a.linear && *d == *a.delta;
}

Registration register_shares(std::span<const std::uint64_t> data, std::uint64_t phi, Rng& rng) {
  auto s = split_vector(data, phi, rng);
  return {std::move(s.u), std::move(s.v)};
}

ConsistencyResult consistency_check(std::span<const std::uint64_t> data,
                                    const Registration& reg,
                                    const std::vector<std::vector<std::uint64_t>>& challenges,
                                    std::uint64_t phi, Rng& rng, const ShareTamper& tamper,
                                    Transcript* transcript) {
  ConsistencyResult result;
  for (std::size_t k = 0; k < challenges.size(); ++k) {
    const auto& c = challenges[k];
    auto fresh = split_vector(data, phi, rng);
    const auto cm = commit(fresh.u, fresh.v, reg.u0, reg.v0, c, phi);
    if (tamper) tamper(static_cast<int>(k), fresh);

    const PartyView holder_to_server{{}, {}, cm.X, cm.S, cm.Z};
    const PartyView holder_to_peer{{}, {}, cm.Y, cm.B, cm.Z};
    const PartyView server{reg.u0, fresh.u, cm.X, cm.S, cm.Z};
    const PartyView peer{reg.v0, fresh.v, cm.Y, cm.B, cm.Z};

    if (transcript) {
      TranscriptRecord to_server{"holder", "server", "commitment_server", -1,
                                 static_cast<std::int64_t>(k), {cm.X, cm.S}, {cm.Z.hex()},
                                 std::nullopt, std::nullopt};
      if (static_cast<int>(k) < kRecordedShareChallenges) to_server.elements.insert(
          to_server.elements.end(), fresh.u.begin(), fresh.u.end());
      transcript->add(std::move(to_server));
      transcript->add({"holder", "peer", "commitment_peer", -1, static_cast<std::int64_t>(k),
                       {cm.Y, cm.B}, {cm.Z.hex()}, std::nullopt, std::nullopt});
    }

    ++result.challenges_run;
    std::optional<PairCheck> failed;
    if (!pair_consist_check(server, peer, c, phi, PairCheck::server_peer)) {
      failed = PairCheck::server_peer;
    } else if (!pair_consist_check(holder_to_server, server, c, phi, PairCheck::user_server)) {
      failed = PairCheck::user_server;
    } else if (!pair_consist_check(holder_to_peer, peer, c, phi, PairCheck::user_peer)) {
      failed = PairCheck::user_peer;
    }
    if (transcript) {
      transcript->add({"server", "holder", "challenge_verdict", -1, static_cast<std::int64_t>(k),
                       {}, {}, std::nullopt, !failed.has_value()});
    }
    if (failed) {
      result.pass = false;
      result.failed_challenge = static_cast<int>(k);
      result.failed_check = failed;
      break;
    }
  }
  return result;
}

std::uint64_t additive_summation(std::uint64_t s, std::uint64_t acc, std::uint64_t phi) {
  return add_mod(acc % phi, s, phi);
}

std::uint64_t data_summation(std::span<const std::uint64_t> U, std::span<const std::uint64_t> V,
                             std::uint64_t phi, std::uint64_t acc, const SummationFn& F) {
  if (U.size() != V.size()) throw std::invalid_argument("data_summation: length mismatch");
  std::uint64_t mu = 0;
  std::uint64_t nu = 0;
  for (auto u : U) mu = add_mod(mu, u % phi, phi);
  for (auto v : V) nu = add_mod(nu, v % phi, phi);
  return F(add_mod(mu, nu, phi), acc, phi);
}

Digest line_hash(char axis, std::size_t index, std::span<const std::uint64_t> values) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(axis));
  w.u64(index);
  w.u64(values.size());
  for (auto v : values) w.u64(v);
  return content_hash(w.bytes());
}

RecordingMatrix build_recording_matrix(std::span<const std::uint64_t> v) {
  if (v.empty()) throw std::invalid_argument("recording matrix needs at least one value");
  RecordingMatrix m;
  m.count = v.size();
  m.side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(v.size()))));
  while (m.side * m.side < v.size()) ++m.side;
  while (m.side > 1 && (m.side - 1) * (m.side - 1) >= v.size()) --m.side;
  m.entries.assign(m.side * m.side, 0);
  std::copy(v.begin(), v.end(), m.entries.begin());
  std::vector<std::uint64_t> line(m.side);
  for (std::size_t r = 0; r < m.side; ++r) {
    for (std::size_t c = 0; c < m.side; ++c) line[c] = m.at(r, c);
    m.row_hashes.push_back(line_hash('R', r, line));
  }
  for (std::size_t c = 0; c < m.side; ++c) {
    for (std::size_t r = 0; r < m.side; ++r) line[r] = m.at(r, c);
    m.col_hashes.push_back(line_hash('C', c, line));
  }
  return m;
}

FiledHashes file_hashes(const RecordingMatrix& m) {
  return {m.side, m.count, m.row_hashes, m.col_hashes};
}

Opening open_entry(const RecordingMatrix& m, std::size_t index) {
  if (index >= m.count) throw std::out_of_range("open_entry: index beyond matrix");
  Opening o;
  o.index = index;
  const auto r = index / m.side;
  const auto c = index % m.side;
  for (std::size_t k = 0; k < m.side; ++k) {
    o.row.push_back(m.at(r, k));
    o.column.push_back(m.at(k, c));
  }
  return o;
}

std::optional<std::uint64_t> check_opening(const FiledHashes& filed, const Opening& o) {
  if (o.index >= filed.count || filed.side == 0) return std::nullopt;
  if (o.row.size() != filed.side || o.column.size() != filed.side) return std::nullopt;
  const auto r = o.index / filed.side;
  const auto c = o.index % filed.side;
  if (line_hash('R', r, o.row) != filed.row_hashes[r]) return std::nullopt;
  if (line_hash('C', c, o.column) != filed.col_hashes[c]) return std::nullopt;
  if (o.row[c] != o.column[r]) return std::nullopt;
  return o.row[c];
}

HolderClaim honest_claim(const Dataset& d, const DataSummary& summary) {
  HolderClaim claim;
  claim.count = d.size();
  for (std::size_t k = 0; k < summary.feature_count(); ++k) {
    DistributionClaim fc;
    fc.fit = summary.per_feature[k];
    const auto col = d.column(k);
    if (!col.empty()) {
      const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
      fc.min = *lo;
      fc.max = *hi;
    }
    claim.features.push_back(std::move(fc));
  }
  return claim;
}

IntervalMoments interval_moments(const GaussianFit& fit, double lo, double hi) {
  IntervalMoments m;
  double first = 0.0;
  for (const auto& c : fit.components) {
    const double sd = std::sqrt(c.variance);
    const double a = (lo - c.mean) / sd;
    const double b = (hi - c.mean) / sd;
    const double p = normal_cdf(b) - normal_cdf(a);
    m.mass += c.weight * p;
    first += c.weight * (c.mean * p + sd * (normal_pdf(a) - normal_pdf(b)));
  }
  m.mean = m.mass > 1e-300 ? first / m.mass : 0.5 * (lo + hi);
  m.mean = std::clamp(m.mean, lo, hi);
  return m;
}

std::vector<std::uint64_t> encode_dataset(const Dataset& d, std::uint64_t phi) {
  const auto q = d.feature_count();
  const auto rows = d.size();
  std::vector<std::uint64_t> out(q * rows);
  for (std::size_t k = 0; k < q; ++k) {
    for (std::size_t i = 0; i < rows; ++i) out[k * rows + i] = encode_fixed(d.rows[i].features[k], phi);
  }
  return out;
}

bool verify_distribution(const HolderClaim& claim, std::span<const std::uint64_t> data,
                         std::size_t rows, const Registration& reg,
                         const RecordingMatrix& matrix, const FiledHashes& filed,
                         const VerificationParams& params, Rng& server_rng,
                         VerificationReport& report, const HolderFaults& faults) {
  const auto phi = params.field.modulus;
  const auto& dp = params.distribution;
  auto fail = [&](std::string why) {
    report.distribution_pass = false;
    if (report.failure.empty()) report.failure = std::move(why);
    return false;
  };
  if (dp.intervals < 2) throw std::invalid_argument("distribution check needs >= 2 intervals");
  if (rows == 0) return true;
  if (claim.features.size() * rows != data.size()) return fail("claim does not cover the data");
  if (claim.count != rows) return fail("claimed count differs from registered data");

  std::map<std::size_t, std::vector<std::uint64_t>> seen_rows;
  std::map<std::size_t, std::vector<std::uint64_t>> seen_cols;
  for (std::size_t f = 0; f < claim.features.size(); ++f) {
    const auto& fc = claim.features[f];
    if (!fc.fit.valid()) return fail("invalid claimed mixture for feature " + std::to_string(f));
    if (!(std::isfinite(fc.min) && std::isfinite(fc.max)) || fc.max < fc.min) {
      return fail("invalid claimed range for feature " + std::to_string(f));
    }
    if (fc.max == fc.min) continue;  // constant feature: nothing to slice
    const double width = (fc.max - fc.min) / dp.intervals;
    const double sigma = std::sqrt(fc.fit.variance());
    const auto range = interval_moments(fc.fit, fc.min, fc.max);

    // Holder side: which of its values fall in each interval.
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(dp.intervals));
    for (std::size_t i = 0; i < rows; ++i) {
      const double x = decode_fixed(data[f * rows + i], phi);
      // Fixed-point encoding moves values by up to half a unit.
      const double slack = 1.0 / kFixedPointScale;
      if (x < fc.min - slack || x > fc.max + slack) continue;
      auto j = static_cast<std::size_t>(std::floor(std::max(0.0, x - fc.min) / width));
      j = std::min(j, members.size() - 1);
      members[j].push_back(f * rows + i);
    }
    // The claimed range must cover every claimed row.
    std::size_t covered = 0;
    for (const auto& m : members) covered += m.size();
    if (covered != rows) {
      report.transcript.add({"holder", "server", "range_population", static_cast<std::int64_t>(f), -1,
                             {}, {}, static_cast<double>(covered), false});
      return fail("feature " + std::to_string(f) + " claimed range covers " +
                  std::to_string(covered) + " of " + std::to_string(rows) + " values");
    }

    for (int j = 0; j < dp.intervals; ++j) {
      const double lo = fc.min + j * width;
      const double hi = j + 1 == dp.intervals ? fc.max : lo + width;
      const auto mom = interval_moments(fc.fit, lo, hi);
      IntervalResult ir;
      ir.feature = static_cast<int>(f);
      ir.interval = j;
      ir.population = members[static_cast<std::size_t>(j)].size();
      ir.expected_count =
          range.mass > 0 ? static_cast<double>(claim.count) * mom.mass / range.mass : 0.0;
      ir.expected_mean = mom.mean;
      report.transcript.add({"holder", "server", "interval_population", static_cast<std::int64_t>(f), j,
                             {}, {}, static_cast<double>(ir.population), std::nullopt});
      if (ir.population < 2) {
        ir.pass = ir.expected_count < dp.min_expected;
        report.intervals.push_back(ir);
        if (!ir.pass) {
          return fail("feature " + std::to_string(f) + " interval " + std::to_string(j) +
                      " holds " + std::to_string(ir.population) + " values where the claim expects " +
                      std::to_string(ir.expected_count));
        }
        continue;
      }
      // Server picks the sample.
      auto pool = members[static_cast<std::size_t>(j)];
      ir.sampled = std::min(dp.max_samples, pool.size());
      for (std::size_t s = 0; s < ir.sampled; ++s) {
        const auto pick = s + server_rng.below(pool.size() - s);
        std::swap(pool[s], pool[pick]);
      }
      pool.resize(ir.sampled);
      std::sort(pool.begin(), pool.end());

      // Peer validates openings and sums v; server sums its u-shares.
      std::vector<std::uint64_t> U;
      std::vector<std::uint64_t> V;
      for (auto idx : pool) {
        auto o = open_entry(matrix, idx);
        if (faults.opening_tamper) faults.opening_tamper(static_cast<int>(f), j, o);
        // Lines already matched against the filed hashes need not be rehashed.
        std::optional<std::uint64_t> v;
        const auto r = idx / filed.side;
        const auto c = idx % filed.side;
        const auto vr = seen_rows.find(r);
        const auto vc = seen_cols.find(c);
        if (o.index == idx && vr != seen_rows.end() && vc != seen_cols.end() &&
            vr->second == o.row && vc->second == o.column && o.row[c] == o.column[r]) {
          v = o.row[c];
        } else {
          v = check_opening(filed, o);
          if (v) {
            seen_rows[r] = o.row;
            seen_cols[c] = o.column;
          }
        }
        if (!v || o.index != idx) {
          ir.pass = false;
          report.intervals.push_back(ir);
          report.transcript.add({"peer", "server", "opening_rejected", static_cast<std::int64_t>(f), j,
                                 {}, {filed.row_hashes[(idx / filed.side)].hex()}, std::nullopt, false});
          return fail("opening of index " + std::to_string(idx) +
                      " does not match the filed row/column hashes");
        }
        U.push_back(reg.u0[idx]);
        V.push_back(*v);
      }
      std::uint64_t mu = 0;
      for (auto u : U) mu = add_mod(mu, u, phi);
      std::uint64_t nu = 0;
      for (auto v : V) nu = add_mod(nu, v, phi);
      report.transcript.add({"peer", "server", "interval_v_sum", static_cast<std::int64_t>(f), j, {nu},
                             {}, std::nullopt, std::nullopt});
      const auto s = data_summation(U, V, phi, 0);
      ir.observed_mean = decode_fixed(s, phi) / static_cast<double>(ir.sampled);
      ir.epsilon = dp.z * sigma / std::sqrt(static_cast<double>(ir.sampled));
      ir.pass = std::abs(ir.observed_mean - ir.expected_mean) <= ir.epsilon;
      report.transcript.add({"server", "holder", "interval_mean", static_cast<std::int64_t>(f), j, {},
                             {}, ir.observed_mean, ir.pass});
      report.intervals.push_back(ir);
      if (!ir.pass) {
        return fail("feature " + std::to_string(f) + " interval " + std::to_string(j) +
                    " mean " + std::to_string(ir.observed_mean) + " vs claimed " +
                    std::to_string(ir.expected_mean));
      }
    }
  }
  return true;
}

VerificationReport verify_holder(const Dataset& data, const HolderClaim& claim,
                                 const VerificationParams& params, std::uint64_t seed,
                                 const HolderFaults& faults) {
  const auto phi = params.field.modulus;
  VerificationReport report;
  auto registered = encode_dataset(data, phi);
  if (registered.empty()) return report;

  Rng holder_rng(derive_seed(seed, {1}));
  Rng server_rng(derive_seed(seed, {2}));
  const auto reg = register_shares(registered, phi, holder_rng);
  const auto matrix = build_recording_matrix(reg.v0);
  const auto filed = file_hashes(matrix);
  {
    TranscriptRecord r{"holder", "server", "registration", -1, -1, reg.u0, {}, std::nullopt,
                       std::nullopt};
    for (const auto& h : filed.row_hashes) r.hashes.push_back(h.hex());
    for (const auto& h : filed.col_hashes) r.hashes.push_back(h.hex());
    report.transcript.add(std::move(r));
  }

  auto current = registered;
  if (faults.forged_datum) current.at(faults.forged_datum->first) = faults.forged_datum->second;
  const auto challenges =
      make_challenges(current.size(), params.field.challenges, phi, derive_seed(seed, {3}));
  report.consistency = consistency_check(current, reg, challenges, phi, holder_rng,
                                         faults.consistency_tamper, &report.transcript);
  if (!report.consistency.pass) {
    report.failure = "consistency check failed at challenge " +
                     std::to_string(*report.consistency.failed_challenge) + " (" +
                     to_string(*report.consistency.failed_check) + ")";
    return report;
  }
  verify_distribution(claim, current, data.size(), reg, matrix, filed, params, server_rng, report,
                      faults);
  report.transcript.add({"server", "holder", "verdict", -1, -1, {}, {}, std::nullopt, report.pass()});
  return report;
}

std::vector<std::string> scan_transcript(const Transcript& t,
                                         std::span<const std::uint64_t> encoded_data,
                                         std::uint64_t phi) {
  static const std::set<std::string> aggregates{"interval_v_sum", "interval_mean",
                                                "interval_population"};
  const std::set<std::uint64_t> raw(encoded_data.begin(), encoded_data.end());
  std::set<double> raw_values;
  for (auto e : encoded_data) raw_values.insert(decode_fixed(e, phi));
  std::vector<std::string> violations;
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const auto& r = t.records[i];
    if (r.from != "server" && r.to != "server") continue;
    if (aggregates.count(r.kind)) continue;
    for (auto e : r.elements) {
      if (raw.count(e)) {
        violations.push_back("record " + std::to_string(i) + " (" + r.kind + ") carries raw datum " +
                             std::to_string(e));
      }
    }
    if (r.value && raw_values.count(*r.value)) {
      violations.push_back("record " + std::to_string(i) + " (" + r.kind + ") carries raw value");
    }
  }
  return violations;
}

void Transcript::write_jsonl(std::ostream& out) const {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["from"] = r.from;
    j["to"] = r.to;
    j["kind"] = r.kind;
    if (r.feature >= 0) j["feature"] = r.feature;
    if (r.item >= 0) j["item"] = r.item;
    if (!r.elements.empty()) j["elements"] = r.elements;
    if (!r.hashes.empty()) j["hashes"] = r.hashes;
    if (r.value) j["value"] = *r.value;
    if (r.pass) j["pass"] = *r.pass;
    out << j.dump() << '\n';
  }
}

Transcript Transcript::read_jsonl(std::istream& in) {
  Transcript t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TranscriptRecord r;
    r.from = j.at("from").get<std::string>();
    r.to = j.at("to").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.feature = j.value("feature", std::int64_t{-1});
    r.item = j.value("item", std::int64_t{-1});
    if (j.contains("elements")) r.elements = j["elements"].get<std::vector<std::uint64_t>>();
    if (j.contains("hashes")) r.hashes = j["hashes"].get<std::vector<std::string>>();
    if (j.contains("value")) r.value = j["value"].get<double>();
    if (j.contains("pass")) r.pass = j["pass"].get<bool>();
    t.add(std::move(r));
  }
  return t;
}

}  // namespace pod
