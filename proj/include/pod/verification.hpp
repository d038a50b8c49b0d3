// Three-party data verification: consistency of secret-shared data under
// random challenges, share summation, a hash-bound recording matrix, and an
// interval test of a holder's claimed distribution.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pod/rng.hpp"
#include "pod/trainer.hpp"
#include "pod/types.hpp"

namespace pod {

inline constexpr std::uint64_t kDefaultModulus = (1ULL << 61) - 1;
inline constexpr double kFixedPointScale = 1e6;

struct FieldParams {
  std::uint64_t modulus = kDefaultModulus;
  int challenges = 50;
};

bool is_prime(std::uint64_t n);
/// Throws std::invalid_argument when the modulus is not prime or L < 1.
void validate(const FieldParams& p);

std::uint64_t add_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m);
std::uint64_t sub_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m);
std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m);

/// round(x * 1e6) reduced into [0, phi); negatives wrap to the upper half.
std::uint64_t encode_fixed(double x, std::uint64_t phi);
/// Inverse of encode_fixed for field elements representing |value| < phi/2.
double decode_fixed(std::uint64_t e, std::uint64_t phi);

struct SecretShares {
  std::uint64_t u = 0;
  std::uint64_t v = 0;
  std::size_t index = 0;
};

/// u uniform in [0, phi), v = (datum - u) mod phi. Throws when datum >= phi.
SecretShares split_secret(std::uint64_t datum, std::uint64_t phi, Rng& rng,
                          std::size_t index = 0);
/// Same split with a caller-chosen u.
SecretShares split_secret_with(std::uint64_t datum, std::uint64_t u, std::uint64_t phi,
                               std::size_t index = 0);

struct ShareVectors {
  std::vector<std::uint64_t> u;
  std::vector<std::uint64_t> v;
};

ShareVectors split_vector(std::span<const std::uint64_t> data, std::uint64_t phi, Rng& rng);

/// <c, x> mod phi.
std::uint64_t inner_product(std::span<const std::uint64_t> c,
                            std::span<const std::uint64_t> x, std::uint64_t phi);
/// <c, x - x0> mod phi.
std::uint64_t delta_product(std::span<const std::uint64_t> c,
                            std::span<const std::uint64_t> x,
                            std::span<const std::uint64_t> x0, std::uint64_t phi);

/// Challenge vectors with entries uniform in [1, phi).
std::vector<std::vector<std::uint64_t>> make_challenges(std::size_t length, int count,
                                                        std::uint64_t phi,
                                                        std::uint64_t seed);

/// Holder commitment for one challenge c over a fresh split (u, v) of data
/// registered as (u0, v0):
///   X = <c,u>, Y = <c,v>, S = <c,u-u0>, B = <c,v-v0>, Z = H(|c|, X, Y).
/// X, S, Z travel to the server with u; Y, B, Z travel to the peer with v.
struct Commitment {
  std::uint64_t X = 0;
  std::uint64_t Y = 0;
  std::uint64_t S = 0;
  std::uint64_t B = 0;
  Digest Z;

  friend bool operator==(const Commitment&, const Commitment&) = default;
};

Commitment commit(std::span<const std::uint64_t> u, std::span<const std::uint64_t> v,
                  std::span<const std::uint64_t> u0, std::span<const std::uint64_t> v0,
                  std::span<const std::uint64_t> c, std::uint64_t phi);

enum class PairCheck { server_peer, user_server, user_peer };

std::string to_string(PairCheck check);

/// What one party holds for one challenge. For the holder, only the claimed
/// components are set; server and peer also hold their shares.
struct PartyView {
  std::vector<std::uint64_t> registered;  // u0 (server) or v0 (peer)
  std::vector<std::uint64_t> share;       // fresh u (server) or v (peer)
  std::optional<std::uint64_t> linear;    // claimed X or Y
  std::optional<std::uint64_t> delta;     // claimed S or B
  std::optional<Digest> tag;              // Z
};

/// server_peer: a = server, b = peer. Each side recomputes its own delta from
/// its shares; the deltas must cancel and the tags must agree.
/// user_server / user_peer: a = the holder's claims as received, b = the
/// receiving party; the claimed X/S (or Y/B) must match b's recomputation.
/// Any missing component yields false.
bool pair_consist_check(const PartyView& a, const PartyView& b,
                        std::span<const std::uint64_t> c, std::uint64_t phi,
                        PairCheck which);

struct Registration {
  std::vector<std::uint64_t> u0;  // filed with the server
  std::vector<std::uint64_t> v0;  // filed with the privacy peer
};

Registration register_shares(std::span<const std::uint64_t> data, std::uint64_t phi, Rng& rng);

/// Record of one message as seen by the verification roles.
struct TranscriptRecord {
  std::string from;
  std::string to;
  std::string kind;
  std::int64_t feature = -1;
  std::int64_t item = -1;  // challenge or interval index
  std::vector<std::uint64_t> elements;
  std::vector<std::string> hashes;
  std::optional<double> value;
  std::optional<bool> pass;
};

struct Transcript {
  std::vector<TranscriptRecord> records;

  void add(TranscriptRecord r) { records.push_back(std::move(r)); }
  void write_jsonl(std::ostream& out) const;
  static Transcript read_jsonl(std::istream& in);
};

/// Hook that lets tests and adversaries alter the shares a holder sends
/// after committing (challenge index, shares about to be sent).
using ShareTamper = std::function<void(int, ShareVectors&)>;

struct ConsistencyResult {
  bool pass = true;
  int challenges_run = 0;
  std::optional<int> failed_challenge;
  std::optional<PairCheck> failed_check;
};

/// Runs every challenge in turn, stopping at the first failed pair check.
/// `data` is what the holder holds now; `reg` is what it filed earlier.
ConsistencyResult consistency_check(std::span<const std::uint64_t> data,
                                    const Registration& reg,
                                    const std::vector<std::vector<std::uint64_t>>& challenges,
                                    std::uint64_t phi, Rng& rng,
                                    const ShareTamper& tamper = {},
                                    Transcript* transcript = nullptr);

/// F(s, A); the default is (A + s) mod phi.
using SummationFn = std::function<std::uint64_t(std::uint64_t, std::uint64_t, std::uint64_t)>;
std::uint64_t additive_summation(std::uint64_t s, std::uint64_t acc, std::uint64_t phi);

/// mu = sum U, nu = sum V, s = mu + nu (all mod phi); returns F(s, acc).
std::uint64_t data_summation(std::span<const std::uint64_t> U, std::span<const std::uint64_t> V,
                             std::uint64_t phi, std::uint64_t acc,
                             const SummationFn& F = additive_summation);

/// ceil(sqrt(n)) square grid of v-shares, row-major, zero padded.
struct RecordingMatrix {
  std::size_t side = 0;
  std::size_t count = 0;
  std::vector<std::uint64_t> entries;
  std::vector<Digest> row_hashes;
  std::vector<Digest> col_hashes;

  std::uint64_t at(std::size_t row, std::size_t col) const { return entries[row * side + col]; }
};

RecordingMatrix build_recording_matrix(std::span<const std::uint64_t> v);

/// Hash of one row ('R') or column ('C') of the matrix.
Digest line_hash(char axis, std::size_t index, std::span<const std::uint64_t> values);

/// Hashes the server keeps after registration.
struct FiledHashes {
  std::size_t side = 0;
  std::size_t count = 0;
  std::vector<Digest> row_hashes;
  std::vector<Digest> col_hashes;
};

FiledHashes file_hashes(const RecordingMatrix& m);

/// Full row and column through one entry.
struct Opening {
  std::size_t index = 0;
  std::vector<std::uint64_t> row;
  std::vector<std::uint64_t> column;
};

Opening open_entry(const RecordingMatrix& m, std::size_t index);

/// The opened value when row and column both match the filed hashes and agree
/// at the crossing; nullopt otherwise.
std::optional<std::uint64_t> check_opening(const FiledHashes& filed, const Opening& o);

/// A holder's claim about one feature: its mixture and value range.
struct DistributionClaim {
  GaussianFit fit;
  double min = 0.0;
  double max = 0.0;
};

struct HolderClaim {
  std::vector<DistributionClaim> features;
  std::uint64_t count = 0;
};

/// Claim an honest holder makes: its summary plus the observed range.
HolderClaim honest_claim(const Dataset& d, const DataSummary& summary);

struct DistributionParams {
  int intervals = 16;
  std::size_t max_samples = 32;
  double z = 3.0;
  double min_expected = 10.0;  // expected population that forbids an empty interval
};

struct VerificationParams {
  FieldParams field;
  DistributionParams distribution;
};

/// Mean and mass of a mixture restricted to [lo, hi].
struct IntervalMoments {
  double mass = 0.0;
  double mean = 0.0;
};
IntervalMoments interval_moments(const GaussianFit& fit, double lo, double hi);

/// Tampering a holder may attempt. All empty for an honest holder.
struct HolderFaults {
  ShareTamper consistency_tamper;
  /// Applied to each opening before it is sent (feature, interval, opening).
  std::function<void(int, int, Opening&)> opening_tamper;
  /// Changes the data after registration: (index into the data vector, new value).
  std::optional<std::pair<std::size_t, std::uint64_t>> forged_datum;
};

struct IntervalResult {
  int feature = 0;
  int interval = 0;
  std::size_t population = 0;
  std::size_t sampled = 0;
  double expected_count = 0.0;
  double expected_mean = 0.0;
  double observed_mean = 0.0;
  double epsilon = 0.0;
  bool pass = true;
};

struct VerificationReport {
  ConsistencyResult consistency;
  bool distribution_pass = true;
  std::string failure;  // empty when passed
  std::vector<IntervalResult> intervals;
  Transcript transcript;

  bool pass() const { return consistency.pass && distribution_pass; }
};

/// Interval test of the claim against data that already passed the
/// consistency check. The holder reports interval membership; the server
/// samples members, the peer checks openings against the filed hashes and
/// returns the v-sum, and the server compares the reconstructed interval mean
/// with the claim within z * sigma_claim / sqrt(samples).
bool verify_distribution(const HolderClaim& claim, std::span<const std::uint64_t> data,
                         std::size_t rows, const Registration& reg,
                         const RecordingMatrix& matrix, const FiledHashes& filed,
                         const VerificationParams& params, Rng& server_rng,
                         VerificationReport& report, const HolderFaults& faults = {});

/// Feature-major fixed-point encoding of a dataset: index = feature * rows + row.
std::vector<std::uint64_t> encode_dataset(const Dataset& d, std::uint64_t phi);

/// End to end: registration, consistency check, distribution check.
VerificationReport verify_holder(const Dataset& data, const HolderClaim& claim,
                                 const VerificationParams& params, std::uint64_t seed,
                                 const HolderFaults& faults = {});

/// Records the server sends or receives, minus interval aggregates, must not
/// contain any raw encoded datum. Returns one message per violation.
std::vector<std::string> scan_transcript(const Transcript& t,
                                         std::span<const std::uint64_t> encoded_data,
                                         std::uint64_t phi = kDefaultModulus);

}  // namespace pod
