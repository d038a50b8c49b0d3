#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pod/chain.hpp"
#include "pod/harness.hpp"

namespace pod {

namespace {

constexpr std::uint64_t kTagData = 0x44415441;      // "DATA"
constexpr std::uint64_t kTagFit = 0x46495430;       // "FIT0"
constexpr std::uint64_t kTagContrib = 0x434f4e54;   // "CONT"
constexpr std::uint64_t kTagTrainer = 0x5452414e;   // "TRAN"
constexpr std::uint64_t kTagWorld = 0x574f524c;     // "WORL"

std::string fixed(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", x);
  return buf;
}

std::string padded(std::uint32_t node) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "node_%02u", node);
  return buf;
}

std::string artifact_stem(std::uint32_t node, std::uint64_t version) {
  return padded(node) + "_v" + std::to_string(version);
}

class RowMaker {
 public:
  RowMaker(const ModelWeights& truth, double noise, Rng& rng) : truth_(truth), noise_(noise), rng_(rng) {}

  Row make(std::uint64_t id) {
    Row r;
    r.id = id;
    r.features.resize(truth_.size());
    double s = 0.0;
    for (std::size_t k = 0; k < truth_.size(); ++k) {
      r.features[k] = rng_.normal();
      s += truth_.values[k] * r.features[k];
    }
    s += noise_ * rng_.normal();
    r.label = s > 0.0 ? 1.0 : 0.0;
    return r;
  }

 private:
  const ModelWeights& truth_;
  double noise_;
  Rng& rng_;
};

std::vector<std::size_t> imbalance_counts(const AllocationSpec& spec, std::uint32_t n) {
  std::vector<std::size_t> counts(n, spec.rows);
  if (!spec.volumes.empty()) {
    const double total = std::accumulate(spec.volumes.begin(), spec.volumes.end(), 0.0);
    for (std::uint32_t i = 0; i < n; ++i) {
      const double c = std::round(static_cast<double>(spec.rows) * n * spec.volumes[i] / total);
      counts[i] = static_cast<std::size_t>(std::max(1.0, c));
    }
    return counts;
  }
  // Evenly spaced offsets around the mean, scaled to hit the target rate.
  const double target = spec.uneven_rate.value_or(0.0);
  if (target == 0.0) return counts;
  std::vector<double> z(n);
  double sq = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    z[i] = static_cast<double>(i) - (static_cast<double>(n) - 1.0) / 2.0;
    sq += z[i] * z[i];
  }
  if (sq == 0.0) throw ConfigError("data.uneven_rate", "a single node cannot be uneven");
  const double a = target * n / std::sqrt(sq);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double c = std::round(static_cast<double>(spec.rows) + a * z[i]);
    if (c < 1.0) throw ConfigError("data.uneven_rate", "infeasible: a node would hold no rows");
    counts[i] = static_cast<std::size_t>(c);
  }
  return counts;
}

}  // namespace

const Dataset& AllocatedData::at(std::size_t node, std::uint64_t epoch) const {
  if (per_epoch.empty()) throw std::out_of_range("no allocated data");
  const std::size_t idx =
      per_epoch.size() == 1 ? 0 : std::min<std::size_t>(epoch == 0 ? 0 : epoch - 1, per_epoch.size() - 1);
  return per_epoch[idx].at(node);
}

AllocatedData allocate_data(const AllocationSpec& spec, std::uint32_t n, std::uint64_t epochs,
                            std::uint64_t seed) {
  if (n == 0) throw ConfigError("n", "at least one sharing node");
  if (spec.features == 0) throw ConfigError("data.features", "must be at least 1");
  Rng rng(derive_seed(seed, {kTagData}));
  AllocatedData out;
  out.truth.values.resize(spec.features);
  for (auto& w : out.truth.values) w = rng.normal();
  RowMaker maker(out.truth, spec.label_noise, rng);
  std::uint64_t next_id = 0;

  auto fresh = [&](std::size_t count, NodeId owner) {
    Dataset d;
    d.owner = owner;
    d.rows.reserve(count);
    for (std::size_t r = 0; r < count; ++r) d.rows.push_back(maker.make(next_id++));
    return d;
  };

  std::vector<Dataset> nodes(n);
  switch (spec.mode) {
    case AllocationMode::uniform:
      for (std::uint32_t i = 0; i < n; ++i) nodes[i] = fresh(spec.rows, NodeId{i});
      out.per_epoch.push_back(std::move(nodes));
      break;
    case AllocationMode::imbalance: {
      const auto counts = imbalance_counts(spec, n);
      for (std::uint32_t i = 0; i < n; ++i) nodes[i] = fresh(counts[i], NodeId{i});
      out.per_epoch.push_back(std::move(nodes));
      break;
    }
    case AllocationMode::overlap: {
      // Equal windows of length R over a cyclic pool of U rows; the pool size
      // sets the redundant fraction (nR - U) / nR.
      if (spec.overlap < 0.0 || spec.overlap > 1.0) {
        throw ConfigError("data.overlap", "must lie in [0, 1]");
      }
      const std::size_t R = spec.rows;
      const auto U = static_cast<std::size_t>(
          std::llround(static_cast<double>(n) * static_cast<double>(R) * (1.0 - spec.overlap)));
      if (U < R) throw ConfigError("data.overlap", "infeasible for this node count");
      const Dataset pool = fresh(U, NodeId{0});
      for (std::uint32_t i = 0; i < n; ++i) {
        nodes[i].owner = NodeId{i};
        const std::size_t start = static_cast<std::size_t>(i) * U / n;
        for (std::size_t r = 0; r < R; ++r) nodes[i].rows.push_back(pool.rows[(start + r) % U]);
      }
      out.per_epoch.push_back(std::move(nodes));
      break;
    }
    case AllocationMode::dynamic: {
      if (spec.growth.size() != n) throw ConfigError("data.growth", "one growth factor per node");
      std::vector<Dataset> pools(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        const double last = static_cast<double>(spec.rows) *
                            std::pow(spec.growth[i], static_cast<double>(epochs - 1));
        pools[i] = fresh(static_cast<std::size_t>(std::ceil(last)) + 1, NodeId{i});
      }
      for (std::uint64_t e = 1; e <= epochs; ++e) {
        std::vector<Dataset> cur(n);
        for (std::uint32_t i = 0; i < n; ++i) {
          const auto count = static_cast<std::size_t>(std::max(
              1.0, std::round(static_cast<double>(spec.rows) *
                              std::pow(spec.growth[i], static_cast<double>(e - 1)))));
          cur[i].owner = NodeId{i};
          cur[i].rows.assign(pools[i].rows.begin(),
                             pools[i].rows.begin() + static_cast<std::ptrdiff_t>(count));
        }
        out.per_epoch.push_back(std::move(cur));
      }
      break;
    }
  }
  out.test = fresh(spec.test_rows, NodeId{n});
  return out;
}

// ---------------------------------------------------------------------------

ScenarioData::ScenarioData(const ScenarioConfig& cfg)
    : n_(cfg.protocol.n),
      features_(cfg.data.features),
      dynamic_(cfg.data.mode == AllocationMode::dynamic),
      fit_(cfg.protocol.fit),
      seed_(cfg.seed),
      data_(allocate_data(cfg.data, cfg.protocol.n, cfg.protocol.epochs, cfg.seed)),
      behaviors_(cfg.protocol.n) {
  for (const auto& s : cfg.sharing_faults) behaviors_.at(s.node) = s.behavior;
  for (std::uint32_t i = 0; i < n_; ++i) {
    if (behaviors_[i].kind != AdversaryKind::data_redundancy) continue;
    for (std::size_t v = 0; v < data_.per_epoch.size(); ++v) {
      const Dataset& src = data_.per_epoch[v][i];
      Dataset dup = src;
      const auto target = static_cast<std::size_t>(
          std::llround(static_cast<double>(src.size()) * behaviors_[i].duplication));
      for (std::size_t r = 0; dup.size() < target && !src.empty(); ++r) {
        dup.rows.push_back(src.rows[r % src.size()]);
      }
      duplicated_[{i, v}] = std::move(dup);
    }
  }
}

const AdversaryBehavior& ScenarioData::behavior(NodeId node) const { return behaviors_.at(node.value); }

std::uint64_t ScenarioData::data_version(NodeId, std::uint64_t epoch) const {
  return dynamic_ ? epoch : 0;
}

const Dataset& ScenarioData::dataset(NodeId node, std::uint64_t epoch) const {
  if (node.value >= n_) throw std::out_of_range("no such sharing node");
  if (behavior(node).kind == AdversaryKind::data_redundancy) {
    const std::size_t v =
        data_.per_epoch.size() == 1 ? 0 : std::min<std::size_t>(epoch - 1, data_.per_epoch.size() - 1);
    return duplicated_.at({node.value, v});
  }
  return data_.at(node.value, epoch);
}

const DataSummary& ScenarioData::claimed_summary(NodeId node, std::uint64_t epoch) const {
  const auto key = std::make_pair(node.value, data_version(node, epoch));
  if (auto it = summaries_.find(key); it != summaries_.end()) return it->second;
  DataSummary s = summarize(dataset(node, epoch), fit_, derive_seed(seed_, {kTagFit, key.first, key.second}));
  const auto& b = behavior(node);
  if (b.kind == AdversaryKind::data_falsify) {
    honest_summaries_[key] = s;
    for (auto& f : s.per_feature) {
      const double mu = f.mean();
      const double sigma = std::sqrt(f.variance());
      f.components = {GaussianComponent{1.0, mu + b.forged_shift * sigma, sigma * sigma}};
    }
  }
  return summaries_.emplace(key, std::move(s)).first->second;
}

HolderClaim ScenarioData::holder_claim(NodeId node, std::uint64_t epoch) const {
  const auto& b = behavior(node);
  if (b.kind != AdversaryKind::data_falsify) return DataSource::holder_claim(node, epoch);
  const DataSummary& forged = claimed_summary(node, epoch);
  HolderClaim claim;
  claim.count = dataset(node, epoch).size();
  for (const auto& f : forged.per_feature) {
    const double mu = f.mean();
    const double sigma = std::sqrt(f.variance());
    claim.features.push_back({f, mu - 3.0 * sigma, mu + 3.0 * sigma});
  }
  return claim;
}

std::uint64_t ScenarioData::genuine_count(NodeId node, std::uint64_t epoch) const {
  return data_.at(node.value, epoch).size();
}

DataSummary ScenarioData::true_summary(NodeId node, std::uint64_t epoch) const {
  DataSummary s;
  s.count = genuine_count(node, epoch);
  for (std::size_t k = 0; k < features_; ++k) {
    GaussianFit f;
    f.components = {GaussianComponent{1.0, 0.0, 1.0}};
    f.count = s.count;
    s.per_feature.push_back(std::move(f));
  }
  return s;
}

// ---------------------------------------------------------------------------

std::vector<EpochMetrics> compute_metrics(const RunResult& run, const ScenarioData& data,
                                          const ScenarioConfig& cfg) {
  std::vector<EpochMetrics> out;
  const auto n = cfg.protocol.n;
  Tick previous_lock = 0;
  for (const auto& [epoch, outcome] : run.epochs) {
    EpochMetrics m;
    m.epoch = epoch;
    std::vector<DataSummary> truth;
    std::vector<std::uint64_t> counts;
    for (std::uint32_t i = 0; i < n; ++i) {
      truth.push_back(data.true_summary(NodeId{i}, epoch));
      counts.push_back(truth.back().count);
    }
    m.theoretical = expected_contribution(truth, counts, cfg.protocol.contribution).shares;
    m.actual.assign(n, 0.0);
    if (outcome.locked.settlement) {
      for (const auto& entry : outcome.locked.settlement->entries) {
        if (entry.node.value >= n) continue;
        m.actual[entry.node.value] = static_cast<double>(entry.share_exact);
        if (entry.forfeited) {
          m.forfeited.push_back(entry.node);
        } else if (entry.share_exact > 0) {
          m.members.push_back(entry.node);
        }
      }
    }
    for (std::uint32_t i = 0; i < n; ++i) {
      const double d = std::abs(m.theoretical[i] - m.actual[i]);
      m.sys_diff += d;
      m.max_diff = std::max(m.max_diff, d);
    }
    if (outcome.locked.final_weights) {
      m.acc = evaluate(*outcome.locked.final_weights, data.test_set(), cfg.protocol.trainer.kind);
    }
    m.lock_latency = outcome.lock_tick - std::min(previous_lock, outcome.lock_tick);
    previous_lock = outcome.lock_tick;
    if (auto it = run.census.find(epoch); it != run.census.end()) {
      m.msgs_sharing = it->second.sharing;
      m.msgs_voting = it->second.voting;
    }
    out.push_back(std::move(m));
  }
  return out;
}

void emit_csv(const std::vector<EpochMetrics>& metrics, std::ostream& out) {
  out << kMetricsHeader << '\n';
  for (const auto& m : metrics) {
    out << m.epoch << ',' << fixed(m.acc) << ',' << fixed(m.sys_diff) << ',' << fixed(m.max_diff)
        << ',' << m.lock_latency << ',' << m.msgs_sharing << ',' << m.msgs_voting << '\n';
  }
}

void emit_csv(const std::vector<EpochMetrics>& metrics, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  emit_csv(metrics, out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

nlohmann::json node_list(const std::vector<NodeId>& ids) {
  auto j = nlohmann::json::array();
  for (auto id : ids) j.push_back(id.value);
  return j;
}

nlohmann::json verdicts(const RunResult& run) {
  return {{"safety", run.safety_ok},
          {"finality", run.finality_ok},
          {"liveness", run.liveness_ok},
          {"faults_exceeded", run.faults_exceeded},
          {"threshold_violations", run.threshold_violations},
          {"violations", run.violations},
          {"exit_code", run.exit_code}};
}

void write_artifacts(const ScenarioConfig& cfg, const ScenarioData& data, const World& world,
                     const ScenarioResult& res, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  emit_csv(res.metrics, dir / "metrics.csv");

  {
    auto out = open_out(dir / "ledger.jsonl");
    for (const auto& [epoch, outcome] : res.run.epochs) {
      if (!outcome.locked.settlement) continue;
      const auto& s = *outcome.locked.settlement;
      nlohmann::json j;
      j["epoch"] = epoch;
      j["pool"] = s.pool.str();
      j["forfeited_total"] = s.forfeited_total.str();
      j["total_paid"] = s.total_paid().str();
      j["conserved"] = s.total_paid() == s.pool + s.forfeited_total;
      auto entries = nlohmann::json::array();
      for (const auto& e : s.entries) {
        entries.push_back({{"node", e.node.value},
                           {"share", e.share},
                           {"share_exact", e.share_exact.str()},
                           {"reward", e.reward.str()},
                           {"forfeited", e.forfeited}});
      }
      j["entries"] = std::move(entries);
      out << j.dump() << '\n';
    }
  }

  {
    auto out = open_out(dir / "contribution.jsonl");
    for (const auto& m : res.metrics) {
      std::vector<std::uint64_t> counts;
      for (std::uint32_t i = 0; i < cfg.protocol.n; ++i) {
        counts.push_back(data.genuine_count(NodeId{i}, m.epoch));
      }
      nlohmann::json j{{"epoch", m.epoch},
                       {"counts", counts},
                       {"theoretical", m.theoretical},
                       {"actual", m.actual},
                       {"members", node_list(m.members)},
                       {"forfeited", node_list(m.forfeited)},
                       {"sys_diff", m.sys_diff},
                       {"max_diff", m.max_diff}};
      const auto& outcome = res.run.epochs.at(m.epoch);
      j["tau"] = outcome.rules.tau;
      j["active"] = node_list(outcome.rules.active);
      j["merge_list"] = node_list(outcome.block.merge_list);
      out << j.dump() << '\n';
    }
  }

  if (cfg.write_trace) {
    auto out = open_out(dir / "trace.jsonl");
    for (const auto& t : world.trace()) {
      out << nlohmann::json{{"tick", t.tick},
                            {"from", t.from.value},
                            {"to", t.to.value},
                            {"kind", t.kind},
                            {"size", t.size_class}}
                 .dump()
          << '\n';
    }
    out << nlohmann::json{{"monitors", verdicts(res.run)}}.dump() << '\n';

    auto ev = open_out(dir / "events.jsonl");
    for (const auto& e : world.events()) {
      ev << nlohmann::json{{"tick", e.tick},
                           {"node", e.event.node.value},
                           {"kind", e.event.kind},
                           {"height", e.event.height},
                           {"merge_list", e.event.merge_list},
                           {"detail", e.event.detail}}
                .dump()
         << '\n';
    }
  }

  {
    nlohmann::json j;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["monitors"] = verdicts(res.run);
    j["trace_hash"] = res.run.trace_hash.hex();
    j["messages"] = res.run.messages;
    j["dropped"] = res.run.dropped;
    j["events"] = res.run.events;
    j["end_tick"] = res.run.end_tick;
    j["epochs_locked"] = res.run.epochs.size();
    j["error"] = res.run.error;
    auto ver = nlohmann::json::array();
    for (const auto& v : res.verifications) {
      ver.push_back({{"node", v.node.value},
                     {"epoch", v.epoch},
                     {"version", v.version},
                     {"pass", v.pass},
                     {"failure", v.failure}});
    }
    j["verifications"] = std::move(ver);
    auto out = open_out(dir / "run.json");
    out << j.dump(2) << '\n';
    auto cfg_out = open_out(dir / "config.yaml");
    cfg_out << to_yaml(cfg);
  }

  fs::create_directories(dir / "datasets");
  std::set<std::pair<std::uint32_t, std::uint64_t>> written;
  for (std::uint64_t e = 1; e <= cfg.protocol.epochs; ++e) {
    for (std::uint32_t i = 0; i < cfg.protocol.n; ++i) {
      const auto version = data.data_version(NodeId{i}, e);
      if (!written.insert({i, version}).second) continue;
      auto out = open_out(dir / "datasets" / (artifact_stem(i, version) + ".csv"));
      write_dataset_csv(out, data.dataset(NodeId{i}, e));
    }
  }

  if (cfg.write_transcripts) {
    fs::create_directories(dir / "transcripts");
    for (const auto& v : res.verifications) {
      if (!v.report) continue;
      auto out = open_out(dir / "transcripts" / (artifact_stem(v.node.value, v.version) + ".jsonl"));
      v.report->transcript.write_jsonl(out);
    }
  }
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg,
                            const std::optional<std::filesystem::path>& out) {
  validate(cfg);
  auto data = std::make_shared<ScenarioData>(cfg);

  WorldConfig wc;
  wc.params = cfg.protocol;
  wc.params.dimension = cfg.data.features;
  wc.params.contribution_seed = derive_seed(cfg.seed, {kTagContrib});
  wc.params.trainer.seed = derive_seed(cfg.seed, {kTagTrainer});
  wc.network = cfg.network;
  wc.seed = derive_seed(cfg.seed, {kTagWorld});
  wc.tick_budget = cfg.budget();
  wc.drain = cfg.drain;
  if (!cfg.sharing_faults.empty()) {
    wc.sharing_faults.assign(cfg.protocol.n, AdversaryBehavior{});
    for (const auto& s : cfg.sharing_faults) wc.sharing_faults.at(s.node) = s.behavior;
  }
  if (!cfg.voter_faults.empty()) {
    wc.voter_faults.assign(cfg.protocol.m, VoterFault::none);
    for (const auto& v : cfg.voter_faults) wc.voter_faults.at(v.index) = v.fault;
  }
  wc.verification = cfg.verification;
  wc.keep_trace = out.has_value() && cfg.write_trace;
  wc.keep_transcripts = out.has_value() && cfg.write_transcripts;
  wc.ed25519 = cfg.ed25519;

  ModelWeights initial;
  initial.values.assign(cfg.data.features, 0.0);
  World world(wc, data, initial);

  ScenarioResult res;
  res.run = world.run();
  res.metrics = compute_metrics(res.run, *data, cfg);
  res.verifications = world.verifications();
  res.exit_code = res.run.exit_code;
  if (out) write_artifacts(cfg, *data, world, res, *out);
  return res;
}

std::size_t verify_transcripts(const std::filesystem::path& dir, std::ostream& log) {
  namespace fs = std::filesystem;
  const fs::path tdir = dir / "transcripts";
  if (!fs::is_directory(tdir)) throw std::runtime_error("no transcripts under " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(tdir)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t phi = kDefaultModulus;
  if (fs::exists(dir / "config.yaml")) phi = load_config(dir / "config.yaml").verification.field.modulus;
  static const std::regex stem_re(R"(node_(\d+)_v(\d+))");
  std::size_t violations = 0;
  for (const auto& file : files) {
    const auto stem = file.stem().string();
    std::smatch match;
    if (!std::regex_match(stem, match, stem_re)) {
      log << stem << ": unrecognized transcript name\n";
      ++violations;
      continue;
    }
    const fs::path dataset = dir / "datasets" / (stem + ".csv");
    std::ifstream din(dataset);
    if (!din) {
      log << stem << ": missing dataset " << dataset.string() << '\n';
      ++violations;
      continue;
    }
    const Dataset d = read_dataset_csv(din, NodeId{static_cast<std::uint32_t>(std::stoul(match[1]))});
    std::ifstream tin(file);
    const Transcript t = Transcript::read_jsonl(tin);
    const auto found = scan_transcript(t, encode_dataset(d, phi), phi);
    for (const auto& msg : found) log << stem << ": " << msg << '\n';
    violations += found.size();
    log << stem << ": " << t.records.size() << " records, "
        << (found.empty() ? "clean" : std::to_string(found.size()) + " leaks") << '\n';
  }
  return violations;
}

}  // namespace pod
