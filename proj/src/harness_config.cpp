#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "pod/harness.hpp"

namespace pod {

namespace {

using Keys = std::initializer_list<const char*>;

void check_keys(const YAML::Node& node, const std::string& where, Keys allowed) {
  if (!node.IsMap()) throw ConfigError(where.empty() ? "config" : where, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
  }
}

std::string path_of(const std::string& where, const char* key) {
  return where.empty() ? std::string(key) : where + "." + key;
}

template <typename T>
void read(const YAML::Node& node, const std::string& where, const char* key, T& out) {
  const auto v = node[key];
  if (!v) return;
  try {
    out = v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path_of(where, key), "wrong type");
  }
}

Rational read_rational(const YAML::Node& v, const std::string& key) {
  const auto text = v.as<std::string>();
  try {
    if (text.find_first_of(".eE") != std::string::npos) return Rational(std::stod(text));
    return Rational(text);
  } catch (const std::exception&) {
    throw ConfigError(key, "not a number: " + text);
  }
}

DelayRange read_delay(const YAML::Node& v, const std::string& key) {
  if (!v.IsSequence() || v.size() != 2) throw ConfigError(key, "expected [min, max]");
  return DelayRange{v[0].as<Tick>(), v[1].as<Tick>()};
}

AdversaryBehavior read_behavior(const YAML::Node& v, const std::string& where, std::uint32_t& node) {
  check_keys(v, where, {"node", "kind", "flood_rate", "delay_factor", "colluders", "forged_shift",
                        "duplication"});
  if (!v["node"] || !v["kind"]) throw ConfigError(where, "needs node and kind");
  node = v["node"].as<std::uint32_t>();
  AdversaryBehavior b;
  try {
    b.kind = parse_adversary_kind(v["kind"].as<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ".kind", e.what());
  }
  read(v, where, "flood_rate", b.flood_rate);
  read(v, where, "delay_factor", b.delay_factor);
  read(v, where, "forged_shift", b.forged_shift);
  read(v, where, "duplication", b.duplication);
  if (v["colluders"]) {
    for (const auto& c : v["colluders"]) b.colluders.push_back(NodeId{c.as<std::uint32_t>()});
  }
  return b;
}

void parse_into(const YAML::Node& root, ScenarioConfig& cfg) {
  check_keys(root, "", {"name", "seed", "n", "m", "f_v", "f", "epochs", "epoch_length", "tau",
                        "pool", "deposit", "settlement_merge", "queue_order", "tick_budget",
                        "drain", "signatures", "trainer", "fit", "contribution", "verification",
                        "timing", "data", "network", "byzantine", "output"});
  auto& p = cfg.protocol;
  read(root, "", "name", cfg.name);
  read(root, "", "seed", cfg.seed);
  read(root, "", "n", p.n);
  read(root, "", "m", p.m);
  read(root, "", "f_v", p.f_v);
  read(root, "", "f", cfg.f);
  read(root, "", "epochs", p.epochs);
  read(root, "", "epoch_length", p.epoch_length);
  read(root, "", "tick_budget", cfg.tick_budget);
  read(root, "", "drain", cfg.drain);
  if (auto t = root["tau"]) {
    if (t.IsScalar()) {
      p.tau = ThresholdSchedule{};
      p.tau.start = t.as<double>();
    } else {
      check_keys(t, "tau", {"start", "dynamic", "step", "floor", "latency_bound"});
      read(t, "tau", "start", p.tau.start);
      read(t, "tau", "dynamic", p.tau.dynamic);
      read(t, "tau", "step", p.tau.step);
      read(t, "tau", "floor", p.tau.floor);
      read(t, "tau", "latency_bound", p.tau.latency_bound);
    }
  }
  if (root["pool"]) p.pool = read_rational(root["pool"], "pool");
  if (root["deposit"]) p.deposit = read_rational(root["deposit"], "deposit");
  if (auto v = root["settlement_merge"]) {
    const auto s = v.as<std::string>();
    if (s == "contribution") {
      p.settlement_merge = SettlementMerge::contribution_weighted;
    } else if (s == "count") {
      p.settlement_merge = SettlementMerge::count_weighted;
    } else {
      throw ConfigError("settlement_merge", "expected contribution or count");
    }
  }
  if (auto v = root["queue_order"]) {
    const auto s = v.as<std::string>();
    if (s == "priority") {
      p.queue_order = QueueOrder::priority;
    } else if (s == "fifo") {
      p.queue_order = QueueOrder::fifo;
    } else {
      throw ConfigError("queue_order", "expected priority or fifo");
    }
  }
  if (auto v = root["signatures"]) {
    const auto s = v.as<std::string>();
    if (s != "mac" && s != "ed25519") throw ConfigError("signatures", "expected mac or ed25519");
    cfg.ed25519 = s == "ed25519";
  }
  if (auto t = root["trainer"]) {
    check_keys(t, "trainer", {"model", "learning_rate", "local_steps"});
    if (t["model"]) {
      try {
        p.trainer.kind = parse_model_kind(t["model"].as<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError("trainer.model", e.what());
      }
    }
    read(t, "trainer", "learning_rate", p.trainer.learning_rate);
    read(t, "trainer", "local_steps", p.trainer.local_steps);
  }
  if (auto t = root["fit"]) {
    check_keys(t, "fit", {"components", "max_iterations", "tolerance", "variance_floor"});
    read(t, "fit", "components", p.fit.components);
    read(t, "fit", "max_iterations", p.fit.max_iterations);
    read(t, "fit", "tolerance", p.fit.tolerance);
    read(t, "fit", "variance_floor", p.fit.variance_floor);
  }
  if (auto t = root["contribution"]) {
    check_keys(t, "contribution", {"sample_rate", "slices", "gaussian_range"});
    read(t, "contribution", "sample_rate", p.contribution.sample_rate);
    read(t, "contribution", "slices", p.contribution.slices);
    read(t, "contribution", "gaussian_range", p.contribution.gaussian_range);
  }
  if (auto t = root["verification"]) {
    check_keys(t, "verification",
               {"modulus", "challenges", "intervals", "max_samples", "z", "min_expected"});
    auto& v = cfg.verification;
    read(t, "verification", "modulus", v.field.modulus);
    read(t, "verification", "challenges", v.field.challenges);
    read(t, "verification", "intervals", v.distribution.intervals);
    read(t, "verification", "max_samples", v.distribution.max_samples);
    read(t, "verification", "z", v.distribution.z);
    read(t, "verification", "min_expected", v.distribution.min_expected);
  }
  if (auto t = root["timing"]) {
    check_keys(t, "timing", {"train_base", "ticks_per_row", "coalesce", "resubmit",
                             "settlement_window", "view_timeout", "voter_capacity", "queue_cap"});
    auto& tm = p.timing;
    read(t, "timing", "train_base", tm.train_base);
    read(t, "timing", "ticks_per_row", tm.ticks_per_row);
    read(t, "timing", "coalesce", tm.coalesce);
    read(t, "timing", "resubmit", tm.resubmit);
    read(t, "timing", "settlement_window", tm.settlement_window);
    read(t, "timing", "view_timeout", tm.view_timeout);
    read(t, "timing", "voter_capacity", tm.voter_capacity);
    read(t, "timing", "queue_cap", tm.queue_cap);
  }
  if (auto t = root["data"]) {
    check_keys(t, "data", {"mode", "rows", "features", "test_rows", "label_noise", "volumes",
                           "uneven_rate", "overlap", "growth"});
    auto& d = cfg.data;
    if (t["mode"]) {
      const auto s = t["mode"].as<std::string>();
      bool found = false;
      for (auto m : {AllocationMode::uniform, AllocationMode::imbalance, AllocationMode::overlap,
                     AllocationMode::dynamic}) {
        if (to_string(m) == s) {
          d.mode = m;
          found = true;
        }
      }
      if (!found) throw ConfigError("data.mode", "unknown mode " + s);
    }
    read(t, "data", "rows", d.rows);
    read(t, "data", "features", d.features);
    read(t, "data", "test_rows", d.test_rows);
    read(t, "data", "label_noise", d.label_noise);
    read(t, "data", "volumes", d.volumes);
    if (t["uneven_rate"]) d.uneven_rate = t["uneven_rate"].as<double>();
    read(t, "data", "overlap", d.overlap);
    read(t, "data", "growth", d.growth);
  }
  if (auto t = root["network"]) {
    check_keys(t, "network", {"sharing_delay", "committee_delay", "gst", "pre_gst_max",
                              "topology", "fanout", "partitions", "link_multipliers"});
    auto& net = cfg.network;
    if (t["sharing_delay"]) net.sharing = read_delay(t["sharing_delay"], "network.sharing_delay");
    if (t["committee_delay"]) {
      net.committee = read_delay(t["committee_delay"], "network.committee_delay");
    }
    read(t, "network", "gst", net.gst);
    read(t, "network", "pre_gst_max", net.pre_gst_max);
    read(t, "network", "fanout", net.fanout);
    if (t["topology"]) {
      const auto s = t["topology"].as<std::string>();
      if (s == "full") {
        net.topology = Topology::full;
      } else if (s == "gossip") {
        net.topology = Topology::gossip;
      } else {
        throw ConfigError("network.topology", "expected full or gossip");
      }
    }
    if (auto parts = t["partitions"]) {
      for (const auto& pv : parts) {
        check_keys(pv, "network.partitions", {"start", "end", "side"});
        Partition part;
        part.start = pv["start"].as<Tick>();
        part.end = pv["end"].as<Tick>();
        for (const auto& s : pv["side"]) part.side.push_back(NodeId{s.as<std::uint32_t>()});
        net.partitions.push_back(std::move(part));
      }
    }
    if (auto links = t["link_multipliers"]) {
      for (const auto& lv : links) {
        check_keys(lv, "network.link_multipliers", {"from", "to", "factor"});
        net.link_multipliers[{NodeId{lv["from"].as<std::uint32_t>()},
                              NodeId{lv["to"].as<std::uint32_t>()}}] = lv["factor"].as<double>();
      }
    }
  }
  if (auto t = root["byzantine"]) {
    check_keys(t, "byzantine", {"sharing", "voters"});
    if (auto s = t["sharing"]) {
      for (const auto& bv : s) {
        SharingFaultSpec spec;
        spec.behavior = read_behavior(bv, "byzantine.sharing", spec.node);
        cfg.sharing_faults.push_back(std::move(spec));
      }
    }
    if (auto s = t["voters"]) {
      for (const auto& vv : s) {
        check_keys(vv, "byzantine.voters", {"index", "fault"});
        VoterFaultSpec spec;
        spec.index = vv["index"].as<std::uint32_t>();
        try {
          spec.fault = parse_voter_fault(vv["fault"].as<std::string>());
        } catch (const std::invalid_argument& e) {
          throw ConfigError("byzantine.voters.fault", e.what());
        }
        cfg.voter_faults.push_back(spec);
      }
    }
  }
  if (auto t = root["output"]) {
    check_keys(t, "output", {"trace", "transcripts"});
    read(t, "output", "trace", cfg.write_trace);
    read(t, "output", "transcripts", cfg.write_transcripts);
  }
}

}  // namespace

std::string to_string(AllocationMode m) {
  switch (m) {
    case AllocationMode::uniform: return "uniform";
    case AllocationMode::imbalance: return "imbalance";
    case AllocationMode::overlap: return "overlap";
    case AllocationMode::dynamic: return "dynamic";
  }
  return "?";
}

Tick ScenarioConfig::budget() const {
  return tick_budget > 0 ? tick_budget : 1500 * protocol.epochs;
}

void validate(const ScenarioConfig& cfg) {
  const auto& p = cfg.protocol;
  auto require = [](bool ok, const char* key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
  };
  require(p.n >= 1, "n", "at least one sharing node");
  require(p.m >= 1, "m", "the voting committee cannot be empty");
  require(p.m >= 3 * p.f_v + 1, "f_v",
          "committee of " + std::to_string(p.m) + " cannot tolerate " + std::to_string(p.f_v) +
              " faulty voters (needs m >= 3 f_v + 1)");
  require(p.epoch_length >= 1, "epoch_length", "must be at least 1");
  require(p.epochs >= 1, "epochs", "must be at least 1");
  require(cfg.f >= 0.0 && cfg.f < 1.0, "f", "must lie in [0, 1)");
  require(p.tau.start > 0.0 && p.tau.start <= 1.0, "tau", "must lie in (0, 1]");
  require(p.tau.start <= 1.0 - cfg.f + 1e-9, "tau",
          "threshold " + std::to_string(p.tau.start) + " exceeds 1 - f = " +
              std::to_string(1.0 - cfg.f));
  if (p.tau.dynamic) {
    require(p.tau.step > 0.0, "tau.step", "must be positive");
    require(p.tau.floor > 0.0 && p.tau.floor <= p.tau.start, "tau.floor",
            "must lie in (0, start]");
  }
  try {
    validate(p.trainer);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("trainer", e.what());
  }
  require(p.fit.components >= 1, "fit.components", "must be at least 1");
  require(p.fit.max_iterations >= 1, "fit.max_iterations", "must be at least 1");
  require(p.fit.variance_floor > 0.0, "fit.variance_floor", "must be positive");
  require(p.contribution.sample_rate > 0.0 && p.contribution.sample_rate <= 1.0,
          "contribution.sample_rate", "must lie in (0, 1]");
  require(p.contribution.slices >= 1, "contribution.slices", "must be at least 1");
  require(p.contribution.gaussian_range > 0.0, "contribution.gaussian_range", "must be positive");
  require(cfg.verification.field.challenges >= 1, "verification.challenges",
          "at least one challenge is required");
  require(is_prime(cfg.verification.field.modulus), "verification.modulus", "must be prime");
  require(cfg.verification.distribution.intervals >= 2, "verification.intervals",
          "must be at least 2");
  require(cfg.verification.distribution.max_samples >= 1, "verification.max_samples",
          "must be at least 1");
  require(cfg.verification.distribution.z > 0.0, "verification.z", "must be positive");
  require(p.pool >= 0, "pool", "must be nonnegative");
  require(p.deposit >= 0, "deposit", "must be nonnegative");
  require(p.timing.voter_capacity >= 1, "timing.voter_capacity", "must be at least 1");
  require(p.timing.queue_cap >= 1, "timing.queue_cap", "must be at least 1");
  require(p.timing.resubmit >= 1, "timing.resubmit", "must be at least 1");
  require(p.timing.view_timeout >= 1, "timing.view_timeout", "must be at least 1");
  require(p.timing.ticks_per_row >= 0.0, "timing.ticks_per_row", "must be nonnegative");

  const auto& d = cfg.data;
  require(d.rows >= 1, "data.rows", "must be at least 1");
  require(d.features >= 1, "data.features", "must be at least 1");
  require(d.test_rows >= 1, "data.test_rows", "must be at least 1");
  switch (d.mode) {
    case AllocationMode::imbalance:
      require(!d.volumes.empty() || d.uneven_rate.has_value(), "data.volumes",
              "imbalance needs volumes or uneven_rate");
      require(d.volumes.empty() || d.volumes.size() == p.n, "data.volumes", "one volume per node");
      for (double v : d.volumes) require(v > 0.0, "data.volumes", "volumes must be positive");
      if (d.uneven_rate) require(*d.uneven_rate >= 0.0, "data.uneven_rate", "must be nonnegative");
      break;
    case AllocationMode::overlap:
      require(d.overlap >= 0.0 && d.overlap <= 1.0, "data.overlap", "must lie in [0, 1]");
      require(d.overlap <= 1.0 - 1.0 / p.n + 1e-12, "data.overlap",
              "infeasible for " + std::to_string(p.n) + " nodes with equal volumes");
      break;
    case AllocationMode::dynamic:
      require(d.growth.size() == p.n, "data.growth", "one growth factor per node");
      for (double g : d.growth) require(g > 0.0, "data.growth", "factors must be positive");
      break;
    case AllocationMode::uniform:
      break;
  }

  const auto& net = cfg.network;
  require(net.sharing.max >= net.sharing.min, "network.sharing_delay", "max below min");
  require(net.committee.max >= net.committee.min, "network.committee_delay", "max below min");
  require(net.topology == Topology::full || net.fanout >= 1, "network.fanout",
          "must be at least 1");
  for (const auto& [link, factor] : net.link_multipliers) {
    require(factor > 0.0, "network.link_multipliers", "factors must be positive");
  }

  std::set<std::uint32_t> seen;
  for (const auto& s : cfg.sharing_faults) {
    require(s.node < p.n, "byzantine.sharing.node", "no such node " + std::to_string(s.node));
    require(seen.insert(s.node).second, "byzantine.sharing.node", "node listed twice");
    for (auto c : s.behavior.colluders) {
      require(c.value < p.n, "byzantine.sharing.colluders", "no such node");
    }
    require(s.behavior.duplication >= 1.0, "byzantine.sharing.duplication", "must be >= 1");
  }
  seen.clear();
  for (const auto& v : cfg.voter_faults) {
    require(v.index < p.m, "byzantine.voters.index", "no such voter " + std::to_string(v.index));
    require(seen.insert(v.index).second, "byzantine.voters.index", "voter listed twice");
  }
}

ScenarioConfig parse_config(const std::string& yaml) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config", e.what());
  }
  ScenarioConfig cfg;
  if (!root.IsNull()) {
    try {
      parse_into(root, cfg);
    } catch (const YAML::Exception& e) {
      throw ConfigError("config", e.what());
    }
  }
  validate(cfg);
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_yaml(const ScenarioConfig& cfg) {
  const auto& p = cfg.protocol;
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << cfg.name;
  e << YAML::Key << "seed" << YAML::Value << cfg.seed;
  e << YAML::Key << "n" << YAML::Value << p.n;
  e << YAML::Key << "m" << YAML::Value << p.m;
  e << YAML::Key << "f_v" << YAML::Value << p.f_v;
  e << YAML::Key << "f" << YAML::Value << cfg.f;
  e << YAML::Key << "epochs" << YAML::Value << p.epochs;
  e << YAML::Key << "epoch_length" << YAML::Value << p.epoch_length;
  e << YAML::Key << "tau" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "start" << YAML::Value << p.tau.start;
  e << YAML::Key << "dynamic" << YAML::Value << p.tau.dynamic;
  e << YAML::Key << "step" << YAML::Value << p.tau.step;
  e << YAML::Key << "floor" << YAML::Value << p.tau.floor;
  e << YAML::Key << "latency_bound" << YAML::Value << p.tau.latency_bound;
  e << YAML::EndMap;
  e << YAML::Key << "pool" << YAML::Value << p.pool.str();
  e << YAML::Key << "deposit" << YAML::Value << p.deposit.str();
  e << YAML::Key << "settlement_merge" << YAML::Value
    << (p.settlement_merge == SettlementMerge::contribution_weighted ? "contribution" : "count");
  e << YAML::Key << "queue_order" << YAML::Value
    << (p.queue_order == QueueOrder::priority ? "priority" : "fifo");
  e << YAML::Key << "tick_budget" << YAML::Value << cfg.budget();
  e << YAML::Key << "drain" << YAML::Value << cfg.drain;
  e << YAML::Key << "signatures" << YAML::Value << (cfg.ed25519 ? "ed25519" : "mac");
  e << YAML::Key << "trainer" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "model" << YAML::Value << to_string(p.trainer.kind);
  e << YAML::Key << "learning_rate" << YAML::Value << p.trainer.learning_rate;
  e << YAML::Key << "local_steps" << YAML::Value << p.trainer.local_steps;
  e << YAML::EndMap;
  e << YAML::Key << "fit" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "components" << YAML::Value << p.fit.components;
  e << YAML::Key << "max_iterations" << YAML::Value << p.fit.max_iterations;
  e << YAML::Key << "tolerance" << YAML::Value << p.fit.tolerance;
  e << YAML::Key << "variance_floor" << YAML::Value << p.fit.variance_floor;
  e << YAML::EndMap;
  e << YAML::Key << "contribution" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "sample_rate" << YAML::Value << p.contribution.sample_rate;
  e << YAML::Key << "slices" << YAML::Value << p.contribution.slices;
  e << YAML::Key << "gaussian_range" << YAML::Value << p.contribution.gaussian_range;
  e << YAML::EndMap;
  const auto& v = cfg.verification;
  e << YAML::Key << "verification" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "modulus" << YAML::Value << v.field.modulus;
  e << YAML::Key << "challenges" << YAML::Value << v.field.challenges;
  e << YAML::Key << "intervals" << YAML::Value << v.distribution.intervals;
  e << YAML::Key << "max_samples" << YAML::Value << v.distribution.max_samples;
  e << YAML::Key << "z" << YAML::Value << v.distribution.z;
  e << YAML::Key << "min_expected" << YAML::Value << v.distribution.min_expected;
  e << YAML::EndMap;
  const auto& t = p.timing;
  e << YAML::Key << "timing" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "train_base" << YAML::Value << t.train_base;
  e << YAML::Key << "ticks_per_row" << YAML::Value << t.ticks_per_row;
  e << YAML::Key << "coalesce" << YAML::Value << t.coalesce;
  e << YAML::Key << "resubmit" << YAML::Value << t.resubmit;
  e << YAML::Key << "settlement_window" << YAML::Value << t.settlement_window;
  e << YAML::Key << "view_timeout" << YAML::Value << t.view_timeout;
  e << YAML::Key << "voter_capacity" << YAML::Value << t.voter_capacity;
  e << YAML::Key << "queue_cap" << YAML::Value << t.queue_cap;
  e << YAML::EndMap;
  const auto& d = cfg.data;
  e << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "mode" << YAML::Value << to_string(d.mode);
  e << YAML::Key << "rows" << YAML::Value << d.rows;
  e << YAML::Key << "features" << YAML::Value << d.features;
  e << YAML::Key << "test_rows" << YAML::Value << d.test_rows;
  e << YAML::Key << "label_noise" << YAML::Value << d.label_noise;
  if (!d.volumes.empty()) e << YAML::Key << "volumes" << YAML::Value << YAML::Flow << d.volumes;
  if (d.uneven_rate) e << YAML::Key << "uneven_rate" << YAML::Value << *d.uneven_rate;
  if (d.mode == AllocationMode::overlap) e << YAML::Key << "overlap" << YAML::Value << d.overlap;
  if (!d.growth.empty()) e << YAML::Key << "growth" << YAML::Value << YAML::Flow << d.growth;
  e << YAML::EndMap;
  const auto& net = cfg.network;
  e << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "sharing_delay" << YAML::Value << YAML::Flow << YAML::BeginSeq
    << net.sharing.min << net.sharing.max << YAML::EndSeq;
  e << YAML::Key << "committee_delay" << YAML::Value << YAML::Flow << YAML::BeginSeq
    << net.committee.min << net.committee.max << YAML::EndSeq;
  e << YAML::Key << "gst" << YAML::Value << net.gst;
  e << YAML::Key << "pre_gst_max" << YAML::Value << net.pre_gst_max;
  e << YAML::Key << "topology" << YAML::Value
    << (net.topology == Topology::full ? "full" : "gossip");
  e << YAML::Key << "fanout" << YAML::Value << net.fanout;
  if (!net.partitions.empty()) {
    e << YAML::Key << "partitions" << YAML::Value << YAML::BeginSeq;
    for (const auto& part : net.partitions) {
      e << YAML::BeginMap << YAML::Key << "start" << YAML::Value << part.start << YAML::Key
        << "end" << YAML::Value << part.end << YAML::Key << "side" << YAML::Value << YAML::Flow
        << YAML::BeginSeq;
      for (auto id : part.side) e << id.value;
      e << YAML::EndSeq << YAML::EndMap;
    }
    e << YAML::EndSeq;
  }
  if (!net.link_multipliers.empty()) {
    e << YAML::Key << "link_multipliers" << YAML::Value << YAML::BeginSeq;
    for (const auto& [link, factor] : net.link_multipliers) {
      e << YAML::Flow << YAML::BeginMap << YAML::Key << "from" << YAML::Value << link.first.value
        << YAML::Key << "to" << YAML::Value << link.second.value << YAML::Key << "factor"
        << YAML::Value << factor << YAML::EndMap;
    }
    e << YAML::EndSeq;
  }
  e << YAML::EndMap;
  if (!cfg.sharing_faults.empty() || !cfg.voter_faults.empty()) {
    e << YAML::Key << "byzantine" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "sharing" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : cfg.sharing_faults) {
      const auto& b = s.behavior;
      e << YAML::Flow << YAML::BeginMap;
      e << YAML::Key << "node" << YAML::Value << s.node;
      e << YAML::Key << "kind" << YAML::Value << to_string(b.kind);
      switch (b.kind) {
        case AdversaryKind::dos_flood:
          e << YAML::Key << "flood_rate" << YAML::Value << b.flood_rate;
          break;
        case AdversaryKind::delay_liveness:
          e << YAML::Key << "delay_factor" << YAML::Value << b.delay_factor;
          break;
        case AdversaryKind::eclipse_collude:
          e << YAML::Key << "colluders" << YAML::Value << YAML::Flow << YAML::BeginSeq;
          for (auto c : b.colluders) e << c.value;
          e << YAML::EndSeq;
          break;
        case AdversaryKind::data_falsify:
          e << YAML::Key << "forged_shift" << YAML::Value << b.forged_shift;
          break;
        case AdversaryKind::data_redundancy:
          e << YAML::Key << "duplication" << YAML::Value << b.duplication;
          break;
        default:
          break;
      }
      e << YAML::EndMap;
    }
    e << YAML::EndSeq;
    e << YAML::Key << "voters" << YAML::Value << YAML::BeginSeq;
    for (const auto& v2 : cfg.voter_faults) {
      e << YAML::Flow << YAML::BeginMap << YAML::Key << "index" << YAML::Value << v2.index
        << YAML::Key << "fault" << YAML::Value << to_string(v2.fault) << YAML::EndMap;
    }
    e << YAML::EndSeq;
    e << YAML::EndMap;
  }
  e << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "trace" << YAML::Value << cfg.write_trace;
  e << YAML::Key << "transcripts" << YAML::Value << cfg.write_transcripts;
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

namespace {

ScenarioConfig base_preset(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.protocol.n = 4;
  c.protocol.m = 4;
  c.protocol.f_v = 1;
  c.protocol.epochs = 3;
  c.protocol.epoch_length = 2;
  c.data.rows = 100;
  c.data.test_rows = 1000;
  return c;
}

AdversaryBehavior kind(AdversaryKind k) {
  AdversaryBehavior b;
  b.kind = k;
  return b;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"uneven-0",    "uneven-moderate", "uneven-extreme", "overlap-0.1",    "overlap-0.5",
          "overlap-0.9", "byzantine-0",     "byzantine-quarter", "dynamic-volume", "dynamic-tau"};
}

ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c = base_preset(name);
  auto& p = c.protocol;
  if (name == "uneven-0") {
    p.epochs = 4;
  } else if (name == "uneven-moderate") {
    c.data.mode = AllocationMode::imbalance;
    c.data.uneven_rate = 30.0;
    p.epochs = 4;
  } else if (name == "uneven-extreme") {
    // The largest holder trains slowest and misses every settlement window.
    c.data.mode = AllocationMode::imbalance;
    c.data.rows = 325;
    c.data.volumes = {1, 1, 1, 10};
    p.tau.start = 0.75;
    p.epoch_length = 1;
    p.epochs = 3;
  } else if (name.rfind("overlap-", 0) == 0) {
    c.data.mode = AllocationMode::overlap;
    c.data.overlap = std::stod(name.substr(8));
    c.data.rows = 60;
    p.n = 16;
    p.epochs = 2;
    p.epoch_length = 1;
  } else if (name == "byzantine-0") {
    c.data.rows = 60;
    p.n = 16;
  } else if (name == "byzantine-quarter") {
    c.data.rows = 60;
    p.n = 16;
    c.f = 0.25;
    c.sharing_faults = {{1, kind(AdversaryKind::rush_epoch)},
                        {5, kind(AdversaryKind::delay_liveness)},
                        {9, kind(AdversaryKind::data_falsify)},
                        {13, kind(AdversaryKind::tamper_block)}};
    c.voter_faults = {{3, VoterFault::silent}};
  } else if (name == "dynamic-volume") {
    c.data.mode = AllocationMode::dynamic;
    c.data.rows = 60;
    c.data.growth = {1.0, 1.1, 1.2, 1.3};
    p.epochs = 10;
    p.epoch_length = 1;
  } else if (name == "dynamic-tau") {
    // One slow holder: waiting for everyone is slow, so the threshold steps
    // down until settlement no longer waits for it.
    c.data.mode = AllocationMode::imbalance;
    c.data.volumes = {1, 1, 1, 1, 1, 1, 1, 10};
    c.data.rows = 100;
    p.n = 8;
    p.epochs = 4;
    p.epoch_length = 1;
    p.tau.start = 0.9;
    p.tau.dynamic = true;
    p.tau.step = 0.1;
    p.tau.floor = 0.5;
    p.tau.latency_bound = 56;
  } else {
    throw ConfigError("preset", "unknown preset " + name);
  }
  validate(c);
  return c;
}

}  // namespace pod
