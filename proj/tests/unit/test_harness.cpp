#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "pod/contribution.hpp"
#include "pod/harness.hpp"
#include "pod/voting.hpp"

using namespace pod;
namespace fs = std::filesystem;

namespace {

std::string rejected_key(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("pod_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::uint64_t> counts_of(const std::vector<Dataset>& sets) {
  std::vector<std::uint64_t> c;
  for (const auto& d : sets) c.push_back(d.size());
  return c;
}

ScenarioConfig small_scenario() {
  auto c = preset("uneven-0");
  c.protocol.epochs = 2;
  c.data.rows = 40;
  c.data.test_rows = 200;
  return c;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("invalid parameters are rejected with the offending key") {
    CHECK(rejected_key("n: 4\nm: 4\nf: 0.33\ntau: 0.8\n") == "tau");
    CHECK(rejected_key("n: 4\nm: 10\nf_v: 4\n") == "f_v");
    CHECK(rejected_key("n: 4\nm: 4\nbogus: 1\n") == "bogus");
    CHECK(rejected_key("n: 4\nm: 4\nepoch_length: 0\n") == "epoch_length");
    CHECK(rejected_key("n: 4\nm: 4\nverification: {challenges: 0}\n").find("challenges") !=
          std::string::npos);
    CHECK(rejected_key("n: 4\nm: 4\ndata: {mode: overlap, overlap: 1.2}\n").find("overlap") !=
          std::string::npos);
    CHECK(rejected_key("n: 4\nm: 0\n") == "m");
    CHECK(rejected_key("n: 4\nm: 4\ntau: 0\n") == "tau");
    CHECK(rejected_key("n: 4\nm: 4\ndata: {foo: 1}\n").find("foo") != std::string::npos);
  }

  TEST_CASE("a minimal config fills defaults") {
    const auto c = parse_config("n: 5\nm: 4\nseed: 9\n");
    CHECK(c.protocol.n == 5);
    CHECK(c.protocol.m == 4);
    CHECK(c.seed == 9);
    CHECK(c.protocol.f_v == 1);
    CHECK(c.protocol.epoch_length >= 1);
    CHECK(c.budget() == 1500 * c.protocol.epochs);
  }

  TEST_CASE("yaml round trip") {
    for (const auto& name : preset_names()) {
      CAPTURE(name);
      const auto c = preset(name);
      const auto text = to_yaml(c);
      const auto back = parse_config(text);
      CHECK(to_yaml(back) == text);
    }
  }

  TEST_CASE("uniform allocation is even") {
    AllocationSpec s;
    s.rows = 50;
    const auto a = allocate_data(s, 6, 1, 3);
    REQUIRE(a.per_epoch.size() == 1);
    CHECK(uneven_rate(counts_of(a.per_epoch[0])) == 0.0);
    CHECK(a.test.size() == s.test_rows);
    CHECK(a.at(2, 7).size() == 50);
  }

  TEST_CASE("overlap allocation hits the target") {
    AllocationSpec s;
    s.mode = AllocationMode::overlap;
    s.rows = 100;
    s.overlap = 0.5;
    const auto a = allocate_data(s, 8, 1, 4);
    CHECK(redundancy_rate(a.per_epoch[0]) == doctest::Approx(0.5).epsilon(0.02));
    CHECK(overlap_rate(a.per_epoch[0]) == doctest::Approx(0.5).epsilon(0.02));
    // Every node shares rows with someone.
    for (std::size_t i = 0; i < 8; ++i) {
      std::vector<Dataset> pair{a.per_epoch[0][i], a.per_epoch[0][(i + 1) % 8]};
      CHECK(redundancy_rate(pair) > 0.0);
    }
  }

  TEST_CASE("dynamic allocation grows every epoch") {
    AllocationSpec s;
    s.mode = AllocationMode::dynamic;
    s.rows = 60;
    s.growth = {1.0, 1.1, 1.2, 1.3};
    const auto a = allocate_data(s, 4, 5, 5);
    REQUIRE(a.per_epoch.size() == 5);
    double last = -1.0;
    for (std::uint64_t e = 1; e <= 5; ++e) {
      const double r = uneven_rate(counts_of(a.per_epoch[e - 1]));
      CHECK(r > last);
      last = r;
      // A node's data only grows.
      if (e > 1) CHECK(a.at(3, e).size() >= a.at(3, e - 1).size());
    }
  }

  TEST_CASE("imbalance allocation meets the target rate") {
    AllocationSpec s;
    s.mode = AllocationMode::imbalance;
    s.rows = 100;
    s.uneven_rate = 10.0;
    const auto a = allocate_data(s, 4, 1, 6);
    CHECK(uneven_rate(counts_of(a.per_epoch[0])) == doctest::Approx(10.0).epsilon(0.05));
    s.uneven_rate = 1000.0;
    CHECK_THROWS_AS(allocate_data(s, 4, 1, 6), ConfigError);
  }

  TEST_CASE("excluded node metrics") {
    auto cfg = small_scenario();
    ScenarioData data(cfg);
    RunResult run;
    EpochOutcome o;
    o.epoch = 1;
    o.lock_tick = 40;
    const std::vector<NodeId> members{NodeId{0}, NodeId{1}, NodeId{2}};
    o.locked.settlement = settle_rewards(1, members, {1.0, 1.0, 1.0}, {}, cfg.protocol.sharing_ids(),
                                         cfg.protocol.pool, cfg.protocol.deposit);
    run.epochs[1] = o;
    const auto m = compute_metrics(run, data, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].max_diff == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(m[0].sys_diff == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(m[0].sys_diff >= m[0].max_diff);
    CHECK(m[0].members == members);
    CHECK(m[0].lock_latency == 40);
  }

  TEST_CASE("metrics csv") {
    auto cfg = small_scenario();
    const auto r = run_scenario(cfg);
    REQUIRE(r.exit_code == 0);
    std::ostringstream os;
    emit_csv(r.metrics, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == kMetricsHeader);
    std::size_t rows = 0;
    while (std::getline(is, line)) {
      ++rows;
      std::stringstream fields(line);
      std::string f;
      std::size_t count = 0;
      while (std::getline(fields, f, ',')) {
        CHECK(std::isfinite(std::stod(f)));
        ++count;
      }
      CHECK(count == 7);
    }
    CHECK(rows == cfg.protocol.epochs);
    CHECK_THROWS(emit_csv(r.metrics, fs::path("/nonexistent_dir/x/metrics.csv")));
  }

  TEST_CASE("honest run writes conserved ledgers and clean transcripts") {
    auto cfg = small_scenario();
    const auto dir = scratch("honest");
    const auto r = run_scenario(cfg, dir);
    CHECK(r.exit_code == 0);
    for (const char* f : {"metrics.csv", "ledger.jsonl", "contribution.jsonl", "trace.jsonl",
                          "events.jsonl", "run.json", "config.yaml"}) {
      CHECK(fs::exists(dir / f));
    }
    std::ifstream ledger(dir / "ledger.jsonl");
    std::string line;
    std::size_t epochs = 0;
    while (std::getline(ledger, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j.at("conserved").get<bool>());
      ++epochs;
    }
    CHECK(epochs == cfg.protocol.epochs);
    std::ostringstream log;
    CHECK(verify_transcripts(dir, log) == 0);
    fs::remove_all(dir);
  }

  TEST_CASE("same seed gives byte-identical artifacts") {
    auto cfg = small_scenario();
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    run_scenario(cfg, a);
    run_scenario(cfg, b);
    for (const char* f : {"metrics.csv", "ledger.jsonl", "contribution.jsonl", "trace.jsonl",
                          "events.jsonl", "run.json"}) {
      CAPTURE(f);
      CHECK(slurp(a / f) == slurp(b / f));
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }

  TEST_CASE("falsified data is caught and forfeits") {
    auto cfg = small_scenario();
    AdversaryBehavior bad;
    bad.kind = AdversaryKind::data_falsify;
    cfg.sharing_faults = {{2, bad}};
    cfg.f = 0.25;
    const auto r = run_scenario(cfg);
    CHECK(r.exit_code == 0);
    bool forfeited = false;
    for (const auto& m : r.metrics) {
      for (auto id : m.forfeited) forfeited |= id == NodeId{2};
    }
    CHECK(forfeited);
  }
}
