// Command line front end: run one scenario, run preset suites, or audit
// verification transcripts.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pod/harness.hpp"

namespace {

void summarize(const std::string& name, const pod::ScenarioResult& r, double seconds) {
  double max_sys = 0.0;
  double max_max = 0.0;
  double last_acc = 0.0;
  for (const auto& m : r.metrics) {
    max_sys = std::max(max_sys, m.sys_diff);
    max_max = std::max(max_max, m.max_diff);
    last_acc = m.acc;
  }
  std::printf("%-20s exit=%d epochs=%zu acc=%.4f max_sys_diff=%.4f max_max_diff=%.4f "
              "msgs=%llu ticks=%llu %.2fs\n",
              name.c_str(), r.exit_code, r.metrics.size(), last_acc, max_sys, max_max,
              static_cast<unsigned long long>(r.run.messages),
              static_cast<unsigned long long>(r.run.end_tick), seconds);
  for (const auto& v : r.run.violations) std::printf("  violation: %s\n", v.c_str());
  if (!r.run.error.empty()) std::printf("  error: %s\n", r.run.error.c_str());
}

pod::ScenarioResult timed(const pod::ScenarioConfig& cfg,
                          const std::optional<std::filesystem::path>& out, double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = pod::run_scenario(cfg, out);
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proof-of-data consensus simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run one scenario from a YAML config or preset name");
  run->add_option("config", config_path, "Config file, or preset:<name>")->required();
  run->add_option("--seed", seed, "Root seed (overrides the config)");
  run->add_option("--out", out_dir, "Artifact directory");

  std::vector<std::string> presets;
  std::string suite_out;
  std::optional<std::uint64_t> suite_seed;
  auto* suite = app.add_subcommand("suite", "Run named presets (all when none given)");
  suite->add_option("presets", presets, "Preset names");
  suite->add_option("--seed", suite_seed, "Root seed for every preset");
  suite->add_option("--out", suite_out, "Directory receiving one subdirectory per preset");

  std::string transcripts_dir;
  auto* verify = app.add_subcommand("verify-transcripts",
                                    "Check that no server-side record reveals a raw datum");
  verify->add_option("dir", transcripts_dir, "Run output directory")->required();

  std::string dump_name;
  auto* dump = app.add_subcommand("preset", "Print a preset as YAML, or list presets");
  dump->add_option("name", dump_name, "Preset name");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      pod::ScenarioConfig cfg = config_path.rfind("preset:", 0) == 0
                                    ? pod::preset(config_path.substr(7))
                                    : pod::load_config(config_path);
      if (seed) cfg.seed = *seed;
      std::optional<std::filesystem::path> out;
      if (!out_dir.empty()) out = out_dir;
      double seconds = 0.0;
      const auto r = timed(cfg, out, seconds);
      summarize(cfg.name, r, seconds);
      return r.exit_code;
    }
    if (*suite) {
      if (presets.empty()) presets = pod::preset_names();
      int worst = 0;
      for (const auto& name : presets) {
        auto cfg = pod::preset(name);
        if (suite_seed) cfg.seed = *suite_seed;
        std::optional<std::filesystem::path> out;
        if (!suite_out.empty()) out = std::filesystem::path(suite_out) / name;
        double seconds = 0.0;
        const auto r = timed(cfg, out, seconds);
        summarize(name, r, seconds);
        worst = std::max(worst, r.exit_code);
      }
      return worst;
    }
    if (*verify) {
      const auto violations = pod::verify_transcripts(transcripts_dir, std::cout);
      std::cout << (violations == 0 ? "transcripts clean" : "transcripts leak raw data") << '\n';
      return violations == 0 ? 0 : 1;
    }
    if (*dump) {
      if (dump_name.empty()) {
        for (const auto& n : pod::preset_names()) std::cout << n << '\n';
      } else {
        std::cout << pod::to_yaml(pod::preset(dump_name));
      }
      return 0;
    }
  } catch (const pod::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 70;
  }
  return 0;
}
