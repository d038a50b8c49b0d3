// Python bindings: presets, config validation, scenario runs and a few
// metric helpers.
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pod/contribution.hpp"
#include "pod/harness.hpp"
#include "pod/protocol.hpp"
#include "pod/rng.hpp"
#include "pod/verification.hpp"

namespace py = pybind11;

namespace {

pod::ScenarioConfig resolve(const std::string& config) {
  if (config.rfind("preset:", 0) == 0) return pod::preset(config.substr(7));
  return pod::parse_config(config);
}

py::dict metrics_dict(const pod::EpochMetrics& m) {
  py::dict d;
  d["epoch"] = m.epoch;
  d["acc"] = m.acc;
  d["sys_diff"] = m.sys_diff;
  d["max_diff"] = m.max_diff;
  d["lock_latency_ticks"] = m.lock_latency;
  d["msgs_sharing"] = m.msgs_sharing;
  d["msgs_voting"] = m.msgs_voting;
  d["theoretical"] = m.theoretical;
  d["actual"] = m.actual;
  std::vector<std::uint32_t> members;
  for (auto id : m.members) members.push_back(id.value);
  d["members"] = members;
  std::vector<std::uint32_t> forfeited;
  for (auto id : m.forfeited) forfeited.push_back(id.value);
  d["forfeited"] = forfeited;
  return d;
}

py::dict run(const std::string& config, std::optional<std::uint64_t> seed,
             std::optional<std::string> out) {
  auto cfg = resolve(config);
  if (seed) cfg.seed = *seed;
  std::optional<std::filesystem::path> dir;
  if (out) dir = *out;
  pod::ScenarioResult r;
  {
    py::gil_scoped_release release;
    r = pod::run_scenario(cfg, dir);
  }
  py::dict d;
  d["name"] = cfg.name;
  d["exit_code"] = r.exit_code;
  d["safety_ok"] = r.run.safety_ok;
  d["finality_ok"] = r.run.finality_ok;
  d["liveness_ok"] = r.run.liveness_ok;
  d["trace_hash"] = r.run.trace_hash.hex();
  d["messages"] = r.run.messages;
  d["end_tick"] = r.run.end_tick;
  py::list metrics;
  for (const auto& m : r.metrics) metrics.append(metrics_dict(m));
  d["metrics"] = metrics;
  return d;
}

}  // namespace

PYBIND11_MODULE(pypod, m) {
  m.doc() = "Two-layer federated learning consensus simulator";
  m.attr("__version__") = "0.1.0";

  py::register_exception<pod::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("preset_names", &pod::preset_names, "Names of the built-in scenarios.");
  m.def(
      "preset_yaml", [](const std::string& name) { return pod::to_yaml(pod::preset(name)); },
      py::arg("name"), "YAML text of a built-in scenario.");
  m.def(
      "normalize_config", [](const std::string& yaml) { return pod::to_yaml(pod::parse_config(yaml)); },
      py::arg("yaml"), "Validates a YAML config and returns it with every default filled in.");
  m.def("run", &run, py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
        "Runs a scenario given as YAML text or 'preset:<name>'. With `out`, writes the run "
        "artifacts there.");
  m.def(
      "verify_transcripts",
      [](const std::string& dir) {
        std::ostringstream log;
        const auto violations = pod::verify_transcripts(dir, log);
        return py::make_tuple(violations, log.str());
      },
      py::arg("dir"), "Scans a run directory's transcripts; returns (violations, log).");
  m.def(
      "uneven_rate",
      [](const std::vector<std::uint64_t>& counts) { return pod::uneven_rate(counts); },
      py::arg("counts"));
  m.def("threshold_count", &pod::threshold_count, py::arg("tau"), py::arg("active"),
        "Smallest merge list size that satisfies the threshold.");
  m.def(
      "split_secret",
      [](std::uint64_t datum, std::uint64_t phi, std::uint64_t seed) {
        pod::Rng rng(seed);
        const auto s = pod::split_secret(datum, phi, rng);
        return py::make_tuple(s.u, s.v);
      },
      py::arg("datum"), py::arg("phi") = pod::kDefaultModulus, py::arg("seed") = 0);
}
