#include "pod/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pod {

namespace {

double dot(const std::vector<double>& w, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * x[k];
  return s;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_dims(const ModelWeights& w, const Dataset& d) {
  for (const auto& row : d.rows) {
    if (row.features.size() != w.size()) {
      throw std::invalid_argument("weights dimension " + std::to_string(w.size()) +
                                  " does not match " +
                                  std::to_string(row.features.size()) + " features");
    }
  }
}

}  // namespace

std::vector<double> Dataset::column(std::size_t feature) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.features.at(feature));
  return out;
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::linear_regression ? "linear" : "logistic";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "linear" || text == "linear_regression") return ModelKind::linear_regression;
  if (text == "logistic" || text == "logistic_classification") {
    return ModelKind::logistic_classification;
  }
  throw std::invalid_argument("unknown model kind '" + text + "'");
}

void validate(const TrainerConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw std::invalid_argument("learning rate must be positive");
  }
  if (cfg.local_steps < 1) throw std::invalid_argument("local steps must be >= 1");
}

double training_loss(const ModelWeights& w, const Dataset& d, ModelKind kind) {
  check_dims(w, d);
  if (d.empty()) return 0.0;
  double total = 0.0;
  for (const auto& row : d.rows) {
    const double z = dot(w.values, row.features);
    if (kind == ModelKind::linear_regression) {
      total += (z - row.label) * (z - row.label);
    } else {
      // log(1 + e^z) - y z, computed stably
      const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      total += softplus - row.label * z;
    }
  }
  return total / static_cast<double>(d.size());
}

ModelWeights local_train(const ModelWeights& w, const Dataset& d,
                         const TrainerConfig& cfg) {
  validate(cfg);
  check_dims(w, d);
  if (d.empty()) return w;
  ModelWeights cur = w;
  std::vector<double> grad(w.size());
  const double inv_n = 1.0 / static_cast<double>(d.size());
  for (int step = 0; step < cfg.local_steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& row : d.rows) {
      const double z = dot(cur.values, row.features);
      const double g = cfg.kind == ModelKind::linear_regression
                           ? 2.0 * (z - row.label)
                           : sigmoid(z) - row.label;
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g * row.features[k];
    }
    for (std::size_t k = 0; k < grad.size(); ++k) {
      cur.values[k] -= cfg.learning_rate * grad[k] * inv_n;
    }
  }
  if (!cur.all_finite()) throw std::runtime_error("training diverged to non-finite weights");
  return cur;
}

double evaluate(const ModelWeights& w, const Dataset& test, ModelKind kind) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  check_dims(w, test);
  if (kind == ModelKind::logistic_classification) {
    std::size_t correct = 0;
    for (const auto& row : test.rows) {
      const double predicted = dot(w.values, row.features) > 0.0 ? 1.0 : 0.0;
      if (predicted == row.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
  }
  double mean = 0.0;
  for (const auto& row : test.rows) mean += row.label;
  mean /= static_cast<double>(test.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& row : test.rows) {
    const double e = dot(w.values, row.features) - row.label;
    ss_res += e * e;
    ss_tot += (row.label - mean) * (row.label - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
}

ModelWeights centralized_fedavg(std::span<const Dataset> datasets,
                                const TrainerConfig& cfg, int rounds,
                                const ModelWeights& initial) {
  std::uint64_t total = 0;
  for (const auto& d : datasets) total += d.size();
  if (total == 0) throw std::invalid_argument("centralized_fedavg: zero total data volume");
  ModelWeights global = initial;
  for (int r = 0; r < rounds; ++r) {
    ModelWeights next;
    next.values.assign(global.size(), 0.0);
    for (const auto& d : datasets) {
      if (d.empty()) continue;
      const auto local = local_train(global, d, cfg);
      const double share = static_cast<double>(d.size()) / static_cast<double>(total);
      for (std::size_t k = 0; k < next.size(); ++k) next.values[k] += share * local.values[k];
    }
    global = std::move(next);
  }
  return global;
}

void write_dataset_csv(std::ostream& out, const Dataset& d) {
  const auto q = d.feature_count();
  for (std::size_t k = 0; k < q; ++k) out << 'f' << k << ',';
  out << "label,id\n";
  out << std::setprecision(17);
  for (const auto& row : d.rows) {
    for (double v : row.features) out << v << ',';
    out << row.label << ',' << row.id << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in, NodeId owner) {
  Dataset d;
  d.owner = owner;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: missing header");
  std::size_t columns = std::count(line.begin(), line.end(), ',') + 1;
  if (columns < 2 || line.find("label,id") == std::string::npos) {
    throw std::runtime_error("dataset: malformed header '" + line + "'");
  }
  const std::size_t q = columns - 2;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Row row;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) throw std::runtime_error("dataset: ragged row");
    for (std::size_t k = 0; k < q; ++k) row.features.push_back(std::stod(cells[k]));
    row.label = std::stod(cells[q]);
    row.id = std::stoull(cells[q + 1]);
    d.rows.push_back(std::move(row));
  }
  return d;
}

}  // namespace pod
