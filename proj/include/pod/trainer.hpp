// Deterministic local training on tabular data and the centralized FedAvg
// baseline.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pod/types.hpp"

namespace pod {

struct Row {
  std::vector<double> features;
  double label = 0.0;
  std::uint64_t id = 0;  // global identity, used for overlap accounting
};

struct Dataset {
  std::vector<Row> rows;
  NodeId owner;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  std::size_t feature_count() const {
    return rows.empty() ? 0 : rows.front().features.size();
  }
  /// Values of one feature column.
  std::vector<double> column(std::size_t feature) const;
};

enum class ModelKind { linear_regression, logistic_classification };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct TrainerConfig {
  ModelKind kind = ModelKind::logistic_classification;
  double learning_rate = 0.1;
  int local_steps = 5;
  std::uint64_t seed = 0;
};

void validate(const TrainerConfig& cfg);

/// Mean training loss: squared error or logistic cross-entropy.
double training_loss(const ModelWeights& w, const Dataset& d, ModelKind kind);

/// Full-batch gradient descent for `cfg.local_steps` steps. An empty dataset
/// returns `w` unchanged.
ModelWeights local_train(const ModelWeights& w, const Dataset& d,
                         const TrainerConfig& cfg);

/// Classification: fraction of rows where sign(w.x) matches the 0/1 label.
/// Regression: coefficient of determination clamped to [0, 1].
double evaluate(const ModelWeights& w, const Dataset& test, ModelKind kind);

/// FedAvg: every round each node trains from the shared weights and the
/// server takes the data-volume-weighted average. Starts from `initial`.
ModelWeights centralized_fedavg(std::span<const Dataset> datasets,
                                const TrainerConfig& cfg, int rounds,
                                const ModelWeights& initial);

/// Columnar text format: header "f0,...,f{q-1},label,id", one row per sample.
void write_dataset_csv(std::ostream& out, const Dataset& d);
Dataset read_dataset_csv(std::istream& in, NodeId owner);

}  // namespace pod
