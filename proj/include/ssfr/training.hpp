#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ssfr/model.hpp"

namespace ssfr {

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 10;
  double learning_rate = 1e-2;
  SmoothingParams smoothing;
  /// Share of the training rows held out for early stopping; 0 disables the
  /// split and early stopping then watches the training risk.
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  /// Frozen blocks keep their current values (e.g. a zero structured part for deep-only fits).
  bool train_structured = true;
  bool train_deep = true;
  /// After training, drop coefficient directions of the structured part that
  /// the training encodings never excite (see drop_unobserved_directions).
  bool drop_unobserved = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_risk = 0.0;
  double val_risk = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  double initial_train_risk = 0.0;
  double initial_val_risk = 0.0;
  std::vector<EpochRecord> epochs;
  int stopped_epoch = 0;
  int best_epoch = 0;
  double best_validation_risk = 0.0;
  double wall_seconds = 0.0;
};

/// sum_i sum_q xi_q (y - mu)^2 / n.
double functional_risk(const RowMatrix& y, const RowMatrix& mu, std::span<const double> xi);

/// Risk of the model on the inputs, evaluated in row chunks (dropout off).
double evaluate_risk(const SemiStructuredModel& model, const ModelInputs& inputs, std::span<const double> xi,
                     std::size_t chunk = 256);

/// Batch objective functional_risk + penalty and its gradient in the packed
/// parameter layout. Dropout is active when `dropout_rng` is given.
double objective_and_gradient(const SemiStructuredModel& model, const ModelInputs& batch, std::span<const double> xi,
                              const SmoothingParams& smoothing, Rng* dropout_rng, Vector* gradient);

/// Adam on all trainable parameters with seeded mini-batches, early stopping
/// and restoration of the best parameters. Updates `model` in place.
/// `on_epoch`, if set, sees every epoch record as it is produced.
TrainReport train(SemiStructuredModel& model, const FunctionalDataset& ds, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});
TrainReport train(SemiStructuredModel& model, const ModelInputs& inputs, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

struct GradCheckReport {
  std::size_t num_params = 0;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

/// Central differences (step 1e-5) on every parameter of the full-data
/// objective with dropout off. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-4 * (1 + |objective|)).
GradCheckReport grad_check(const SemiStructuredModel& model, const FunctionalDataset& ds, double tolerance,
                           const SmoothingParams& smoothing = {0.0, 0.0}, double step = 1e-5);

/// JSON-lines record {epoch, train_risk, val_risk, lr, seconds}.
std::string epoch_json_line(const EpochRecord& r);

}  // namespace ssfr
