#pragma once

// Optimiser, training loop with best-checkpoint selection, purged
// cross-validation and the reduced-training-data experiment.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pvqml/data.hpp"
#include "pvqml/metrics.hpp"
#include "pvqml/models.hpp"

namespace pvqml::train {

struct TrainConfig {
  models::ModelKind model = models::ModelKind::Mlp;
  /// Architecture override; default_descriptor(model) when empty.
  std::optional<models::ModelDescriptor> descriptor;
  double learning_rate = 1e-2;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  /// Stop after this many epochs without a test-loss improvement (0: never).
  std::size_t patience = 0;
  std::size_t folds = 5;
  std::size_t buffer = 24;
  std::size_t window = 24;
  std::size_t horizon = 1;
  std::size_t stride = 1;
  std::uint64_t seed = 1;
  double fraction = 1.0;
  bool clip_gradients = false;
  double clip_norm = 10.0;
  std::size_t workers = 1;
  /// Share of rows in the training side of a chronological hold-out split.
  double holdout_train_share = 0.8;

  models::ModelDescriptor resolved_descriptor() const;
  /// Throws ConfigError for non-positive rates, zero epochs or batch, or a
  /// fraction outside (0, 1].
  void validate() const;
};

/// Per-model defaults: learning rates and epochs of the hour-ahead models,
/// 15 epochs at 1e-3 with W = H = 96 for the sequence models; LSTM-family
/// models clip gradients.
TrainConfig default_train_config(models::ModelKind kind);

void to_json(nlohmann::json& j, const TrainConfig& c);

/// mean((pred - target)^2); throws ShapeError on mismatch or empty input.
double mse_loss(std::span<const double> pred, std::span<const double> target);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update in place. Throws TrainingError when a
/// gradient is not finite, leaving params and state untouched.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr);

/// Scales `grads` so their L2 norm is at most `max_norm`; returns the
/// original norm.
double clip_by_norm(std::span<double> grads, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
};

struct TrainResult {
  models::Model model;  // parameters of the best test-loss epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_test_loss = 0.0;
  bool diverged = false;
  std::string message;
};

/// Trains a freshly initialised model on `train_set`, evaluating on
/// `test_set` after every epoch. A non-finite loss or gradient stops training
/// and returns the last best checkpoint with diverged = true.
TrainResult train_model(const TrainConfig& cfg, const data::WindowedDataset& train_set,
                        const data::WindowedDataset& test_set);

/// Flattened count x horizon predictions.
std::vector<double> predict_dataset(const models::Model& model, const data::WindowedDataset& ds);

/// Repeats the power observed 24 hours before each target hour, cycling the
/// last 24 input hours for horizons longer than a day. Needs window >= 24.
std::vector<double> persistence_baseline(const data::WindowedDataset& ds);

std::string history_csv(std::span<const EpochRecord> history);

struct FoldResult {
  std::size_t fold = 0;
  bool ok = false;
  std::string error;
  std::optional<TrainResult> result;
  data::ScalerStats scaler;
  metrics::MetricsReport test_metrics;
  metrics::MetricsReport persistence_metrics;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
};

struct CrossValidationResult {
  std::vector<FoldResult> folds;
  metrics::MetricsAggregate aggregate;  // over successful folds
  bool partial = false;
};

/// One independent model per fold of a purged k-fold plan over the windows of
/// a cleaned, unscaled frame. Each fold fits its own scaler on the rows its
/// training windows touch. A failing fold is recorded and the rest continue.
CrossValidationResult cross_validate(const TrainConfig& cfg, const data::TimeSeriesFrame& frame);

/// Chronological hold-out: the first `holdout_train_share` of the rows train,
/// the rest test. `fraction` keeps only the most recent training windows.
FoldResult run_holdout(const TrainConfig& cfg, const data::TimeSeriesFrame& frame);

struct ReducedDataRow {
  models::ModelKind model = models::ModelKind::Mlp;
  double fraction = 1.0;
  FoldResult run;
};

/// Trains one model per (config, fraction) cell on the chronological
/// hold-out split; the test set is identical in every cell.
std::vector<ReducedDataRow> reduced_data_experiment(std::span<const TrainConfig> configs,
                                                    const data::TimeSeriesFrame& frame,
                                                    std::span<const double> fractions);

void to_json(nlohmann::json& j, const FoldResult& f);
void to_json(nlohmann::json& j, const CrossValidationResult& r);

}  // namespace pvqml::train
