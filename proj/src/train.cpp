#include "pvqml/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "parallel.hpp"
#include "pvqml/error.hpp"

namespace pvqml::train {

using data::TimeSeriesFrame;
using data::WindowedDataset;
using models::Model;
using models::ModelKind;

using detail::parallel_for;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dataset_loss(const Model& model, const WindowedDataset& ds) {
  if (ds.count == 0) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t i = 0; i < ds.count; ++i) {
    s += mse_loss(model.predict(ds.input(i), ds.window, ds.horizon), ds.target(i));
  }
  return s / static_cast<double>(ds.count);
}

// Keeps the last ceil(fraction * n) indices (the most recent samples).
std::vector<std::size_t> keep_recent(std::vector<std::size_t> idx, double fraction,
                                     std::size_t batch_size) {
  if (fraction >= 1.0) return idx;
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(idx.size())));
  if (keep < batch_size || keep == 0) {
    throw ContractError("training fraction " + std::to_string(fraction) + " leaves " +
                        std::to_string(keep) + " samples, fewer than one batch of " +
                        std::to_string(batch_size));
  }
  return {idx.end() - static_cast<long>(keep), idx.end()};
}

// Scaler over every frame row touched by the given windows.
data::ScalerStats fit_on_windows(const TimeSeriesFrame& frame, std::span<const std::size_t> samples,
                                 std::size_t window, std::size_t horizon, std::size_t stride) {
  std::vector<char> used(frame.size(), 0);
  for (std::size_t i : samples) {
    const std::size_t r0 = i * stride;
    for (std::size_t r = r0; r < r0 + window + horizon && r < frame.size(); ++r) used[r] = 1;
  }
  TimeSeriesFrame sub;
  for (std::size_t r = 0; r < frame.size(); ++r) {
    if (used[r]) {
      sub.timestamps.push_back(frame.timestamps[r]);
      sub.rows.push_back(frame.rows[r]);
    }
  }
  return data::fit_scaler(sub, 0, sub.size());
}

void evaluate_into(FoldResult& out, const WindowedDataset& test) {
  const auto pred = predict_dataset(out.result->model, test);
  out.test_metrics = metrics::compute_metrics(pred, test.targets);
  out.persistence_metrics = metrics::compute_metrics(persistence_baseline(test), test.targets);
}

}  // namespace

// ---------------------------------------------------------------- config

models::ModelDescriptor TrainConfig::resolved_descriptor() const {
  auto d = descriptor ? *descriptor : models::default_descriptor(model);
  d.kind = model;
  if (!models::is_sequence_model(model)) d.window = window;
  return d;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
  if (window == 0 || horizon == 0 || stride == 0) {
    throw ConfigError("window, horizon and stride must be positive");
  }
  if (!models::is_sequence_model(model) && horizon != 1) {
    throw ConfigError("hour-ahead models use horizon 1");
  }
  if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be positive");
  if (!(holdout_train_share > 0.0 && holdout_train_share < 1.0)) {
    throw ConfigError("hold-out train share must lie in (0, 1)");
  }
}

TrainConfig default_train_config(ModelKind kind) {
  TrainConfig c;
  c.model = kind;
  switch (kind) {
    case ModelKind::Mlp:
      c.learning_rate = 1e-2;
      c.epochs = 20;
      break;
    case ModelKind::Hqnn:
      c.learning_rate = 3e-2;
      c.epochs = 20;
      break;
    case ModelKind::Lstm:
      c.learning_rate = 0.5e-2;
      c.epochs = 60;
      c.clip_gradients = true;
      break;
    case ModelKind::HqLstm:
      c.learning_rate = 0.52e-2;
      c.epochs = 60;
      c.clip_gradients = true;
      break;
    case ModelKind::Seq2Seq:
    case ModelKind::HqSeq2Seq:
      c.learning_rate = 1e-3;
      c.epochs = 15;
      c.window = 96;
      c.horizon = 96;
      c.clip_gradients = true;
      break;
  }
  return c;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"model", models::to_string(c.model)},
                     {"learning_rate", c.learning_rate},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"patience", c.patience},
                     {"folds", c.folds},
                     {"buffer", c.buffer},
                     {"window", c.window},
                     {"horizon", c.horizon},
                     {"stride", c.stride},
                     {"seed", c.seed},
                     {"fraction", c.fraction},
                     {"clip_gradients", c.clip_gradients},
                     {"clip_norm", c.clip_norm},
                     {"workers", c.workers},
                     {"holdout_train_share", c.holdout_train_share}};
}

// ---------------------------------------------------------------- optimiser

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw ShapeError("mse: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(target.size()) + " targets");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st,
               double lr) {
  if (params.size() != grads.size() || st.m.size() != params.size() ||
      st.v.size() != params.size()) {
    throw ShapeError("adam: parameter, gradient and moment lengths differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw TrainingError("non-finite gradient at parameter " + std::to_string(i) +
                          " (Adam step " + std::to_string(st.step + 1) + ")");
    }
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grads[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grads[i] * grads[i];
    params[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + st.eps);
  }
}

double clip_by_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) g *= s;
  }
  return norm;
}

// ---------------------------------------------------------------- training

TrainResult train_model(const TrainConfig& cfg, const WindowedDataset& train_set,
                        const WindowedDataset& test_set) {
  cfg.validate();
  if (train_set.count == 0) throw ContractError("empty training set");
  Model model(cfg.resolved_descriptor());
  model.initialize(cfg.seed);

  std::mt19937_64 shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
  std::mt19937_64 dropout_rng(cfg.seed * 0xC2B2AE3D27D4EB4FULL + 2);
  AdamState adam(model.param_count());
  std::vector<double> grad(model.param_count());
  std::vector<std::size_t> order(train_set.count);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult res{model, {}, 0, kInf, false, {}};
  try {
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      double loss_sum = 0.0;
      for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
        const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t k = b0; k < b1; ++k) {
          const std::size_t i = order[k];
          ad::Tape tape(model.params());
          auto y = model.forward(tape, train_set.input(i), train_set.window, train_set.horizon,
                                 &dropout_rng);
          auto loss = ad::mse(y, train_set.target(i));
          if (!std::isfinite(loss.item())) {
            throw TrainingError("non-finite training loss in epoch " + std::to_string(epoch));
          }
          loss_sum += loss.item();
          tape.backward(loss);
          tape.accumulate_param_grad(grad);
        }
        const double inv = 1.0 / static_cast<double>(b1 - b0);
        for (auto& g : grad) g *= inv;
        if (cfg.clip_gradients) clip_by_norm(grad, cfg.clip_norm);
        adam_step(model.params().values(), grad, adam, cfg.learning_rate);
      }
      EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), 0.0};
      rec.test_loss = test_set.count ? dataset_loss(model, test_set) : rec.train_loss;
      if (!std::isfinite(rec.test_loss)) {
        res.history.push_back(rec);
        throw TrainingError("non-finite test loss in epoch " + std::to_string(epoch));
      }
      res.history.push_back(rec);
      if (rec.test_loss < res.best_test_loss) {
        res.best_test_loss = rec.test_loss;
        res.best_epoch = epoch;
        res.model = model;
      } else if (cfg.patience && epoch - res.best_epoch >= cfg.patience) {
        break;
      }
    }
  } catch (const TrainingError& e) {
    res.diverged = true;
    res.message = e.what();
  }
  return res;
}

std::vector<double> predict_dataset(const Model& model, const WindowedDataset& ds) {
  std::vector<double> out;
  out.reserve(ds.count * ds.horizon);
  for (std::size_t i = 0; i < ds.count; ++i) {
    const auto y = model.predict(ds.input(i), ds.window, ds.horizon);
    out.insert(out.end(), y.begin(), y.end());
  }
  return out;
}

std::vector<double> persistence_baseline(const WindowedDataset& ds) {
  if (ds.window < 24) throw ContractError("persistence baseline needs a window of at least 24 hours");
  std::vector<double> out;
  out.reserve(ds.count * ds.horizon);
  for (std::size_t i = 0; i < ds.count; ++i) {
    const auto in = ds.input(i);
    for (std::size_t k = 0; k < ds.horizon; ++k) {
      const std::size_t row = ds.window - 24 + k % 24;
      out.push_back(in[row * ds.features + data::kPowerColumn]);
    }
  }
  return out;
}

std::string history_csv(std::span<const EpochRecord> history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,test_loss\n";
  for (const auto& r : history) os << r.epoch << ',' << r.train_loss << ',' << r.test_loss << '\n';
  return os.str();
}

// ---------------------------------------------------------------- protocols

CrossValidationResult cross_validate(const TrainConfig& cfg, const TimeSeriesFrame& frame) {
  cfg.validate();
  const std::size_t n = data::window_count(frame.size(), cfg.window, cfg.horizon, cfg.stride);
  const auto plan = data::kfold_plan(n, cfg.folds, cfg.buffer);

  CrossValidationResult out;
  out.folds.resize(plan.folds.size());
  parallel_for(plan.folds.size(), cfg.workers, [&](std::size_t f) {
    FoldResult& fr = out.folds[f];
    fr.fold = f;
    try {
      const auto train_idx = keep_recent(plan.folds[f].train, cfg.fraction, cfg.batch_size);
      fr.scaler = fit_on_windows(frame, train_idx, cfg.window, cfg.horizon, cfg.stride);
      const auto ds = data::window(data::apply_scaler(frame, fr.scaler), cfg.window, cfg.horizon,
                                   cfg.stride);
      const auto train_ds = ds.select(train_idx);
      const auto test_ds = ds.select(plan.folds[f].test);
      fr.train_samples = train_ds.count;
      fr.test_samples = test_ds.count;
      TrainConfig fold_cfg = cfg;
      fold_cfg.seed = cfg.seed + f;
      fr.result = train_model(fold_cfg, train_ds, test_ds);
      if (fr.result->diverged) {
        fr.error = fr.result->message;
      } else {
        evaluate_into(fr, test_ds);
        fr.ok = true;
      }
    } catch (const std::exception& e) {
      fr.error = e.what();
    }
  });

  std::vector<metrics::MetricsReport> ok;
  for (const auto& fr : out.folds) {
    if (fr.ok) {
      ok.push_back(fr.test_metrics);
    } else {
      out.partial = true;
    }
  }
  out.aggregate = metrics::aggregate(ok);
  return out;
}

FoldResult run_holdout(const TrainConfig& cfg, const TimeSeriesFrame& frame) {
  cfg.validate();
  FoldResult fr;
  const auto cut = static_cast<std::size_t>(
      std::llround(cfg.holdout_train_share * static_cast<double>(frame.size())));
  if (cut == 0 || cut >= frame.size()) throw ContractError("hold-out split leaves one side empty");
  auto [train_frame, test_frame] = data::chronological_split(frame, frame.timestamps[cut]);

  const std::size_t n_train = data::window_count(train_frame.size(), cfg.window, cfg.horizon, cfg.stride);
  std::vector<std::size_t> idx(n_train);
  for (std::size_t i = 0; i < n_train; ++i) idx[i] = i;
  idx = keep_recent(std::move(idx), cfg.fraction, cfg.batch_size);

  fr.scaler = fit_on_windows(train_frame, idx, cfg.window, cfg.horizon, cfg.stride);
  const auto train_ds = data::window(data::apply_scaler(train_frame, fr.scaler), cfg.window,
                                     cfg.horizon, cfg.stride)
                            .select(idx);
  const auto test_ds = data::window(data::apply_scaler(test_frame, fr.scaler), cfg.window,
                                    cfg.horizon, cfg.stride);
  fr.train_samples = train_ds.count;
  fr.test_samples = test_ds.count;
  fr.result = train_model(cfg, train_ds, test_ds);
  if (fr.result->diverged) {
    fr.error = fr.result->message;
    return fr;
  }
  evaluate_into(fr, test_ds);
  fr.ok = true;
  return fr;
}

std::vector<ReducedDataRow> reduced_data_experiment(std::span<const TrainConfig> configs,
                                                    const TimeSeriesFrame& frame,
                                                    std::span<const double> fractions) {
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ContractError("fractions must lie in (0, 1]");
  }
  std::vector<ReducedDataRow> rows;
  for (const auto& c : configs) {
    for (double f : fractions) rows.push_back({c.model, f, {}});
  }
  const std::size_t workers = configs.empty() ? 1 : configs.front().workers;
  std::vector<std::exception_ptr> errors(rows.size());
  parallel_for(rows.size(), workers, [&](std::size_t r) {
    try {
      TrainConfig c = configs[r / fractions.size()];
      c.fraction = rows[r].fraction;
      rows[r].run = run_holdout(c, frame);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

void to_json(nlohmann::json& j, const FoldResult& f) {
  j = nlohmann::json{{"fold", f.fold},
                     {"ok", f.ok},
                     {"train_samples", f.train_samples},
                     {"test_samples", f.test_samples}};
  if (!f.error.empty()) j["error"] = f.error;
  if (f.ok) {
    j["test"] = f.test_metrics;
    j["persistence"] = f.persistence_metrics;
  }
  if (f.result) {
    j["best_epoch"] = f.result->best_epoch;
    j["best_test_loss"] = f.result->best_test_loss;
    j["epochs_run"] = f.result->history.size();
    j["diverged"] = f.result->diverged;
  }
}

void to_json(nlohmann::json& j, const CrossValidationResult& r) {
  j = nlohmann::json{{"partial", r.partial}, {"aggregate", r.aggregate}};
  auto& folds = j["folds"] = nlohmann::json::array();
  for (const auto& f : r.folds) folds.push_back(f);
}

}  // namespace pvqml::train
