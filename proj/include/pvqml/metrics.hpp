#pragma once

// Point-forecast error metrics.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace pvqml::metrics {

inline constexpr double kMapeEpsilon = 1e-8;

struct MetricsReport {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double mape = 0.0;
  double vaf = 0.0;  // percent
  double r2 = 0.0;
  std::size_t n = 0;
  /// False when Var(truth) == 0 or n < 2; vaf and r2 are then NaN.
  bool variance_defined = true;
};

/// Metrics of predictions `pred` against `truth`. Throws ShapeError on length
/// mismatch or empty input.
MetricsReport compute_metrics(std::span<const double> pred, std::span<const double> truth);

/// Mean and population standard deviation of each metric over folds.
struct MetricsAggregate {
  MetricsReport mean;
  MetricsReport stddev;
  std::size_t count = 0;
};

MetricsAggregate aggregate(std::span<const MetricsReport> reports);

void to_json(nlohmann::json& j, const MetricsReport& r);
void to_json(nlohmann::json& j, const MetricsAggregate& a);

/// Flat `key=value` lines, NaN written as "nan".
std::string to_key_value(const MetricsReport& r);

}  // namespace pvqml::metrics
