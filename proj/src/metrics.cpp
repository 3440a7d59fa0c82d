#include "pvqml/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pvqml/error.hpp"

namespace pvqml::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_variance(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

nlohmann::json number(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

MetricsReport compute_metrics(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("metrics: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " targets");
  }
  if (pred.empty()) throw ShapeError("metrics: empty prediction set");
  const std::size_t n = pred.size();
  const double dn = static_cast<double>(n);

  MetricsReport r;
  r.n = n;
  std::vector<double> err(n);
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    err[i] = truth[i] - pred[i];
    const double a = std::abs(err[i]);
    abs_sum += a;
    sq_sum += err[i] * err[i];
    pct_sum += a / std::max(std::abs(truth[i]), kMapeEpsilon);
  }
  r.mae = abs_sum / dn;
  r.mse = sq_sum / dn;
  r.rmse = std::sqrt(r.mse);
  r.mape = pct_sum / dn;

  const double var_y = n >= 2 ? population_variance(truth) : 0.0;
  if (n < 2 || var_y == 0.0) {
    r.variance_defined = false;
    r.vaf = kNaN;
    r.r2 = kNaN;
    return r;
  }
  r.vaf = (1.0 - population_variance(err) / var_y) * 100.0;
  r.r2 = 1.0 - sq_sum / (var_y * dn);
  return r;
}

MetricsAggregate aggregate(std::span<const MetricsReport> reports) {
  MetricsAggregate a;
  a.count = reports.size();
  if (reports.empty()) return a;
  using Field = double MetricsReport::*;
  static constexpr Field fields[] = {&MetricsReport::mae,  &MetricsReport::mse,
                                     &MetricsReport::rmse, &MetricsReport::mape,
                                     &MetricsReport::vaf,  &MetricsReport::r2};
  std::vector<double> v(reports.size());
  for (Field f : fields) {
    for (std::size_t i = 0; i < reports.size(); ++i) v[i] = reports[i].*f;
    a.mean.*f = mean_of(v);
    a.stddev.*f = std::sqrt(population_variance(v));
  }
  a.mean.n = a.stddev.n = 0;
  for (const auto& r : reports) {
    a.mean.n += r.n;
    a.mean.variance_defined = a.mean.variance_defined && r.variance_defined;
  }
  a.stddev.variance_defined = a.mean.variance_defined;
  return a;
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json{{"mae", r.mae},
                     {"mse", r.mse},
                     {"rmse", r.rmse},
                     {"mape", r.mape},
                     {"vaf", number(r.vaf)},
                     {"r2", number(r.r2)},
                     {"n", r.n},
                     {"variance_defined", r.variance_defined}};
}

void to_json(nlohmann::json& j, const MetricsAggregate& a) {
  j = nlohmann::json{{"folds", a.count}, {"mean", a.mean}, {"std", a.stddev}};
}

std::string to_key_value(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(17);
  auto put = [&](const char* k, double v) {
    os << k << '=';
    if (std::isnan(v)) {
      os << "nan";
    } else {
      os << v;
    }
    os << '\n';
  };
  put("mae", r.mae);
  put("mse", r.mse);
  put("rmse", r.rmse);
  put("mape", r.mape);
  put("vaf", r.vaf);
  put("r2", r.r2);
  os << "n=" << r.n << '\n' << "variance_defined=" << (r.variance_defined ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace pvqml::metrics
