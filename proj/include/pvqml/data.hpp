#pragma once

// PV time series: CSV ingestion, cleaning, min-max scaling, sliding windows,
// purged fold plans and a synthetic generator.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace pvqml::data {

inline constexpr std::size_t kColumns = 5;
inline constexpr std::array<const char*, kColumns> kColumnNames = {"Ta", "Tm", "I3", "I15", "P"};
inline constexpr std::size_t kPowerColumn = 4;
inline constexpr std::int64_t kHour = 3600;

/// Seconds since 1970-01-01 00:00 of a timezone-less local time.
using Timestamp = std::int64_t;

/// Accepts `YYYY-MM-DD[T| ]HH:MM[:SS]`; throws ParseError otherwise.
Timestamp parse_timestamp(const std::string& text);
std::string format_timestamp(Timestamp t);
/// Timestamp of midnight on the given civil date.
Timestamp make_timestamp(int year, unsigned month, unsigned day, unsigned hour = 0);
/// Whole days since the epoch (floor).
std::int64_t day_index(Timestamp t);

/// Row-major table of timestamps and the five canonical columns. Missing
/// cells are NaN until cleaned.
struct TimeSeriesFrame {
  std::vector<Timestamp> timestamps;
  std::vector<std::array<double, kColumns>> rows;

  std::size_t size() const { return rows.size(); }
  std::vector<double> column(std::size_t c) const;
};

/// Reads a CSV whose header names `timestamp` plus the five columns in any
/// order. Empty, `NA` and `nan` cells become missing values.
TimeSeriesFrame load_csv(const std::string& path);
TimeSeriesFrame parse_csv(const std::string& text, const std::string& source = "<memory>");
void write_csv(const TimeSeriesFrame& frame, const std::string& path);
std::string to_csv(const TimeSeriesFrame& frame);

struct CleanOptions {
  /// Dates (any timestamp on that day) removed before imputation.
  std::vector<Timestamp> excluded_days = {make_timestamp(2013, 12, 31)};
};

struct CleanReport {
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;
  std::size_t rows_excluded = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t hours_inserted = 0;
  std::size_t cells_day_mean = 0;
  std::size_t cells_interpolated = 0;
  std::vector<std::string> excluded_dates;
  Timestamp span_start = 0;
  Timestamp span_end = 0;
};

void to_json(nlohmann::json& j, const CleanReport& r);

/// Trims excluded days at either end, rebuilds an exact hourly grid and fills
/// missing cells with the mean of the same hour on the neighbouring days,
/// falling back to linear interpolation. Throws CleaningError for an excluded
/// day inside the span, a timestamp off the hourly grid, or a gap with no
/// valid value on one side.
TimeSeriesFrame clean(const TimeSeriesFrame& raw, CleanReport* report = nullptr,
                      const CleanOptions& options = {});

struct ScalerStats {
  std::array<double, kColumns> min{};
  std::array<double, kColumns> max{};

  double scale(std::size_t column, double x) const;
  double unscale(std::size_t column, double x) const;
};

void to_json(nlohmann::json& j, const ScalerStats& s);
void from_json(const nlohmann::json& j, ScalerStats& s);

/// Per-column min/max over rows [begin, end). Throws ScalingError for a
/// constant column or an empty range.
ScalerStats fit_scaler(const TimeSeriesFrame& frame, std::size_t begin, std::size_t end);
TimeSeriesFrame apply_scaler(const TimeSeriesFrame& frame, const ScalerStats& stats);
TimeSeriesFrame invert_scaler(const TimeSeriesFrame& frame, const ScalerStats& stats);

/// Supervised samples: input i covers rows [i*s, i*s+W) (all columns) and its
/// target is P over rows [i*s+W, i*s+W+H).
struct WindowedDataset {
  std::size_t window = 0;
  std::size_t horizon = 0;
  std::size_t stride = 1;
  std::size_t features = kColumns;
  std::size_t count = 0;
  std::vector<double> inputs;   // count x window x features
  std::vector<double> targets;  // count x horizon

  std::span<const double> input(std::size_t i) const {
    return {inputs.data() + i * window * features, window * features};
  }
  std::span<const double> target(std::size_t i) const {
    return {targets.data() + i * horizon, horizon};
  }
  /// First frame row of sample i.
  std::size_t row_of(std::size_t i) const { return i * stride; }
  /// Subset in the given order.
  WindowedDataset select(std::span<const std::size_t> indices) const;
};

std::size_t window_count(std::size_t rows, std::size_t window, std::size_t horizon,
                         std::size_t stride);
WindowedDataset window(const TimeSeriesFrame& frame, std::size_t window, std::size_t horizon,
                       std::size_t stride = 1);

struct Fold {
  std::size_t test_begin = 0;  // [test_begin, test_end)
  std::size_t test_end = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  /// Buffer ranges [first, second) excluded from both sets.
  std::vector<std::pair<std::size_t, std::size_t>> excluded;
};

struct FoldPlan {
  std::size_t samples = 0;
  std::size_t buffer = 0;
  std::vector<Fold> folds;
};

/// k contiguous test blocks; training for each fold drops the block and
/// `buffer` samples on each side of it.
FoldPlan kfold_plan(std::size_t samples, std::size_t k = 5, std::size_t buffer = 24);
void to_json(nlohmann::json& j, const FoldPlan& plan);

/// Rows strictly before `boundary` and rows at or after it.
std::pair<TimeSeriesFrame, TimeSeriesFrame> chronological_split(const TimeSeriesFrame& frame,
                                                                Timestamp boundary);

struct SynthOptions {
  Timestamp start = make_timestamp(2012, 3, 5);
  double capacity_kw = 20.0;
};

/// Deterministic pseudo-PV series of `days` full days.
TimeSeriesFrame synth_generate(std::size_t days, std::uint64_t seed,
                               const SynthOptions& options = {});

}  // namespace pvqml::data
