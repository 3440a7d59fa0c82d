#include "pvqml/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "pvqml/error.hpp"

namespace pvqml::data {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '"')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '"')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_uint(std::string_view s, unsigned& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::string shortest(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace

// ---------------------------------------------------------------- time

Timestamp make_timestamp(int year, unsigned month, unsigned day, unsigned hour) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) throw ParseError("invalid calendar date");
  const sys_days d{ymd};
  return static_cast<Timestamp>(d.time_since_epoch().count()) * 86400 +
         static_cast<Timestamp>(hour) * kHour;
}

std::int64_t day_index(Timestamp t) {
  return t >= 0 ? t / 86400 : -((-t + 86399) / 86400);
}

Timestamp parse_timestamp(const std::string& text) {
  // YYYY-MM-DD[T ]HH:MM[:SS]
  const std::string s = trim(text);
  auto fail = [&]() -> Timestamp { throw ParseError("malformed timestamp '" + s + "'"); };
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':') {
    return fail();
  }
  unsigned y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  std::string_view v(s);
  if (!parse_uint(v.substr(0, 4), y) || !parse_uint(v.substr(5, 2), mo) ||
      !parse_uint(v.substr(8, 2), d) || !parse_uint(v.substr(11, 2), h) ||
      !parse_uint(v.substr(14, 2), mi)) {
    return fail();
  }
  if (s.size() > 16) {
    if (s.size() != 19 || s[16] != ':' || !parse_uint(v.substr(17, 2), sec)) return fail();
  }
  if (h > 23 || mi > 59 || sec > 59) return fail();
  const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(y)},
                                        std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok()) return fail();
  return make_timestamp(static_cast<int>(y), mo, d, h) + mi * 60 + sec;
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto days_since = day_index(t);
  const year_month_day ymd{sys_days{std::chrono::days{days_since}}};
  const auto rem = t - days_since * 86400;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

std::vector<double> TimeSeriesFrame::column(std::size_t c) const {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i].at(c);
  return out;
}

// ---------------------------------------------------------------- csv

TimeSeriesFrame parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return source + ":" + std::to_string(line_no); };

  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv(line);
      break;
    }
  }
  if (header.empty()) throw SchemaError(source + ": missing header");

  int ts_col = -1;
  std::array<int, kColumns> col_of{-1, -1, -1, -1, -1};
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "timestamp") {
      ts_col = static_cast<int>(i);
      continue;
    }
    auto it = std::find_if(kColumnNames.begin(), kColumnNames.end(),
                           [&](const char* n) { return header[i] == n; });
    if (it == kColumnNames.end()) throw SchemaError(where() + ": unknown column '" + header[i] + "'");
    const auto c = static_cast<std::size_t>(it - kColumnNames.begin());
    if (col_of[c] >= 0) throw SchemaError(where() + ": duplicate column '" + header[i] + "'");
    col_of[c] = static_cast<int>(i);
  }
  if (ts_col < 0) throw SchemaError(where() + ": missing column 'timestamp'");
  for (std::size_t c = 0; c < kColumns; ++c) {
    if (col_of[c] < 0) throw SchemaError(where() + ": missing column '" + kColumnNames[c] + "'");
  }

  TimeSeriesFrame frame;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ParseError(where() + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(cells.size()));
    }
    Timestamp ts = 0;
    try {
      ts = parse_timestamp(cells[ts_col]);
    } catch (const ParseError& e) {
      throw ParseError(where() + ": " + e.what());
    }
    std::array<double, kColumns> row{};
    for (std::size_t c = 0; c < kColumns; ++c) {
      const std::string& cell = cells[col_of[c]];
      if (cell.empty() || cell == "NA" || cell == "nan" || cell == "NaN") {
        row[c] = kNaN;
        continue;
      }
      double v = 0.0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError(where() + ": column " + kColumnNames[c] + ": not a number '" + cell + "'");
      }
      row[c] = v;
    }
    frame.timestamps.push_back(ts);
    frame.rows.push_back(row);
  }
  return frame;
}

TimeSeriesFrame load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str(), path);
}

std::string to_csv(const TimeSeriesFrame& frame) {
  std::string out = "timestamp";
  for (const char* n : kColumnNames) out += std::string(",") + n;
  out += '\n';
  for (std::size_t i = 0; i < frame.size(); ++i) {
    out += format_timestamp(frame.timestamps[i]);
    for (double v : frame.rows[i]) {
      out += ',';
      if (!std::isnan(v)) out += shortest(v);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const TimeSeriesFrame& frame, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << to_csv(frame);
  if (!f) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------- cleaning

void to_json(nlohmann::json& j, const CleanReport& r) {
  j = nlohmann::json{{"rows_in", r.rows_in},
                     {"rows_out", r.rows_out},
                     {"rows_excluded", r.rows_excluded},
                     {"excluded_dates", r.excluded_dates},
                     {"duplicates_dropped", r.duplicates_dropped},
                     {"hours_inserted", r.hours_inserted},
                     {"cells_day_mean", r.cells_day_mean},
                     {"cells_interpolated", r.cells_interpolated},
                     {"span_start", r.rows_out ? format_timestamp(r.span_start) : ""},
                     {"span_end", r.rows_out ? format_timestamp(r.span_end) : ""}};
}

TimeSeriesFrame clean(const TimeSeriesFrame& raw, CleanReport* report,
                      const CleanOptions& options) {
  CleanReport rep;
  rep.rows_in = raw.size();

  std::vector<std::size_t> order(raw.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return raw.timestamps[a] < raw.timestamps[b];
  });

  std::set<std::int64_t> excluded;
  for (Timestamp t : options.excluded_days) excluded.insert(day_index(t));

  // Sorted, de-duplicated rows outside excluded days.
  std::vector<Timestamp> ts;
  std::vector<std::array<double, kColumns>> rows;
  std::vector<Timestamp> dropped;
  std::set<std::int64_t> dropped_days;
  for (std::size_t k : order) {
    const Timestamp t = raw.timestamps[k];
    if (excluded.count(day_index(t))) {
      dropped.push_back(t);
      dropped_days.insert(day_index(t));
      continue;
    }
    if (!ts.empty() && ts.back() == t) {
      ++rep.duplicates_dropped;
      continue;
    }
    ts.push_back(t);
    rows.push_back(raw.rows[k]);
  }
  rep.rows_excluded = dropped.size();
  for (auto d : dropped_days) rep.excluded_dates.push_back(format_timestamp(d * 86400).substr(0, 10));
  for (Timestamp t : dropped) {
    if (!ts.empty() && t > ts.front() && t < ts.back()) {
      throw CleaningError("excluded date " + format_timestamp(t).substr(0, 10) +
                          " lies inside the retained span");
    }
  }
  if (ts.empty()) {
    if (report) *report = rep;
    return {};
  }

  const Timestamp t0 = ts.front();
  std::vector<std::string> off_grid;
  for (Timestamp t : ts) {
    if ((t - t0) % kHour != 0) off_grid.push_back(format_timestamp(t));
  }
  if (!off_grid.empty()) {
    std::string msg = "timestamps off the hourly grid:";
    for (std::size_t i = 0; i < off_grid.size() && i < 20; ++i) msg += " " + off_grid[i];
    if (off_grid.size() > 20) msg += " ...";
    throw CleaningError(msg);
  }

  const std::size_t n = static_cast<std::size_t>((ts.back() - t0) / kHour) + 1;
  TimeSeriesFrame out;
  out.timestamps.resize(n);
  std::array<double, kColumns> blank;
  blank.fill(kNaN);
  out.rows.assign(n, blank);
  for (std::size_t i = 0; i < n; ++i) out.timestamps[i] = t0 + static_cast<Timestamp>(i) * kHour;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    out.rows[static_cast<std::size_t>((ts[k] - t0) / kHour)] = rows[k];
  }
  rep.hours_inserted = n - ts.size();

  // Pass 1 reads only original values so the result does not depend on order.
  const auto original = out.rows;
  for (std::size_t c = 0; c < kColumns; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isnan(original[i][c])) continue;
      if (i >= 24 && i + 24 < n && !std::isnan(original[i - 24][c]) &&
          !std::isnan(original[i + 24][c])) {
        out.rows[i][c] = 0.5 * (original[i - 24][c] + original[i + 24][c]);
        ++rep.cells_day_mean;
      }
    }
  }

  std::set<Timestamp> unfillable;
  for (std::size_t c = 0; c < kColumns; ++c) {
    std::size_t i = 0;
    while (i < n) {
      if (!std::isnan(out.rows[i][c])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < n && std::isnan(out.rows[j][c])) ++j;
      if (i == 0 || j == n) {
        for (std::size_t k = i; k < j; ++k) unfillable.insert(out.timestamps[k]);
      } else {
        const double a = out.rows[i - 1][c], b = out.rows[j][c];
        const double span = static_cast<double>(j - (i - 1));
        for (std::size_t k = i; k < j; ++k) {
          out.rows[k][c] = a + (b - a) * static_cast<double>(k - (i - 1)) / span;
          ++rep.cells_interpolated;
        }
      }
      i = j;
    }
  }
  if (!unfillable.empty()) {
    std::string msg = "gap at the series boundary without neighbours:";
    std::size_t shown = 0;
    for (Timestamp t : unfillable) {
      if (shown++ == 20) {
        msg += " ...";
        break;
      }
      msg += " " + format_timestamp(t);
    }
    throw CleaningError(msg);
  }

  rep.rows_out = n;
  rep.span_start = out.timestamps.front();
  rep.span_end = out.timestamps.back();
  if (report) *report = rep;
  return out;
}

// ---------------------------------------------------------------- scaling

double ScalerStats::scale(std::size_t c, double x) const { return (x - min[c]) / (max[c] - min[c]); }
double ScalerStats::unscale(std::size_t c, double x) const { return x * (max[c] - min[c]) + min[c]; }

void to_json(nlohmann::json& j, const ScalerStats& s) {
  j = nlohmann::json::object();
  for (std::size_t c = 0; c < kColumns; ++c) {
    j[kColumnNames[c]] = {{"min", s.min[c]}, {"max", s.max[c]}};
  }
}

void from_json(const nlohmann::json& j, ScalerStats& s) {
  for (std::size_t c = 0; c < kColumns; ++c) {
    const auto& e = j.at(kColumnNames[c]);
    s.min[c] = e.at("min").get<double>();
    s.max[c] = e.at("max").get<double>();
  }
}

ScalerStats fit_scaler(const TimeSeriesFrame& frame, std::size_t begin, std::size_t end) {
  if (begin >= end || end > frame.size()) throw ScalingError("empty or out-of-range fit range");
  ScalerStats s;
  s.min.fill(std::numeric_limits<double>::infinity());
  s.max.fill(-std::numeric_limits<double>::infinity());
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t c = 0; c < kColumns; ++c) {
      s.min[c] = std::min(s.min[c], frame.rows[i][c]);
      s.max[c] = std::max(s.max[c], frame.rows[i][c]);
    }
  }
  for (std::size_t c = 0; c < kColumns; ++c) {
    if (!(s.max[c] > s.min[c])) {
      throw ScalingError(std::string("column ") + kColumnNames[c] + " is constant over the fit range");
    }
  }
  return s;
}

TimeSeriesFrame apply_scaler(const TimeSeriesFrame& frame, const ScalerStats& stats) {
  TimeSeriesFrame out = frame;
  for (auto& r : out.rows)
    for (std::size_t c = 0; c < kColumns; ++c) r[c] = stats.scale(c, r[c]);
  return out;
}

TimeSeriesFrame invert_scaler(const TimeSeriesFrame& frame, const ScalerStats& stats) {
  TimeSeriesFrame out = frame;
  for (auto& r : out.rows)
    for (std::size_t c = 0; c < kColumns; ++c) r[c] = stats.unscale(c, r[c]);
  return out;
}

// ---------------------------------------------------------------- windows

std::size_t window_count(std::size_t rows, std::size_t window, std::size_t horizon,
                         std::size_t stride) {
  if (window == 0 || horizon == 0 || stride == 0) {
    throw ContractError("window, horizon and stride must be positive");
  }
  if (rows < window + horizon) {
    throw ContractError("series of " + std::to_string(rows) + " rows is shorter than window " +
                        std::to_string(window) + " + horizon " + std::to_string(horizon));
  }
  return (rows - window - horizon) / stride + 1;
}

WindowedDataset window(const TimeSeriesFrame& frame, std::size_t w, std::size_t h,
                       std::size_t s) {
  WindowedDataset ds;
  ds.count = window_count(frame.size(), w, h, s);
  ds.window = w;
  ds.horizon = h;
  ds.stride = s;
  ds.inputs.reserve(ds.count * w * kColumns);
  ds.targets.reserve(ds.count * h);
  for (std::size_t i = 0; i < ds.count; ++i) {
    const std::size_t r0 = i * s;
    for (std::size_t r = r0; r < r0 + w; ++r) {
      ds.inputs.insert(ds.inputs.end(), frame.rows[r].begin(), frame.rows[r].end());
    }
    for (std::size_t r = r0 + w; r < r0 + w + h; ++r) ds.targets.push_back(frame.rows[r][kPowerColumn]);
  }
  return ds;
}

WindowedDataset WindowedDataset::select(std::span<const std::size_t> indices) const {
  WindowedDataset out;
  out.window = window;
  out.horizon = horizon;
  out.stride = stride;
  out.features = features;
  out.count = indices.size();
  out.inputs.reserve(indices.size() * window * features);
  out.targets.reserve(indices.size() * horizon);
  for (std::size_t i : indices) {
    if (i >= count) throw ContractError("sample index out of range");
    const auto in = input(i);
    const auto tg = target(i);
    out.inputs.insert(out.inputs.end(), in.begin(), in.end());
    out.targets.insert(out.targets.end(), tg.begin(), tg.end());
  }
  return out;
}

// ---------------------------------------------------------------- folds

FoldPlan kfold_plan(std::size_t samples, std::size_t k, std::size_t buffer) {
  if (k < 2) throw ContractError("fold count must be at least 2");
  if (samples <= k * (2 * buffer + 1)) {
    throw ContractError(std::to_string(samples) + " samples are too few for " + std::to_string(k) +
                        " folds with buffer " + std::to_string(buffer));
  }
  FoldPlan plan;
  plan.samples = samples;
  plan.buffer = buffer;
  for (std::size_t f = 0; f < k; ++f) {
    Fold fold;
    fold.test_begin = f * samples / k;
    fold.test_end = (f + 1) * samples / k;
    const std::size_t lo = fold.test_begin >= buffer ? fold.test_begin - buffer : 0;
    const std::size_t hi = std::min(samples, fold.test_end + buffer);
    for (std::size_t i = 0; i < samples; ++i) {
      if (i >= fold.test_begin && i < fold.test_end) {
        fold.test.push_back(i);
      } else if (i < lo || i >= hi) {
        fold.train.push_back(i);
      }
    }
    if (lo < fold.test_begin) fold.excluded.emplace_back(lo, fold.test_begin);
    if (fold.test_end < hi) fold.excluded.emplace_back(fold.test_end, hi);
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

void to_json(nlohmann::json& j, const FoldPlan& plan) {
  j = nlohmann::json{{"samples", plan.samples}, {"buffer", plan.buffer}};
  auto& folds = j["folds"] = nlohmann::json::array();
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto& fold = plan.folds[f];
    nlohmann::json ex = nlohmann::json::array();
    for (auto [a, b] : fold.excluded) ex.push_back({{"start", a}, {"end", b}});
    folds.push_back({{"fold", f},
                     {"test_start", fold.test_begin},
                     {"test_end", fold.test_end},
                     {"train_samples", fold.train.size()},
                     {"excluded", ex}});
  }
}

std::pair<TimeSeriesFrame, TimeSeriesFrame> chronological_split(const TimeSeriesFrame& frame,
                                                                Timestamp boundary) {
  if (frame.size() == 0 || boundary <= frame.timestamps.front() ||
      boundary > frame.timestamps.back()) {
    throw ContractError("split boundary " + format_timestamp(boundary) +
                        " leaves one side empty");
  }
  const auto cut = static_cast<std::size_t>(
      std::lower_bound(frame.timestamps.begin(), frame.timestamps.end(), boundary) -
      frame.timestamps.begin());
  TimeSeriesFrame a, b;
  a.timestamps.assign(frame.timestamps.begin(), frame.timestamps.begin() + cut);
  a.rows.assign(frame.rows.begin(), frame.rows.begin() + cut);
  b.timestamps.assign(frame.timestamps.begin() + cut, frame.timestamps.end());
  b.rows.assign(frame.rows.begin() + cut, frame.rows.end());
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------- synthetic

TimeSeriesFrame synth_generate(std::size_t days, std::uint64_t seed, const SynthOptions& opt) {
  if (days < 2) throw ContractError("synthetic series needs at least 2 days");
  using std::numbers::pi;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TimeSeriesFrame f;
  f.timestamps.reserve(days * 24);
  f.rows.reserve(days * 24);
  const std::int64_t day0 = day_index(opt.start);
  for (std::size_t d = 0; d < days; ++d) {
    const std::int64_t abs_day = day0 + static_cast<std::int64_t>(d);
    const double season = std::sin(2.0 * pi * (static_cast<double>(abs_day % 365) - 80.0) / 365.0);
    const double day_length = 12.0 + 3.0 * season;
    const double sunrise = 12.0 - 0.5 * day_length;
    const double peak = 850.0 + 150.0 * season;
    const double clearness = 0.55 + 0.45 * unit(rng);
    const double base_temp = 17.0 + 9.0 * season + 1.5 * noise(rng);
    for (int h = 0; h < 24; ++h) {
      const double t = h + 0.5;
      const double elev = (t > sunrise && t < sunrise + day_length)
                              ? std::sin(pi * (t - sunrise) / day_length)
                              : 0.0;
      double i3 = 0.0, i15 = 0.0;
      if (elev > 0.0) {
        const double cloud = std::clamp(clearness + 0.06 * noise(rng), 0.05, 1.0);
        i3 = peak * elev * cloud;
        i15 = i3 * (1.0 + 0.08 * (1.0 - elev)) + 5.0 * noise(rng);
        i15 = std::max(0.0, i15);
      }
      const double ta = base_temp + 6.0 * elev + 0.4 * noise(rng);
      const double tm = ta + 0.03 * i15 + 0.3 * noise(rng);
      const double p = elev > 0.0
                           ? std::max(0.0, opt.capacity_kw * (i15 / 1000.0) *
                                               (1.0 - 0.004 * (tm - 25.0)))
                           : 0.0;
      f.timestamps.push_back(opt.start + static_cast<Timestamp>(d * 24 + h) * kHour);
      f.rows.push_back({ta, tm, i3, i15, p});
    }
  }
  return f;
}

}  // namespace pvqml::data
