#pragma once

// Dataset ingestion (long/wide CSV), calendar covariates, chronological
// splits, per-series standardization, mini-batch enumeration and an AR(1)
// synthetic generator.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "batchcast/error.hpp"
#include "batchcast/net.hpp"

namespace batchcast {

enum class Granularity { Hourly, Daily, FiveMin, Quarterly, Workday };

inline std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::Hourly: return "hourly";
    case Granularity::Daily: return "daily";
    case Granularity::FiveMin: return "5min";
    case Granularity::Quarterly: return "quarterly";
    case Granularity::Workday: return "workday";
  }
  return "hourly";
}

inline Granularity parse_granularity(std::string_view s) {
  if (s == "hourly") return Granularity::Hourly;
  if (s == "daily") return Granularity::Daily;
  if (s == "5min") return Granularity::FiveMin;
  if (s == "quarterly") return Granularity::Quarterly;
  if (s == "workday") return Granularity::Workday;
  throw config_error("InvalidGranularity", "unknown granularity '" + std::string(s) + "'");
}

inline bool has_hour_covariate(Granularity g) { return g == Granularity::Hourly || g == Granularity::FiveMin; }
inline bool has_dow_covariate(Granularity g) { return g != Granularity::Quarterly; }

// ---------------------------------------------------------------------------
// Timestamps

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  return sys_days{year{y} / month{m} / day{d}}.time_since_epoch().count();
}

}  // namespace detail

/// A parsed timestamp: seconds since the Unix epoch (UTC) for calendar
/// stamps, or an integer step count for epoch-step stamps.
struct Timestamp {
  std::int64_t value = 0;
  bool is_step = false;
};

/// Accepts RFC 3339 (`YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)`, a space
/// may replace `T`, a bare date is midnight UTC) or a plain integer step.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  s = detail::trim(s);
  std::int64_t step = 0;
  if (detail::parse_number(s, step)) return Timestamp{step, true};
  int y, mo, d, hh = 0, mi = 0, ss = 0;
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  if (!detail::parse_fixed_int(s, 0, 4, y) || !detail::parse_fixed_int(s, 5, 2, mo) ||
      !detail::parse_fixed_int(s, 8, 2, d))
    return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
  using namespace std::chrono;
  if (!year_month_day{year{y}, month{unsigned(mo)}, day{unsigned(d)}}.ok()) return std::nullopt;
  std::size_t pos = 10;
  std::int64_t offset = 0;
  if (pos < s.size()) {
    if (s[pos] != 'T' && s[pos] != 't' && s[pos] != ' ') return std::nullopt;
    if (!detail::parse_fixed_int(s, pos + 1, 2, hh) || s.size() < pos + 9 || s[pos + 3] != ':' ||
        !detail::parse_fixed_int(s, pos + 4, 2, mi) || s[pos + 6] != ':' || !detail::parse_fixed_int(s, pos + 7, 2, ss))
      return std::nullopt;
    if (hh > 23 || mi > 59 || ss > 60) return std::nullopt;
    pos += 9;
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    }
    if (pos < s.size()) {
      if (s[pos] == 'Z' || s[pos] == 'z') {
        ++pos;
      } else if (s[pos] == '+' || s[pos] == '-') {
        int oh, om;
        if (!detail::parse_fixed_int(s, pos + 1, 2, oh) || s.size() < pos + 6 || s[pos + 3] != ':' ||
            !detail::parse_fixed_int(s, pos + 4, 2, om))
          return std::nullopt;
        offset = (s[pos] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
        pos += 6;
      } else {
        return std::nullopt;
      }
    }
    if (pos != s.size()) return std::nullopt;
  }
  const std::int64_t secs = detail::days_from_civil(y, unsigned(mo), unsigned(d)) * 86400 + hh * 3600 + mi * 60 + ss;
  return Timestamp{secs - offset, false};
}

inline std::string format_rfc3339(std::int64_t secs) {
  using namespace std::chrono;
  const std::int64_t days = secs >= 0 ? secs / 86400 : -((-secs + 86399) / 86400);
  const std::int64_t rem = secs - days * 86400;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()), int(rem / 3600), int(rem / 60 % 60), int(rem % 60));
  return buf;
}

inline std::string format_timestamp(const Timestamp& t) {
  return t.is_step ? std::to_string(t.value) : format_rfc3339(t.value);
}

// ---------------------------------------------------------------------------
// Covariates

/// Calendar codes for one timestamp (Monday = 0; -1 when absent).
struct CovariateCodes {
  int hour = -1;
  int dow = -1;
};

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }
inline int floor_mod(std::int64_t a, std::int64_t b) { return int(a - floor_div(a, b) * b); }

/// Epoch-step timestamps are interpreted as step counts of the granularity
/// starting at 1970-01-01T00:00Z (a Thursday).
inline std::optional<std::int64_t> step_to_seconds(std::int64_t step, Granularity g) {
  switch (g) {
    case Granularity::Hourly: return step * 3600;
    case Granularity::FiveMin: return step * 300;
    case Granularity::Daily: return step * 86400;
    default: return std::nullopt;
  }
}

}  // namespace detail

inline CovariateCodes encode_covariates(const Timestamp& ts, Granularity g) {
  CovariateCodes c;
  if (g == Granularity::Quarterly) return c;
  if (ts.is_step && g == Granularity::Workday) {
    c.dow = detail::floor_mod(ts.value, 5);
    return c;
  }
  const std::int64_t secs = ts.is_step ? *detail::step_to_seconds(ts.value, g) : ts.value;
  const std::int64_t days = detail::floor_div(secs, 86400);
  c.dow = detail::floor_mod(days + 3, 7);
  if (has_hour_covariate(g)) c.hour = detail::floor_mod(secs, 86400) / 3600;
  return c;
}

/// StepInput codes for a timestamp and series index; the lag is left at 0.
inline StepInput encode_step(const Timestamp& ts, Granularity g, std::size_t series_id) {
  const CovariateCodes c = encode_covariates(ts, g);
  return StepInput{0.0, c.hour, c.dow, series_id};
}

// ---------------------------------------------------------------------------
// Dataset

struct Series {
  std::string name;
  std::vector<Timestamp> timestamps;
  std::vector<double> values;
  /// Training span is [0, train_end), validation [train_end, val_end),
  /// test [val_end, size()).
  std::size_t train_end = 0;
  std::size_t val_end = 0;

  std::size_t size() const noexcept { return values.size(); }
};

struct TimeSeriesDataset {
  Granularity granularity = Granularity::Hourly;
  std::vector<Series> series;

  std::size_t n_series() const noexcept { return series.size(); }
};

/// Timestamp following `prev` at the given granularity.
inline Timestamp next_timestamp(const Timestamp& prev, Granularity g) {
  if (prev.is_step) return {prev.value + 1, true};
  switch (g) {
    case Granularity::Hourly: return {prev.value + 3600, false};
    case Granularity::FiveMin: return {prev.value + 300, false};
    case Granularity::Daily: return {prev.value + 86400, false};
    case Granularity::Workday: {
      const int dow = encode_covariates(prev, g).dow;
      return {prev.value + 86400 * (dow == 4 ? 3 : dow == 5 ? 2 : 1), false};
    }
    case Granularity::Quarterly: {
      using namespace std::chrono;
      const std::int64_t days = detail::floor_div(prev.value, 86400);
      const std::int64_t rem = prev.value - days * 86400;
      year_month_day ymd{sys_days{std::chrono::days{days}}};
      ymd = ymd + months{3};
      return {sys_days{ymd}.time_since_epoch().count() * 86400 + rem, false};
    }
  }
  return prev;
}

namespace detail {

inline void check_spacing(const Series& s, Granularity g) {
  for (std::size_t i = 1; i < s.timestamps.size(); ++i) {
    const auto& a = s.timestamps[i - 1];
    const auto& b = s.timestamps[i];
    if (a.is_step != b.is_step)
      throw data_error("ParseError", "series '" + s.name + "' mixes integer and calendar timestamps");
    if (a.value == b.value)
      throw data_error("DuplicateTimestamp", "series '" + s.name + "' repeats timestamp " + format_timestamp(a));
    if (next_timestamp(a, g).value != b.value)
      throw data_error("NonUniformSpacing", "series '" + s.name + "' gap between " + format_timestamp(a) + " and " +
                                                format_timestamp(b) + " does not match " + to_string(g) + " spacing");
  }
}

inline std::optional<Granularity> infer_granularity(const Series& s) {
  if (s.timestamps.size() < 2 || s.timestamps[0].is_step) return std::nullopt;
  const std::int64_t gap = s.timestamps[1].value - s.timestamps[0].value;
  if (gap == 300) return Granularity::FiveMin;
  if (gap == 3600) return Granularity::Hourly;
  if (gap == 86400) return Granularity::Daily;
  return std::nullopt;
}

/// Numeric ids sort numerically, anything else lexicographically.
inline bool id_less(const std::string& a, const std::string& b) {
  long long x, y;
  const bool na = parse_number(std::string_view(a), x), nb = parse_number(std::string_view(b), y);
  if (na && nb) return x < y;
  if (na != nb) return na;
  return a < b;
}

}  // namespace detail

enum class CsvFormat { Long, Wide };

inline CsvFormat parse_csv_format(std::string_view s) {
  if (s == "long-csv" || s == "long") return CsvFormat::Long;
  if (s == "wide-csv" || s == "wide") return CsvFormat::Wide;
  throw config_error("InvalidFormat", "unknown dataset format '" + std::string(s) + "'");
}

/// Parses a dataset from a stream. Series are returned in id order and time
/// sorted; spacing must be uniform for the granularity (inferred from the
/// first gap when not given).
inline TimeSeriesDataset parse_dataset(std::istream& in, CsvFormat format,
                                       std::optional<Granularity> granularity = std::nullopt) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw data_error("ParseError", "line 1: missing header row");
  ++lineno;
  std::vector<std::string> header;
  for (auto cell : detail::split_csv(line)) header.emplace_back(cell);

  struct Row {
    Timestamp ts;
    double value;
    std::size_t line;
  };
  std::map<std::string, std::vector<Row>, decltype(&detail::id_less)> rows(&detail::id_less);

  auto parse_value = [&](std::string_view cell, std::size_t ln) {
    double v;
    if (!detail::parse_number(cell, v) || !std::isfinite(v))
      throw data_error("ParseError", "line " + std::to_string(ln) + ": invalid or missing value '" +
                                         std::string(cell) + "'");
    return v;
  };
  auto parse_ts = [&](std::string_view cell, std::size_t ln) {
    const auto ts = parse_timestamp(cell);
    if (!ts) throw data_error("ParseError", "line " + std::to_string(ln) + ": invalid timestamp '" + std::string(cell) + "'");
    return *ts;
  };

  if (format == CsvFormat::Long) {
    if (header.size() != 3 || header[0] != "series_id" || header[1] != "timestamp" || header[2] != "value")
      throw data_error("ParseError", "line 1: long-csv header must be series_id,timestamp,value");
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::trim(line).empty()) continue;
      const auto cells = detail::split_csv(line);
      if (cells.size() != 3)
        throw data_error("ParseError", "line " + std::to_string(lineno) + ": expected 3 columns, got " +
                                           std::to_string(cells.size()));
      if (cells[0].empty()) throw data_error("ParseError", "line " + std::to_string(lineno) + ": missing series_id");
      rows[std::string(cells[0])].push_back(Row{parse_ts(cells[1], lineno), parse_value(cells[2], lineno), lineno});
    }
  } else {
    if (header.size() < 2 || header[0] != "timestamp")
      throw data_error("ParseError", "line 1: wide-csv header must be timestamp,<id1>,...");
    for (std::size_t c = 1; c < header.size(); ++c) rows[header[c]];
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::trim(line).empty()) continue;
      const auto cells = detail::split_csv(line);
      if (cells.size() != header.size())
        throw data_error("ParseError", "line " + std::to_string(lineno) + ": expected " +
                                           std::to_string(header.size()) + " columns, got " +
                                           std::to_string(cells.size()));
      const Timestamp ts = parse_ts(cells[0], lineno);
      for (std::size_t c = 1; c < header.size(); ++c)
        rows[header[c]].push_back(Row{ts, parse_value(cells[c], lineno), lineno});
    }
  }

  TimeSeriesDataset ds;
  for (auto& [id, rs] : rows) {
    std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.ts.value < b.ts.value; });
    Series s;
    s.name = id;
    for (const auto& r : rs) {
      s.timestamps.push_back(r.ts);
      s.values.push_back(r.value);
    }
    ds.series.push_back(std::move(s));
  }
  if (ds.series.empty()) throw data_error("ParseError", "dataset contains no series");

  if (granularity) {
    ds.granularity = *granularity;
  } else {
    std::optional<Granularity> g;
    for (const auto& s : ds.series)
      if ((g = detail::infer_granularity(s))) break;
    ds.granularity = g.value_or(Granularity::Hourly);
  }
  for (const auto& s : ds.series) detail::check_spacing(s, ds.granularity);
  return ds;
}

inline TimeSeriesDataset load_dataset(const std::string& path, CsvFormat format,
                                      std::optional<Granularity> granularity = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw config_error("FileNotFound", "cannot open dataset '" + path + "'");
  return parse_dataset(in, format, granularity);
}

/// Writes the long-csv layout (17 significant digits).
inline void write_long_csv(std::ostream& out, const TimeSeriesDataset& ds) {
  out << "series_id,timestamp,value\n";
  char buf[64];
  for (const auto& s : ds.series)
    for (std::size_t t = 0; t < s.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%.17g", s.values[t]);
      out << s.name << ',' << format_timestamp(s.timestamps[t]) << ',' << buf << '\n';
    }
}

/// Marks chronological splits: the last `test_len` steps are test, the
/// `test_len` steps before that validation, the rest training.
inline void set_splits(TimeSeriesDataset& ds, std::size_t test_len) {
  for (auto& s : ds.series) {
    if (s.size() < 2 * test_len + 1)
      throw data_error("SeriesTooShort", "series '" + s.name + "' has " + std::to_string(s.size()) +
                                             " points, fewer than two evaluation spans plus training");
    s.val_end = s.size() - test_len;
    s.train_end = s.val_end - test_len;
  }
}

/// Evaluation span length: Q-step forecasts from `rolling` consecutive starts.
inline std::size_t test_span_length(std::size_t q, std::size_t rolling) { return q + rolling - 1; }

// ---------------------------------------------------------------------------
// Standardization

struct Scaler {
  double mean = 0.0;
  double std = 1.0;

  double transform(double x) const noexcept { return (x - mean) / std; }
  double inverse(double x) const noexcept { return x * std + mean; }
};

struct ScalerTable {
  std::vector<Scaler> per_series;
};

/// Per-series (z - mean) / std with population statistics of the training
/// span. A zero std falls back to 1.
inline std::pair<TimeSeriesDataset, ScalerTable> standardize(const TimeSeriesDataset& ds) {
  TimeSeriesDataset out = ds;
  ScalerTable table;
  for (auto& s : out.series) {
    if (s.train_end == 0) throw data_error("EmptyTrainSplit", "series '" + s.name + "' has no training data");
    double mean = 0.0;
    for (std::size_t t = 0; t < s.train_end; ++t) mean += s.values[t];
    mean /= double(s.train_end);
    double var = 0.0;
    for (std::size_t t = 0; t < s.train_end; ++t) var += (s.values[t] - mean) * (s.values[t] - mean);
    var /= double(s.train_end);
    Scaler sc{mean, var > 0.0 ? std::sqrt(var) : 1.0};
    for (double& v : s.values) v = sc.transform(v);
    table.per_series.push_back(sc);
  }
  return {std::move(out), std::move(table)};
}

/// Applies a stored scaler table (e.g. from a checkpoint) to `ds`.
inline TimeSeriesDataset apply_scalers(const TimeSeriesDataset& ds, const ScalerTable& table) {
  if (table.per_series.size() != ds.n_series())
    throw compat_error("SeriesCountMismatch", "scaler table has " + std::to_string(table.per_series.size()) +
                                                  " series, dataset has " + std::to_string(ds.n_series()));
  TimeSeriesDataset out = ds;
  for (std::size_t i = 0; i < out.n_series(); ++i)
    for (double& v : out.series[i].values) v = table.per_series[i].transform(v);
  return out;
}

// ---------------------------------------------------------------------------
// Mini-batches

/// D consecutive windows of one series. Window k (0..D-1) has target time
/// t - D + 1 + k and spans the P + 1 steps ending there.
struct MiniBatch {
  std::size_t series = 0;
  std::size_t t = 0;
};

/// Enumerates mini-batches whose D targets all lie in [lo, hi), with the
/// newest target advancing by `stride`. Windows may reach back before `lo`
/// for conditioning but never before index 0.
inline std::vector<MiniBatch> make_minibatches(std::size_t series, std::size_t lo, std::size_t hi, std::size_t p,
                                               std::size_t d, std::size_t stride) {
  if (stride == 0) throw config_error("InvalidStride", "stride must be >= 1");
  if (d == 0) throw config_error("InvalidHorizon", "D must be >= 1");
  const std::size_t first = std::max(lo + d - 1, p + d - 1);
  std::vector<MiniBatch> out;
  if (hi == 0 || first > hi - 1) return out;
  for (std::size_t t = first; t < hi; t += stride) out.push_back(MiniBatch{series, t});
  return out;
}

/// Training-span mini-batches (targets in [0, train_end)).
inline std::vector<MiniBatch> make_minibatches(std::size_t series, std::size_t train_len, std::size_t p,
                                               std::size_t d, std::size_t stride) {
  if (train_len < p + d)
    throw data_error("SeriesTooShort", "training length " + std::to_string(train_len) + " < P + D = " +
                                           std::to_string(p + d));
  return make_minibatches(series, 0, train_len, p, d, stride);
}

/// Precomputed covariate codes for every step of every series.
class FeatureTable {
 public:
  explicit FeatureTable(const TimeSeriesDataset& ds) {
    codes_.resize(ds.n_series());
    for (std::size_t i = 0; i < ds.n_series(); ++i) {
      const auto& s = ds.series[i];
      codes_[i].reserve(s.size() + 1);
      for (const auto& ts : s.timestamps) codes_[i].push_back(encode_covariates(ts, ds.granularity));
      // One step past the end, for forecasting.
      if (!s.timestamps.empty())
        codes_[i].push_back(encode_covariates(next_timestamp(s.timestamps.back(), ds.granularity), ds.granularity));
    }
  }

  /// Codes at time index t; indices past the end are extrapolated.
  CovariateCodes at(const TimeSeriesDataset& ds, std::size_t series, std::size_t t) const {
    if (t < codes_[series].size()) return codes_[series][t];
    Timestamp ts = ds.series[series].timestamps.back();
    for (std::size_t k = ds.series[series].size(); k <= t; ++k) ts = next_timestamp(ts, ds.granularity);
    return encode_covariates(ts, ds.granularity);
  }

 private:
  std::vector<std::vector<CovariateCodes>> codes_;
};

/// Teacher-forced inputs for the `len` steps ending at target index `end`
/// (inclusive). The lag of step s is value s-1, or 0 before the series start.
inline std::vector<StepInput> window_inputs(const TimeSeriesDataset& ds, const FeatureTable& ft, std::size_t series,
                                            std::size_t end, std::size_t len) {
  const auto& vals = ds.series[series].values;
  std::vector<StepInput> out(len);
  const std::size_t start = end + 1 - len;
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t s = start + k;
    const CovariateCodes c = ft.at(ds, series, s);
    out[k] = StepInput{s == 0 ? 0.0 : vals[s - 1], c.hour, c.dow, series};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic AR(1)-noise data

struct SynthConfig {
  std::size_t n_series = 8;
  std::size_t length = 3000;
  double phi = 0.8;
  double amplitude = 1.0;
  std::size_t period = 24;
  double noise_scale = 0.5;
  double level = 10.0;
  double level_spread = 5.0;
  std::uint64_t seed = 0;
  Granularity granularity = Granularity::Hourly;
  /// Series start; 2021-01-04T00:00Z is a Monday.
  std::int64_t start = 1609718400;
};

/// Per-series offsets and noise kept alongside the data for oracle tests.
struct SynthTruth {
  std::vector<double> offsets;
  std::vector<std::vector<double>> noise;
  std::vector<std::vector<double>> signal;
};

/// z_t = amplitude sin(2 pi t / period) + b_i + eta_t,
/// eta_t = phi eta_{t-1} + sqrt(1 - phi^2) noise_scale nu_t (stationary start).
inline TimeSeriesDataset synth_ar(const SynthConfig& cfg, SynthTruth* truth = nullptr) {
  if (!(std::abs(cfg.phi) < 1.0))
    throw config_error("InvalidPhi", "phi must satisfy |phi| < 1, got " + std::to_string(cfg.phi));
  if (cfg.period == 0 || cfg.length < 10 * cfg.period)
    throw config_error("InvalidSynthConfig", "T must be at least 10 * period");
  if (cfg.n_series == 0) throw config_error("InvalidSynthConfig", "N must be >= 1");
  if (!(cfg.noise_scale >= 0.0)) throw config_error("InvalidSynthConfig", "noise_scale must be >= 0");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double innov = std::sqrt(1.0 - cfg.phi * cfg.phi) * cfg.noise_scale;
  constexpr double kTwoPi = 6.283185307179586477;

  TimeSeriesDataset ds;
  ds.granularity = cfg.granularity;
  if (truth) *truth = SynthTruth{};
  for (std::size_t i = 0; i < cfg.n_series; ++i) {
    Series s;
    s.name = std::to_string(i);
    const double offset = cfg.level + cfg.level_spread * unif(rng);
    double eta = cfg.noise_scale * normal(rng);
    Timestamp ts{cfg.start, false};
    std::vector<double> noise, signal;
    for (std::size_t t = 0; t < cfg.length; ++t) {
      if (t > 0) {
        eta = cfg.phi * eta + innov * normal(rng);
        ts = next_timestamp(ts, cfg.granularity);
      }
      const double sig = cfg.amplitude * std::sin(kTwoPi * double(t) / double(cfg.period)) + offset;
      s.timestamps.push_back(ts);
      s.values.push_back(sig + eta);
      noise.push_back(eta);
      signal.push_back(sig);
    }
    ds.series.push_back(std::move(s));
    if (truth) {
      truth->offsets.push_back(offset);
      truth->noise.push_back(std::move(noise));
      truth->signal.push_back(std::move(signal));
    }
  }
  return ds;
}

}  // namespace batchcast
