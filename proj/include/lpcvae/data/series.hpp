#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lpcvae/error.hpp"

namespace lpcvae::data {

/// A labeled univariate series on a uniform time grid.
struct SeriesDataset {
  std::vector<double> values;
  std::vector<std::int64_t> timestamps;  // epoch seconds
  std::vector<std::uint8_t> labels;      // 1 = anomalous
  std::vector<std::uint8_t> missing;     // 1 = value was absent or non-finite
  double norm_mean = 0.0;
  double norm_std = 1.0;
  bool normalized = false;
  std::size_t origin = 0;  // index of values[0] in the source series

  std::size_t size() const { return values.size(); }

  std::int64_t stride_seconds() const {
    return timestamps.size() > 1 ? timestamps[1] - timestamps[0] : 0;
  }
};

/// Column names looked up in the CSV header.
struct CsvSchema {
  std::string timestamp = "timestamp";
  std::string value = "value";
  std::string label = "label";
  std::string missing = "missing";
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

inline std::int64_t parse_int(const std::string& s, std::size_t row, const std::string& col) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno != 0)
    throw IngestionError("row " + std::to_string(row) + ": column '" + col +
                         "' is not an integer: '" + s + "'");
  return v;
}

inline std::uint8_t parse_flag(const std::string& s, std::size_t row, const std::string& col) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw IngestionError("row " + std::to_string(row) + ": column '" + col + "' must be 0 or 1, got '" +
                       s + "'");
}

/// Parses a value; empty or unparsable text is reported as NaN.
inline double parse_value(const std::string& s) {
  if (s.empty()) return std::nan("");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (*end != '\0') return std::nan("");
  return v;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace detail

/// Checks the equal-length and uniform-timestamp invariants.
inline void validate(const SeriesDataset& ds) {
  const std::size_t n = ds.values.size();
  if (ds.timestamps.size() != n || ds.labels.size() != n || ds.missing.size() != n)
    throw IngestionError("dataset columns have unequal lengths");
  if (n < 2) return;
  const std::int64_t stride = ds.timestamps[1] - ds.timestamps[0];
  if (stride <= 0) throw IngestionError("timestamps not strictly increasing at row 1");
  for (std::size_t i = 1; i < n; ++i) {
    const std::int64_t d = ds.timestamps[i] - ds.timestamps[i - 1];
    if (d <= 0)
      throw IngestionError("timestamps not strictly increasing at row " + std::to_string(i));
    if (d != stride)
      throw IngestionError("timestamp stride breaks at row " + std::to_string(i) + " (expected " +
                           std::to_string(stride) + "s, got " + std::to_string(d) + "s)");
  }
}

/// Marks non-finite values missing and fills them by linear interpolation
/// between the nearest valid neighbours (nearest valid value at the ends).
inline void impute_missing(SeriesDataset& ds) {
  const std::size_t n = ds.values.size();
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(ds.values[i]))
      valid.push_back(i);
    else
      ds.missing[i] = 1;
  }
  if (valid.empty()) throw IngestionError("series has no finite values");
  if (valid.size() == n) return;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(ds.values[i])) continue;
    while (k < valid.size() && valid[k] < i) ++k;
    if (k == 0) {
      ds.values[i] = ds.values[valid.front()];
    } else if (k == valid.size()) {
      ds.values[i] = ds.values[valid.back()];
    } else {
      const std::size_t lo = valid[k - 1], hi = valid[k];
      const double t = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
      ds.values[i] = ds.values[lo] + t * (ds.values[hi] - ds.values[lo]);
    }
  }
}

/// Parses CSV text with a header row. Lines starting with '#' are ignored.
inline SeriesDataset parse_csv(std::istream& in, const CsvSchema& schema = {}) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = detail::split_csv_line(line);
    break;
  }
  if (header.empty()) throw IngestionError("empty file: no header row");
  auto find = [&](const std::string& name) -> long {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<long>(i);
    return -1;
  };
  const long c_ts = find(schema.timestamp);
  const long c_val = find(schema.value);
  const long c_lab = find(schema.label);
  const long c_mis = find(schema.missing);
  if (c_ts < 0) throw IngestionError("missing required column '" + schema.timestamp + "'");
  if (c_val < 0) throw IngestionError("missing required column '" + schema.value + "'");

  SeriesDataset ds;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw IngestionError("row " + std::to_string(row) + ": expected " +
                           std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    ds.timestamps.push_back(detail::parse_int(f[c_ts], row, schema.timestamp));
    ds.values.push_back(detail::parse_value(f[c_val]));
    ds.labels.push_back(c_lab >= 0 ? detail::parse_flag(f[c_lab], row, schema.label) : 0);
    ds.missing.push_back(c_mis >= 0 ? detail::parse_flag(f[c_mis], row, schema.missing) : 0);
    ++row;
  }
  if (ds.values.empty()) throw IngestionError("empty file: no data rows");
  validate(ds);
  impute_missing(ds);
  return ds;
}

inline SeriesDataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  return parse_csv(in, schema);
}

/// Writes `timestamp,value,label,missing` with round-trip exact values.
inline void write_csv(std::ostream& out, const SeriesDataset& ds) {
  out << "timestamp,value,label,missing\n";
  for (std::size_t i = 0; i < ds.size(); ++i)
    out << ds.timestamps[i] << ',' << detail::format_double(ds.values[i]) << ','
        << static_cast<int>(ds.labels[i]) << ',' << static_cast<int>(ds.missing[i]) << '\n';
}

inline SeriesDataset slice(const SeriesDataset& ds, std::size_t begin, std::size_t end) {
  SeriesDataset out;
  out.values.assign(ds.values.begin() + begin, ds.values.begin() + end);
  out.timestamps.assign(ds.timestamps.begin() + begin, ds.timestamps.begin() + end);
  out.labels.assign(ds.labels.begin() + begin, ds.labels.begin() + end);
  out.missing.assign(ds.missing.begin() + begin, ds.missing.begin() + end);
  out.norm_mean = ds.norm_mean;
  out.norm_std = ds.norm_std;
  out.normalized = ds.normalized;
  out.origin = ds.origin + begin;
  return out;
}

/// Applies a fixed z-score to every value.
inline SeriesDataset normalize_with(const SeriesDataset& ds, double mean, double stddev) {
  if (!(stddev > 0.0)) throw ConfigError("normalization std must be positive");
  SeriesDataset out = ds;
  for (double& v : out.values) v = (v - mean) / stddev;
  out.norm_mean = mean;
  out.norm_std = stddev;
  out.normalized = true;
  return out;
}

inline std::vector<double> denormalize(const SeriesDataset& ds) {
  std::vector<double> out(ds.values);
  if (ds.normalized)
    for (double& v : out) v = v * ds.norm_std + ds.norm_mean;
  return out;
}

/// Chronological split; z-score statistics come from the non-missing training
/// points and are applied to both halves.
inline std::pair<SeriesDataset, SeriesDataset> split_and_normalize(const SeriesDataset& ds,
                                                                    double train_frac) {
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw ConfigError("train_frac must lie in (0, 1), got " + std::to_string(train_frac));
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(ds.size()) * train_frac));
  if (n_train == 0 || n_train >= ds.size())
    throw ConfigError("train_frac " + std::to_string(train_frac) + " leaves an empty split for " +
                      std::to_string(ds.size()) + " points");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n_train; ++i)
    if (!ds.missing[i]) {
      sum += ds.values[i];
      ++count;
    }
  if (count == 0) throw ConfigError("training split has no observed points");
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (std::size_t i = 0; i < n_train; ++i)
    if (!ds.missing[i]) ss += (ds.values[i] - mean) * (ds.values[i] - mean);
  const double stddev = std::sqrt(ss / static_cast<double>(count));
  if (!(stddev > 0.0)) throw ConfigError("training split has zero variance");
  return {normalize_with(slice(ds, 0, n_train), mean, stddev),
          normalize_with(slice(ds, n_train, ds.size()), mean, stddev)};
}

}  // namespace lpcvae::data
