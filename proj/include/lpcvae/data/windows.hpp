#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lpcvae/data/series.hpp"
#include "lpcvae/rng.hpp"

namespace lpcvae::data {

inline constexpr std::size_t kTimeFeatures = 6;

/// Per-point calendar features: (sin, cos) of minute-of-hour, hour-of-day and
/// day-of-week phases. Returned row-major, `kTimeFeatures` values per point.
inline std::vector<double> timestamp_features(std::span<const std::int64_t> timestamps) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::vector<double> out(timestamps.size() * kTimeFeatures);
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    const std::int64_t t = timestamps[i];
    const std::int64_t minutes = (t >= 0 ? t : t - 59) / 60;
    const std::int64_t hours = (t >= 0 ? t : t - 3599) / 3600;
    const std::int64_t days = (t >= 0 ? t : t - 86399) / 86400;
    const auto mod = [](std::int64_t a, std::int64_t m) { return ((a % m) + m) % m; };
    const double minute_of_hour = static_cast<double>(mod(minutes, 60));
    const double hour_of_day = static_cast<double>(mod(hours, 24));
    // 1970-01-01 was a Thursday; Sunday = 0.
    const double day_of_week = static_cast<double>(mod(days + 4, 7));
    const std::array<double, 3> phase = {kTwoPi * minute_of_hour / 60.0, kTwoPi * hour_of_day / 24.0,
                                         kTwoPi * day_of_week / 7.0};
    for (std::size_t k = 0; k < 3; ++k) {
      out[i * kTimeFeatures + 2 * k] = std::sin(phase[k]);
      out[i * kTimeFeatures + 2 * k + 1] = std::cos(phase[k]);
    }
  }
  return out;
}

/// A chronologically contiguous block of sliding windows.
struct WindowBatch {
  std::size_t batch = 0;   // B
  std::size_t window = 0;  // w
  std::size_t stride = 1;
  std::vector<double> windows;     // B×w normalized values
  std::vector<double> alpha;       // B×w validity flags
  std::vector<double> time_feats;  // B×w×kTimeFeatures
  std::vector<std::size_t> start_indices;
  std::vector<std::int64_t> end_timestamps;  // timestamp of each window's last point

  std::span<const double> window_values(std::size_t b) const {
    return std::span<const double>(windows).subspan(b * window, window);
  }
  std::span<const double> window_alpha(std::size_t b) const {
    return std::span<const double>(alpha).subspan(b * window, window);
  }
};

/// Window start offsets grouped into consecutive batches.
inline std::vector<std::vector<std::size_t>> plan_batches(std::size_t series_length, std::size_t w,
                                                          std::size_t stride, std::size_t batch_size) {
  if (w == 0 || w > series_length)
    throw ConfigError("window size " + std::to_string(w) + " exceeds series length " +
                      std::to_string(series_length));
  if (stride == 0) throw ConfigError("stride must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::vector<std::vector<std::size_t>> plan;
  for (std::size_t off = 0; off + w <= series_length; off += stride) {
    if (plan.empty() || plan.back().size() == batch_size) plan.emplace_back();
    plan.back().push_back(off);
  }
  return plan;
}

/// Materializes one batch. When `use_labels` is false only missing points are
/// masked (unlabeled training).
inline WindowBatch build_batch(const SeriesDataset& ds, std::span<const double> point_time_feats,
                               std::size_t w, std::size_t stride,
                               const std::vector<std::size_t>& starts, bool use_labels = true) {
  WindowBatch b;
  b.batch = starts.size();
  b.window = w;
  b.stride = stride;
  b.start_indices = starts;
  b.windows.resize(b.batch * w);
  b.alpha.resize(b.batch * w);
  b.time_feats.resize(b.batch * w * kTimeFeatures);
  b.end_timestamps.resize(b.batch);
  for (std::size_t j = 0; j < b.batch; ++j) {
    const std::size_t s = starts[j];
    if (s + w > ds.size()) throw ConfigError("window at offset " + std::to_string(s) + " overruns series");
    for (std::size_t i = 0; i < w; ++i) {
      const std::size_t p = s + i;
      b.windows[j * w + i] = ds.values[p];
      const bool bad = (use_labels && ds.labels[p]) || ds.missing[p];
      b.alpha[j * w + i] = bad ? 0.0 : 1.0;
      for (std::size_t k = 0; k < kTimeFeatures; ++k)
        b.time_feats[(j * w + i) * kTimeFeatures + k] = point_time_feats[p * kTimeFeatures + k];
    }
    b.end_timestamps[j] = ds.timestamps[s + w - 1];
  }
  return b;
}

/// Sliding windows at offsets 0, stride, 2·stride, ... grouped into
/// chronological batches. Shuffling permutes whole batches only.
inline std::vector<WindowBatch> make_batches(const SeriesDataset& ds, std::size_t w, std::size_t stride,
                                             std::size_t batch_size, bool shuffle, Rng& rng,
                                             bool use_labels = true) {
  auto plan = plan_batches(ds.size(), w, stride, batch_size);
  if (shuffle)
    for (std::size_t i = plan.size(); i > 1; --i) std::swap(plan[i - 1], plan[rng.below(i)]);
  const auto feats = timestamp_features(ds.timestamps);
  std::vector<WindowBatch> out;
  out.reserve(plan.size());
  for (const auto& starts : plan) out.push_back(build_batch(ds, feats, w, stride, starts, use_labels));
  return out;
}

}  // namespace lpcvae::data
