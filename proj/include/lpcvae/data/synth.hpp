#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "lpcvae/data/series.hpp"
#include "lpcvae/rng.hpp"

namespace lpcvae::data {

enum class AnomalyKind { kSpike, kLevelShift, kDropout };

inline std::string to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::kSpike: return "spike";
    case AnomalyKind::kLevelShift: return "level_shift";
    case AnomalyKind::kDropout: return "dropout";
  }
  return "?";
}

inline AnomalyKind parse_anomaly_kind(const std::string& s) {
  if (s == "spike") return AnomalyKind::kSpike;
  if (s == "level_shift") return AnomalyKind::kLevelShift;
  if (s == "dropout") return AnomalyKind::kDropout;
  throw ConfigError("unknown anomaly kind '" + s + "' (expected spike, level_shift or dropout)");
}

struct SynthConfig {
  std::size_t length = 4096;
  std::vector<double> periods = {100.0};
  std::vector<double> amplitudes = {1.0};
  double noise_sigma = 0.0;
  double anomaly_rate = 0.0;
  std::vector<AnomalyKind> kinds = {AnomalyKind::kSpike};
  std::int64_t stride_seconds = 60;
  std::int64_t start_timestamp = 0;
  // Spike size in units of noise_sigma (units of 0.1 when the series is noiseless).
  double spike_min_sigma = 5.0;
  double spike_max_sigma = 8.0;
  std::size_t level_shift_length = 20;
  double level_shift_size = 1.0;
  std::size_t dropout_length = 10;
};

inline std::size_t anomaly_length(const SynthConfig& cfg, AnomalyKind k) {
  switch (k) {
    case AnomalyKind::kSpike: return 1;
    case AnomalyKind::kLevelShift: return std::max<std::size_t>(1, cfg.level_shift_length);
    case AnomalyKind::kDropout: return std::max<std::size_t>(1, cfg.dropout_length);
  }
  return 1;
}

/// Noise-free signal value at step t.
inline double synth_clean_value(const SynthConfig& cfg, std::size_t t) {
  double v = 0.0;
  for (std::size_t k = 0; k < cfg.periods.size(); ++k)
    v += cfg.amplitudes[k] * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / cfg.periods[k]);
  return v;
}

inline void validate(const SynthConfig& cfg) {
  if (cfg.length < 2) throw ConfigError("synth.length must be >= 2");
  if (cfg.periods.empty() || cfg.periods.size() != cfg.amplitudes.size())
    throw ConfigError("synth.periods and synth.amplitudes must be non-empty and of equal length");
  for (double p : cfg.periods)
    if (!(p > 0.0)) throw ConfigError("synth.periods must be positive");
  if (!(cfg.noise_sigma >= 0.0)) throw ConfigError("synth.noise_sigma must be >= 0");
  if (!(cfg.anomaly_rate >= 0.0) || cfg.anomaly_rate >= 0.5)
    throw ConfigError("synth.anomaly_rate must lie in [0, 0.5), got " + std::to_string(cfg.anomaly_rate));
  if (cfg.anomaly_rate > 0.0 && cfg.kinds.empty()) throw ConfigError("synth.kinds is empty");
  if (!(cfg.spike_min_sigma > 0.0) || cfg.spike_max_sigma < cfg.spike_min_sigma)
    throw ConfigError("synth spike size range is invalid");
  if (cfg.stride_seconds <= 0) throw ConfigError("synth.stride_seconds must be positive");
}

/// Sum of sinusoids plus Gaussian noise with injected, exactly labeled
/// anomalies. Anomaly segments never touch each other.
inline SeriesDataset synth_generate(const SynthConfig& cfg, Rng& rng) {
  validate(cfg);
  SeriesDataset ds;
  const std::size_t n = cfg.length;
  ds.values.resize(n);
  ds.timestamps.resize(n);
  ds.labels.assign(n, 0);
  ds.missing.assign(n, 0);
  for (std::size_t t = 0; t < n; ++t) {
    ds.timestamps[t] = cfg.start_timestamp + static_cast<std::int64_t>(t) * cfg.stride_seconds;
    ds.values[t] = synth_clean_value(cfg, t);
    if (cfg.noise_sigma > 0.0) ds.values[t] += cfg.noise_sigma * rng.normal();
  }
  if (cfg.anomaly_rate <= 0.0) return ds;

  double mean_len = 0.0;
  for (auto k : cfg.kinds) mean_len += static_cast<double>(anomaly_length(cfg, k));
  mean_len /= static_cast<double>(cfg.kinds.size());
  const double start_prob = cfg.anomaly_rate / mean_len;
  const double spike_unit = cfg.noise_sigma > 0.0 ? cfg.noise_sigma : 0.1;
  double amp_total = 0.0;
  for (double a : cfg.amplitudes) amp_total += std::abs(a);

  for (std::size_t t = 0; t < n;) {
    if (!rng.bernoulli(start_prob)) {
      ++t;
      continue;
    }
    const AnomalyKind kind = cfg.kinds[rng.below(cfg.kinds.size())];
    const std::size_t len = std::min(anomaly_length(cfg, kind), n - t);
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    switch (kind) {
      case AnomalyKind::kSpike: {
        const double mag = rng.uniform(cfg.spike_min_sigma, cfg.spike_max_sigma) * spike_unit;
        ds.values[t] = synth_clean_value(cfg, t) + sign * mag;
        break;
      }
      case AnomalyKind::kLevelShift:
        for (std::size_t i = 0; i < len; ++i) ds.values[t + i] += sign * cfg.level_shift_size * amp_total;
        break;
      case AnomalyKind::kDropout:
        for (std::size_t i = 0; i < len; ++i) ds.values[t + i] = 0.0;
        break;
    }
    for (std::size_t i = 0; i < len; ++i) ds.labels[t + i] = 1;
    t += len + 1;  // one normal point between segments
  }
  return ds;
}

}  // namespace lpcvae::data
