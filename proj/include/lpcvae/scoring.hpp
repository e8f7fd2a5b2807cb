#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lpcvae/autodiff.hpp"
#include "lpcvae/data.hpp"
#include "lpcvae/model/lpcvae.hpp"

namespace lpcvae::scoring {

using ad::Tensor;

/// Per-point anomaly scores aligned with the scored series; points that no
/// window ends at carry scored = 0.
struct ScoreSeries {
  std::vector<double> scores;
  std::vector<std::uint8_t> scored;
  std::size_t mc_samples = 0;

  std::size_t size() const { return scores.size(); }
};

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  bool adjusted = false;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct WindowScores {
  std::vector<double> window;      // −E[log p(X_t | z, c)] per window
  std::vector<double> last_point;  // the last point's share of it
};

/// Monte-Carlo reconstruction-probability score of every window in a batch,
/// with dropout off. Sample l of window b uses noise from a stream keyed by
/// (seed, timestamp of the window's last point), so a window's score does not
/// depend on which other windows are scored alongside it.
inline WindowScores anomaly_score(const model::LpcvaeModel& net, const data::WindowBatch& batch,
                                  std::size_t mc_samples, std::uint64_t seed) {
  if (mc_samples < 1) throw ConfigError("score.mc_samples must be >= 1");
  ad::NoGradScope no_grad;
  Rng unused(seed);
  const auto enc = net.encode_batch(batch, /*training=*/false, unused);
  const std::size_t b = batch.batch;
  const std::size_t w = batch.window;
  const std::size_t d = enc.q_poe.mu.numel() / b;
  std::vector<Rng> streams;
  streams.reserve(b);
  for (std::size_t j = 0; j < b; ++j)
    streams.push_back(Rng::stream(seed, static_cast<std::uint64_t>(batch.end_timestamps[j])));

  WindowScores out;
  out.window.assign(b, 0.0);
  out.last_point.assign(b, 0.0);
  std::vector<double> eps(b * d);
  for (std::size_t l = 0; l < mc_samples; ++l) {
    for (std::size_t j = 0; j < b; ++j)
      for (std::size_t k = 0; k < d; ++k) eps[j * d + k] = streams[j].normal();
    const Tensor z = model::reparameterize(enc.q_poe, Tensor(enc.q_poe.mu.shape(), eps));
    const auto px = net.decode(z, enc.r_time, enc.r_freq);
    for (std::size_t j = 0; j < b; ++j) {
      for (std::size_t i = 0; i < w; ++i) {
        const double lp = model::log_normal_density(batch.windows[j * w + i], px.mu[j * w + i],
                                                    px.sigma[j * w + i]);
        out.window[j] -= lp;
        if (i + 1 == w) out.last_point[j] -= lp;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(mc_samples);
  for (std::size_t j = 0; j < b; ++j) {
    out.window[j] *= inv;
    out.last_point[j] *= inv;
  }
  return out;
}

/// Scores a normalized series with stride-1 windows; point p receives the
/// last-point score of the window ending at p.
inline ScoreSeries score_series(const model::LpcvaeModel& net, const data::SeriesDataset& ds,
                                std::size_t mc_samples, std::uint64_t seed, std::size_t batch_size) {
  const std::size_t w = net.config().w;
  if (ds.size() < w)
    throw CompatibilityError("series of " + std::to_string(ds.size()) + " points is shorter than model.w = " +
                             std::to_string(w));
  ScoreSeries s;
  s.mc_samples = mc_samples;
  s.scores.assign(ds.size(), 0.0);
  s.scored.assign(ds.size(), 0);
  const auto feats = data::timestamp_features(ds.timestamps);
  for (const auto& starts : data::plan_batches(ds.size(), w, 1, batch_size)) {
    const auto batch = data::build_batch(ds, feats, w, 1, starts, /*use_labels=*/false);
    const auto ws = anomaly_score(net, batch, mc_samples, seed);
    for (std::size_t j = 0; j < starts.size(); ++j) {
      const std::size_t p = starts[j] + w - 1;
      s.scores[p] = ws.last_point[j];
      s.scored[p] = 1;
    }
  }
  return s;
}

/// Point adjustment: a ground-truth anomaly segment with at least one
/// positive prediction becomes fully positive.
inline std::vector<std::uint8_t> point_adjust(const std::vector<std::uint8_t>& pred,
                                              const std::vector<std::uint8_t>& labels) {
  if (pred.size() != labels.size())
    throw EvaluationError("point_adjust: " + std::to_string(pred.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  std::vector<std::uint8_t> out = pred;
  const std::size_t n = labels.size();
  for (std::size_t i = 0; i < n;) {
    if (!labels[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    bool hit = false;
    for (; j < n && labels[j]; ++j) hit = hit || pred[j];
    if (hit) std::fill(out.begin() + static_cast<long>(i), out.begin() + static_cast<long>(j), 1);
    i = j;
  }
  return out;
}

inline EvalReport prf1(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& labels) {
  if (pred.size() != labels.size())
    throw EvaluationError("prf1: " + std::to_string(pred.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  EvalReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && labels[i]) ++r.tp;
    else if (pred[i]) ++r.fp;
    else if (labels[i]) ++r.fn;
    else ++r.tn;
  }
  r.precision = r.tp + r.fp ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  // Equal to 2PR/(P+R); the count form makes equal ratios compare equal.
  r.f1 = r.tp ? 2.0 * static_cast<double>(r.tp) / static_cast<double>(2 * r.tp + r.fp + r.fn) : 0.0;
  return r;
}

/// Best F1 over thresholds placed at `grid` empirical quantiles of the scored
/// points (plus one below the minimum). A point is predicted anomalous when
/// its score exceeds the threshold; ties between thresholds resolve to the
/// smallest one. With grid >= number of scored points every distinct score is
/// a candidate, which makes the search exhaustive.
inline EvalReport best_f1_search(const ScoreSeries& s, const std::vector<std::uint8_t>& labels, bool adjust,
                                 std::size_t grid = 500) {
  if (grid < 2) throw ConfigError("score.grid must be >= 2");
  if (labels.size() != s.size())
    throw EvaluationError("best_f1_search: " + std::to_string(s.size()) + " scores for " +
                          std::to_string(labels.size()) + " labels");
  std::vector<double> vals;
  std::vector<std::uint8_t> lab;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.scored[i]) {
      vals.push_back(s.scores[i]);
      lab.push_back(labels[i]);
    }
  if (vals.empty()) throw EvaluationError("best_f1_search: no scored points");
  std::vector<double> sorted = vals;
  std::sort(sorted.begin(), sorted.end());
  // Just below the minimum flags every scored point.
  std::vector<double> thresholds = {std::nextafter(sorted.front(), -std::numeric_limits<double>::infinity())};
  const std::size_t n = sorted.size();
  for (std::size_t k = 0; k < grid; ++k) {
    const double pos = static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(grid - 1);
    thresholds.push_back(sorted[static_cast<std::size_t>(std::llround(pos))]);
  }
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  EvalReport best;
  bool have = false;
  std::vector<std::uint8_t> pred(vals.size());
  for (double thr : thresholds) {
    for (std::size_t i = 0; i < vals.size(); ++i) pred[i] = vals[i] > thr;
    EvalReport r = adjust ? prf1(point_adjust(pred, lab), lab) : prf1(pred, lab);
    if (!have || r.f1 > best.f1) {
      best = r;
      best.threshold = thr;
      have = true;
    }
  }
  best.adjusted = adjust;
  return best;
}

}  // namespace lpcvae::scoring
