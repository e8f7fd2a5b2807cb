#pragma once

// Slow, obviously-correct reference implementations shared by the unit tests
// and the acceptance binary. None of these call into the library code they
// are used to check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

namespace oracle {

/// O(w²) DFT bins 0..w/2 accumulated in long double.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t w = x.size();
  std::vector<std::complex<double>> out(w / 2 + 1);
  for (std::size_t k = 0; k <= w / 2; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t t = 0; t < w; ++t) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(k * t % w) /
                              static_cast<long double>(w);
      re += x[t] * std::cos(ang);
      im += x[t] * std::sin(ang);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

/// For each point, scan left and right to the edges of its label segment and
/// check whether any prediction inside fires.
inline std::vector<std::uint8_t> point_adjust(const std::vector<std::uint8_t>& pred,
                                              const std::vector<std::uint8_t>& labels) {
  const long n = static_cast<long>(labels.size());
  std::vector<std::uint8_t> out(pred);
  for (long i = 0; i < n; ++i) {
    if (!labels[i]) continue;
    long lo = i, hi = i;
    while (lo > 0 && labels[lo - 1]) --lo;
    while (hi + 1 < n && labels[hi + 1]) ++hi;
    for (long j = lo; j <= hi; ++j)
      if (pred[j]) out[i] = 1;
  }
  return out;
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double f1() const { return tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn); }
  bool operator==(const Counts&) const = default;
};

inline Counts confusion(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& labels) {
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && labels[i]) ++c.tp;
    else if (pred[i]) ++c.fp;
    else if (labels[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// Exhaustive sweep over one threshold below every score, the midpoints of
/// consecutive distinct scores and one above every score. Returns the counts
/// of the smallest threshold reaching the best F1.
inline Counts best_f1(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels, bool adjust) {
  std::vector<double> d(scores);
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end()), d.end());
  std::vector<double> thr = {d.front() - 1.0};
  for (std::size_t i = 0; i + 1 < d.size(); ++i) thr.push_back(d[i] + (d[i + 1] - d[i]) / 2.0);
  thr.push_back(d.back() + 1.0);
  Counts best;
  double best_f1 = -1.0;
  for (double t : thr) {
    std::vector<std::uint8_t> pred(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > t;
    const Counts c = confusion(adjust ? point_adjust(pred, labels) : pred, labels);
    if (c.f1() > best_f1) {
      best_f1 = c.f1();
      best = c;
    }
  }
  return best;
}

}  // namespace oracle
