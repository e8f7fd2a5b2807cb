#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lpcvae/error.hpp"

namespace lpcvae::spectral {

using Complex = std::complex<double>;

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 decimation-in-time FFT, X_k = Σ x_t e^{-2πi kt/n}.
inline void fft_inplace(std::vector<Complex>& a) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n))
    throw ConfigError("fft: length " + std::to_string(n) + " is not a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles computed directly rather than by repeated multiplication to
      // keep the per-bin error at the 1e-15 level.
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      const Complex wk(std::cos(ang), std::sin(ang));
      for (std::size_t i = 0; i < n; i += len) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * wk;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

/// Non-redundant half of the DFT of a real signal: bins 0..w/2.
inline std::vector<Complex> rfft(std::span<const double> x) {
  if (!is_power_of_two(x.size()))
    throw ConfigError("rfft: length " + std::to_string(x.size()) + " is not a power of two");
  std::vector<Complex> a(x.begin(), x.end());
  fft_inplace(a);
  a.resize(x.size() / 2 + 1);
  return a;
}

/// Magnitude features handed to the frequency branch.
struct Spectrum {
  std::vector<double> magnitudes;  // bins 1..w/2
  std::size_t window_size = 0;
};

/// Amplitude spectrum without the DC bin. Bins 1..w/2-1 are scaled by 2/w and
/// the Nyquist bin by 1/w, so a unit-amplitude tone reads 1 at its bin.
inline Spectrum spectrum_features(std::span<const double> x) {
  const auto bins = rfft(x);
  const std::size_t w = x.size();
  Spectrum s;
  s.window_size = w;
  s.magnitudes.resize(w / 2);
  for (std::size_t k = 1; k <= w / 2; ++k) {
    const double scale = (k == w / 2 ? 1.0 : 2.0) / static_cast<double>(w);
    s.magnitudes[k - 1] = std::abs(bins[k]) * scale;
  }
  return s;
}

}  // namespace lpcvae::spectral
