#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "lpcvae/rng.hpp"
#include "lpcvae/spectral.hpp"
#include "oracles.hpp"

using namespace lpcvae;
using spectral::Complex;

namespace {

std::vector<double> random_signal(std::size_t w, Rng& rng) {
  std::vector<double> x(w);
  for (double& v : x) v = rng.normal();
  return x;
}

}  // namespace

TEST(Rfft, ConstantIsDcOnly) {
  const auto bins = spectral::rfft(std::vector<double>{1, 1, 1, 1});
  ASSERT_EQ(bins.size(), 3u);
  EXPECT_EQ(bins[0], Complex(4, 0));
  EXPECT_NEAR(std::abs(bins[1]), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(bins[2]), 0.0, 1e-15);
}

TEST(Rfft, OneSineCycle) {
  const auto bins = spectral::rfft(std::vector<double>{0, 1, 0, -1});
  EXPECT_NEAR(bins[1].real(), 0.0, 1e-15);
  EXPECT_NEAR(bins[1].imag(), -2.0, 1e-15);
  EXPECT_NEAR(std::abs(bins[0]), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(bins[2]), 0.0, 1e-15);
}

TEST(Rfft, MatchesNaiveDft) {
  Rng rng(64);
  for (std::size_t w : {2u, 8u, 64u, 256u}) {
    const auto x = random_signal(w, rng);
    const auto fast = spectral::rfft(x);
    const auto slow = oracle::naive_dft(x);
    for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_LT(std::abs(fast[k] - slow[k]), 1e-9) << "w=" << w << " k=" << k;
  }
}

TEST(Rfft, NonPowerOfTwoIsConfigError) {
  EXPECT_THROW(spectral::rfft(std::vector<double>(6, 0.0)), ConfigError);
  EXPECT_THROW(spectral::rfft(std::vector<double>{}), ConfigError);
}

TEST(Rfft, Parseval) {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t w = std::size_t{1} << (1 + rep % 8);
    const auto x = random_signal(w, rng);
    const auto bins = spectral::rfft(x);
    double energy = 0.0, spec = 0.0;
    for (double v : x) energy += v * v;
    for (std::size_t k = 0; k < bins.size(); ++k) {
      const double weight = (k == 0 || k == w / 2) ? 1.0 : 2.0;
      spec += weight * std::norm(bins[k]);
    }
    EXPECT_NEAR(spec / static_cast<double>(w), energy, 1e-9 * energy);
  }
}

TEST(Rfft, Linearity) {
  Rng rng(6);
  const auto x = random_signal(128, rng), y = random_signal(128, rng);
  const double a = 1.7, b = -0.4;
  std::vector<double> z(128);
  for (std::size_t i = 0; i < 128; ++i) z[i] = a * x[i] + b * y[i];
  const auto fx = spectral::rfft(x), fy = spectral::rfft(y), fz = spectral::rfft(z);
  for (std::size_t k = 0; k < fz.size(); ++k) EXPECT_LT(std::abs(fz[k] - (a * fx[k] + b * fy[k])), 1e-9);
}

TEST(SpectrumFeatures, ConstantWindowIsAllZero) {
  const auto s = spectral::spectrum_features(std::vector<double>(16, 3.5));
  ASSERT_EQ(s.magnitudes.size(), 8u);
  EXPECT_EQ(s.window_size, 16u);
  for (double m : s.magnitudes) EXPECT_NEAR(m, 0.0, 1e-15);
}

TEST(SpectrumFeatures, UnitToneReadsOneAtItsBin) {
  const std::size_t w = 64;
  std::vector<double> x(w);
  for (std::size_t t = 0; t < w; ++t) x[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / w);
  const auto s = spectral::spectrum_features(x);
  EXPECT_NEAR(s.magnitudes[0], 1.0, 1e-9);
  for (std::size_t k = 1; k < s.magnitudes.size(); ++k) EXPECT_LT(s.magnitudes[k], 1e-9);
}

TEST(SpectrumFeatures, AmplitudeScalesLinearlyAtEveryBin) {
  const std::size_t w = 32;
  for (std::size_t k = 1; k <= w / 2; ++k) {
    const double a = 0.25 + 0.1 * static_cast<double>(k);
    std::vector<double> x(w);
    // A cosine keeps the Nyquist tone nonzero at every sample.
    for (std::size_t t = 0; t < w; ++t)
      x[t] = a * std::cos(2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(w));
    const auto s = spectral::spectrum_features(x);
    EXPECT_NEAR(s.magnitudes[k - 1], a, 1e-9) << "bin " << k;
  }
}

TEST(SpectrumFeatures, CircularShiftKeepsMagnitudes) {
  Rng rng(9);
  const auto x = random_signal(64, rng);
  const auto base = spectral::spectrum_features(x);
  for (std::size_t shift : {1u, 7u, 33u}) {
    std::vector<double> y(64);
    for (std::size_t t = 0; t < 64; ++t) y[(t + shift) % 64] = x[t];
    const auto s = spectral::spectrum_features(y);
    for (std::size_t k = 0; k < s.magnitudes.size(); ++k) EXPECT_NEAR(s.magnitudes[k], base.magnitudes[k], 1e-9);
  }
}

TEST(SpectrumFeatures, MagnitudesAreNonNegative) {
  Rng rng(10);
  for (int rep = 0; rep < 10; ++rep)
    for (double m : spectral::spectrum_features(random_signal(32, rng)).magnitudes) EXPECT_GE(m, 0.0);
}
