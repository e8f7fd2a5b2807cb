#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lpcvae/data.hpp"
#include "lpcvae/gradcheck_suite.hpp"
#include "lpcvae/training.hpp"

using namespace lpcvae;
using ad::Tensor;
using model::GaussianParams;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

GaussianParams gaussian(ad::Shape shape, std::vector<double> mu, std::vector<double> sigma) {
  return {Tensor(shape, std::move(mu), true), Tensor(shape, std::move(sigma), true)};
}

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.w = 16;
  c.conv_channels = 4;
  c.d_cond = 6;
  c.d_latent = 3;
  c.mlp_hidden = 8;
  return c;
}

data::SeriesDataset sinusoid(std::size_t n, double noise, std::uint64_t seed) {
  data::SynthConfig cfg;
  cfg.length = n;
  cfg.periods = {20.0};
  cfg.noise_sigma = noise;
  Rng rng(seed);
  const auto ds = data::synth_generate(cfg, rng);
  return data::normalize_with(ds, 0.0, 1.0 / std::sqrt(2.0));
}

}  // namespace

// ---------------------------------------------------------------------------
// reconstruction term

TEST(MaskedRecon, FullyMaskedIsZero) {
  const auto px = gaussian({1, 3}, {0.1, 5, -2}, {0.5, 2, 1});
  const Tensor x({1, 3}, {3, -3, 9});
  EXPECT_EQ(training::masked_recon_loss(px, x, Tensor::zeros({1, 3})).item(), 0.0);
}

TEST(MaskedRecon, ModeDensity) {
  const auto px = gaussian({1, 1}, {0.7}, {1.0});
  const double v = training::masked_recon_loss(px, Tensor({1, 1}, {0.7}), Tensor({1, 1}, {1.0})).item();
  EXPECT_NEAR(v, 0.9189385332046727, 1e-15);
}

TEST(MaskedRecon, DoublingResidualQuadruplesQuadraticTerm) {
  const auto px = gaussian({1, 1}, {0.0}, {1.0});
  const Tensor a = Tensor({1, 1}, {1.0});
  const double r1 = training::masked_recon_loss(px, Tensor({1, 1}, {0.3}), a).item() - kHalfLog2Pi;
  const double r2 = training::masked_recon_loss(px, Tensor({1, 1}, {0.6}), a).item() - kHalfLog2Pi;
  EXPECT_NEAR(r2, 4.0 * r1, 1e-15);
}

TEST(MaskedRecon, MatchesDirectSum) {
  Rng rng(1);
  std::vector<double> mu(12), sigma(12), x(12), alpha(12);
  double expected = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    mu[i] = rng.normal();
    sigma[i] = std::exp(rng.uniform(-1, 1));
    x[i] = rng.normal();
    alpha[i] = rng.bernoulli(0.7) ? 1.0 : 0.0;
    expected -= alpha[i] * model::log_normal_density(x[i], mu[i], sigma[i]);
  }
  const double got =
      training::masked_recon_loss(gaussian({3, 4}, mu, sigma), Tensor({3, 4}, x), Tensor({3, 4}, alpha)).item();
  EXPECT_NEAR(got, expected, 1e-12);
}

TEST(MaskedRecon, MaskedPositionsGetExactlyZeroGradient) {
  Rng rng(2);
  std::vector<double> mu(8), sigma(8), x(8);
  for (std::size_t i = 0; i < 8; ++i) {
    mu[i] = rng.normal();
    sigma[i] = std::exp(rng.uniform(-1, 1));
    x[i] = 10.0 * rng.normal();
  }
  auto px = gaussian({2, 4}, mu, sigma);
  const Tensor alpha({2, 4}, {1, 0, 1, 1, 0, 0, 1, 0});
  ad::Tape tape;
  {
    ad::TapeScope scope(tape);
    tape.backward(training::masked_recon_loss(px, Tensor({2, 4}, x), alpha));
  }
  for (std::size_t i = 0; i < 8; ++i) {
    if (alpha[i] == 0.0) {
      EXPECT_EQ(px.mu.grad()[i], 0.0);
      EXPECT_EQ(px.sigma.grad()[i], 0.0);
    } else {
      EXPECT_NE(px.mu.grad()[i], 0.0);
    }
  }
}

TEST(MaskedRecon, ShapeMismatchIsDimensionError) {
  const auto px = gaussian({1, 3}, {0, 0, 0}, {1, 1, 1});
  EXPECT_THROW(training::masked_recon_loss(px, Tensor::zeros({1, 4}), Tensor::zeros({1, 4})), DimensionError);
}

// ---------------------------------------------------------------------------
// KL term

TEST(WeightedKl, StandardNormalIsZero) {
  const auto q = gaussian({2, 3}, std::vector<double>(6, 0.0), std::vector<double>(6, 1.0));
  EXPECT_EQ(training::weighted_kl(q, Tensor::full({2, 4}, 1.0)).item(), 0.0);
}

TEST(WeightedKl, UnitShiftedMean) {
  const auto q = gaussian({1, 1}, {1.0}, {1.0});
  EXPECT_DOUBLE_EQ(training::weighted_kl(q, Tensor::full({1, 4}, 1.0)).item(), 0.5);
}

TEST(WeightedKl, BetaIsValidFraction) {
  const Tensor alpha({1, 4}, {1, 1, 0, 1});
  EXPECT_EQ(training::window_beta(alpha), (std::vector<double>{0.75}));
  const auto q = gaussian({1, 2}, {0.4, -1.0}, {0.5, 2.0});
  const double full = training::weighted_kl(q, Tensor::full({1, 4}, 1.0)).item();
  EXPECT_NEAR(training::weighted_kl(q, alpha).item(), 0.75 * full, 1e-15);
}

TEST(WeightedKl, NonNegativeAndMatchesClosedForm) {
  Rng rng(3);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> mu(4), sigma(4), alpha(8);
    double expected = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      mu[k] = rng.uniform(-3, 3);
      sigma[k] = std::exp(rng.uniform(-5, 5));
      expected += 0.5 * (mu[k] * mu[k] + sigma[k] * sigma[k] - 1.0 - std::log(sigma[k] * sigma[k]));
    }
    double valid = 0.0;
    for (double& a : alpha) valid += (a = rng.bernoulli(0.6) ? 1.0 : 0.0);
    const Tensor al({1, 8}, alpha);
    const double beta = training::window_beta(al)[0];
    EXPECT_GE(beta, 0.0);
    EXPECT_LE(beta, 1.0);
    const double kl = training::weighted_kl(gaussian({1, 4}, mu, sigma), al).item();
    EXPECT_GE(kl, 0.0);
    EXPECT_NEAR(kl, valid / 8.0 * expected, 1e-10 * std::max(1.0, expected));
  }
}

// ---------------------------------------------------------------------------
// CM-ELBO on the model

TEST(CmElbo, FullyMaskedBatchHasZeroLossAndGradients) {
  model::LpcvaeModel net(tiny_model(), 4);
  auto ds = sinusoid(40, 0.1, 4);
  std::fill(ds.labels.begin(), ds.labels.end(), 1);
  const auto batch = data::build_batch(ds, data::timestamp_features(ds.timestamps), 16, 1, {0, 1, 2});
  Rng rng(4);
  ad::Tape tape;
  ad::TapeScope scope(tape);
  const auto loss = training::cm_elbo(net.forward(batch, true, rng), batch);
  EXPECT_EQ(loss.values.total, 0.0);
  EXPECT_EQ(loss.values.beta_mean, 0.0);
  tape.backward(loss.total);
  for (const auto& [name, t] : net.params().items())
    for (double g : t.grad()) EXPECT_EQ(g, 0.0) << name;
}

TEST(CmElbo, HalvingValidPointsHalvesKl) {
  model::LpcvaeModel net(tiny_model(), 5);
  const auto ds = sinusoid(40, 0.1, 5);
  auto batch = data::build_batch(ds, data::timestamp_features(ds.timestamps), 16, 1, {0, 1});
  Rng rng(5);
  const auto out = net.forward(batch, false, rng);
  const auto full = training::cm_elbo(out, batch);
  for (std::size_t i = 0; i < batch.alpha.size(); i += 2) batch.alpha[i] = 0.0;
  const auto half = training::cm_elbo(out, batch);
  EXPECT_NEAR(half.values.kl, 0.5 * full.values.kl, 1e-14);
  EXPECT_DOUBLE_EQ(half.values.beta_mean, 0.5);
  EXPECT_DOUBLE_EQ(full.values.beta_mean, 1.0);
}

TEST(CmElbo, TotalIsReconPlusKlAveragedOverWindows) {
  model::LpcvaeModel net(tiny_model(), 6);
  auto ds = sinusoid(60, 0.1, 6);
  ds.labels[20] = 1;
  const auto batch = data::build_batch(ds, data::timestamp_features(ds.timestamps), 16, 1, {10, 11, 12, 13});
  Rng rng(6);
  const auto out = net.forward(batch, false, rng);
  const auto l = training::cm_elbo(out, batch);
  EXPECT_NEAR(l.values.total, l.values.recon + l.values.kl, 1e-12 * std::abs(l.values.total));
  const Tensor x({4, 16}, batch.windows), a({4, 16}, batch.alpha);
  EXPECT_NEAR(l.values.recon, training::masked_recon_loss(out.px, x, a).item() / 4.0, 1e-12);
  EXPECT_GT(l.values.kl, 0.0);
}

TEST(CmElbo, TinyModelGradientMatchesFiniteDifferences) {
  for (auto v : {model::Variant::kFull, model::Variant::kConcatFusion}) {
    const auto r = diagnostics::full_model_check(31, v);
    EXPECT_LT(r.max_rel_error, 1e-4) << model::to_string(v);
  }
}

// ---------------------------------------------------------------------------
// fit

TEST(Fit, ZeroLearningRateFreezesParameters) {
  training::TrainConfig t;
  t.epochs = 3;
  t.batch_size = 16;
  t.lr = 0.0;
  t.seed = 7;
  t.fixed_noise = true;
  const auto ds = sinusoid(120, 0.1, 7);
  const auto res = training::fit(ds, tiny_model(), t);
  const model::LpcvaeModel fresh(tiny_model(), Rng::stream(7, 0x1417).next_u64());
  for (const auto& [name, p] : fresh.params().items()) {
    const auto q = res.model.param(name);
    EXPECT_TRUE(std::equal(p.data().begin(), p.data().end(), q.data().begin())) << name;
  }
  ASSERT_EQ(res.history.size(), 3u);
  for (const auto& h : res.history) EXPECT_NEAR(h.total, res.history[0].total, 1e-12 * std::abs(h.total));
}

TEST(Fit, SameSeedReproducesHistoryAndWeights) {
  training::TrainConfig t;
  t.epochs = 3;
  t.batch_size = 32;
  t.lr = 1e-3;
  t.seed = 8;
  const auto ds = sinusoid(200, 0.1, 8);
  const auto a = training::fit(ds, tiny_model(), t);
  const auto b = training::fit(ds, tiny_model(), t);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].total, b.history[e].total);
    EXPECT_EQ(a.history[e].kl, b.history[e].kl);
  }
  for (const auto& [name, p] : a.model.params().items()) {
    const auto q = b.model.param(name);
    EXPECT_TRUE(std::equal(p.data().begin(), p.data().end(), q.data().begin())) << name;
  }
  t.seed = 9;
  EXPECT_NE(training::fit(ds, tiny_model(), t).history.back().total, a.history.back().total);
}

TEST(Fit, LossFallsOnCleanSinusoid) {
  training::TrainConfig t;
  t.epochs = 30;
  t.batch_size = 32;
  t.lr = 2e-3;
  t.seed = 10;
  const auto res = training::fit(sinusoid(600, 0.0, 10), tiny_model(), t);
  EXPECT_LT(res.history.back().total, 0.5 * res.history.front().total);
  EXPECT_EQ(res.history.front().beta_mean, 1.0);
}

TEST(Fit, PatienceStopsEarly) {
  training::TrainConfig t;
  t.epochs = 50;
  t.batch_size = 16;
  t.lr = 0.0;
  t.patience = 2;
  t.seed = 11;
  t.fixed_noise = true;
  const auto res = training::fit(sinusoid(100, 0.1, 11), tiny_model(), t);
  EXPECT_TRUE(res.early_stopped);
  EXPECT_LT(res.epochs_run, 50u);
}

TEST(Fit, ValidationHoldoutIsTracked) {
  training::TrainConfig t;
  t.epochs = 2;
  t.batch_size = 16;
  t.val_frac = 0.25;
  t.seed = 12;
  const auto res = training::fit(sinusoid(100, 0.1, 12), tiny_model(), t);
  EXPECT_EQ(res.val_history.size(), 2u);
}

TEST(Fit, NonFiniteLossNamesEpochAndBatch) {
  auto ds = sinusoid(60, 0.1, 13);
  ds.values[30] = std::numeric_limits<double>::infinity();
  training::TrainConfig t;
  t.epochs = 1;
  t.batch_size = 8;
  try {
    training::fit(ds, tiny_model(), t);
    FAIL() << "expected NumericDomainError";
  } catch (const NumericDomainError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
}

TEST(Fit, TooShortSeriesIsConfigError) {
  training::TrainConfig t;
  EXPECT_THROW(training::fit(sinusoid(10, 0.1, 14), tiny_model(), t), ConfigError);
  t.batch_size = 0;
  EXPECT_THROW(training::fit(sinusoid(100, 0.1, 14), tiny_model(), t), ConfigError);
}
