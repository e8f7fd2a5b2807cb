#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "lpcvae/autodiff.hpp"
#include "lpcvae/data.hpp"
#include "lpcvae/model/lpcvae.hpp"

namespace lpcvae::training {

using ad::Tensor;
using model::GaussianParams;

struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double beta_mean = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 512;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  std::size_t patience = 0;  // 0 disables early stopping
  std::size_t stride = 1;
  bool use_labels = true;    // false: alpha masks missing points only
  double val_frac = 0.0;     // > 0: hold out the last windows and early-stop on them
  bool fixed_noise = false;  // reuse each batch's noise draws in every epoch
};

inline void validate(const TrainConfig& c) {
  if (c.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(c.lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (c.epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (c.stride == 0) throw ConfigError("train.stride must be >= 1");
  if (!(c.val_frac >= 0.0) || c.val_frac >= 1.0) throw ConfigError("train.val_frac must lie in [0, 1)");
}

/// Per-row proportion of valid points, β_t = Σα / w.
inline std::vector<double> window_beta(const Tensor& alpha) {
  const std::size_t rows = alpha.rank() == 2 ? alpha.dim(0) : 1;
  const std::size_t w = alpha.numel() / rows;
  std::vector<double> beta(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < w; ++i) s += alpha[r * w + i];
    beta[r] = s / static_cast<double>(w);
  }
  return beta;
}

/// −Σ α_i log N(x_i; μ_i, σ_i) summed over every element (all windows of a
/// batch). Masked points contribute exactly zero, value and gradient.
inline Tensor masked_recon_loss(const GaussianParams& px, const Tensor& x, const Tensor& alpha) {
  if (px.mu.shape() != x.shape() || alpha.shape() != x.shape() || px.sigma.shape() != x.shape())
    throw DimensionError("masked_recon_loss: mu " + ad::shape_str(px.mu.shape()) + ", x " +
                         ad::shape_str(x.shape()) + ", alpha " + ad::shape_str(alpha.shape()));
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Tensor resid = ad::square(x - px.mu) / ad::mul_scalar(ad::square(px.sigma), 2.0);
  const Tensor nll = ad::add_scalar(ad::log(px.sigma) + resid, half_log_2pi);
  return ad::sum(alpha * nll);
}

/// Σ_rows β_t · KL(q ‖ N(0, I)) with the closed-form diagonal Gaussian KL.
inline Tensor weighted_kl(const GaussianParams& q, const Tensor& alpha) {
  const auto beta = window_beta(alpha);
  const std::size_t rows = beta.size();
  const std::size_t d = q.mu.numel() / rows;
  if (q.mu.numel() != rows * d || q.sigma.shape() != q.mu.shape())
    throw DimensionError("weighted_kl: posterior " + ad::shape_str(q.mu.shape()) + " vs alpha " +
                         ad::shape_str(alpha.shape()));
  std::vector<double> weights(rows * d);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < d; ++k) weights[r * d + k] = 0.5 * beta[r];
  const Tensor var = ad::square(q.sigma);
  const Tensor per_dim = ad::add_scalar(ad::square(q.mu) + var - ad::log(var), -1.0);
  return ad::sum(Tensor(q.mu.shape(), std::move(weights)) * per_dim);
}

/// Loss graph for one batch plus its scalar summary.
struct CmElbo {
  Tensor total;
  Tensor recon;
  Tensor kl;
  LossBreakdown values;
};

/// Masked reconstruction plus β-weighted KL, averaged over the batch windows.
inline CmElbo cm_elbo(const model::ForwardOutput& out, const Tensor& windows, const Tensor& alpha) {
  const double inv_b = 1.0 / static_cast<double>(windows.rank() == 2 ? windows.dim(0) : 1);
  CmElbo r;
  r.recon = ad::mul_scalar(masked_recon_loss(out.px, windows, alpha), inv_b);
  r.kl = ad::mul_scalar(weighted_kl(out.q_poe, alpha), inv_b);
  r.total = r.recon + r.kl;
  r.values.total = r.total.item();
  r.values.recon = r.recon.item();
  r.values.kl = r.kl.item();
  double bsum = 0.0;
  for (double b : window_beta(alpha)) bsum += b;
  r.values.beta_mean = bsum * inv_b;
  return r;
}

inline CmElbo cm_elbo(const model::ForwardOutput& out, const data::WindowBatch& batch) {
  return cm_elbo(out, Tensor({batch.batch, batch.window}, batch.windows),
                 Tensor({batch.batch, batch.window}, batch.alpha));
}

struct FitResult {
  model::LpcvaeModel model;
  std::vector<LossBreakdown> history;  // per-epoch window-weighted means (training batches)
  std::vector<double> val_history;     // per-epoch validation totals when val_frac > 0
  std::size_t epochs_run = 0;
  bool early_stopped = false;
};

namespace detail {
inline void accumulate(LossBreakdown& acc, const LossBreakdown& v, double weight) {
  acc.total += v.total * weight;
  acc.recon += v.recon * weight;
  acc.kl += v.kl * weight;
  acc.beta_mean += v.beta_mean * weight;
}
inline void scale(LossBreakdown& acc, double s) {
  acc.total *= s;
  acc.recon *= s;
  acc.kl *= s;
  acc.beta_mean *= s;
}
}  // namespace detail

/// Trains a fresh model on a normalized series: batch-shuffled epochs,
/// chronological order inside each batch, Adam on the CM-ELBO.
inline FitResult fit(const data::SeriesDataset& train, const model::ModelConfig& mcfg,
                     const TrainConfig& tcfg) {
  validate(tcfg);
  model::validate(mcfg);
  if (train.size() < mcfg.w)
    throw ConfigError("training split has " + std::to_string(train.size()) +
                      " points, fewer than one window of " + std::to_string(mcfg.w));
  FitResult res{model::LpcvaeModel(mcfg, Rng::stream(tcfg.seed, 0x1417).next_u64()), {}, {}, 0, false};
  auto& net = res.model;
  auto params = net.params().tensors();
  auto adam = ad::make_adam_state(params, tcfg.lr);

  // Window offsets, optionally split into a trailing validation block.
  std::vector<std::size_t> offsets;
  for (std::size_t off = 0; off + mcfg.w <= train.size(); off += tcfg.stride) offsets.push_back(off);
  const auto n_val = static_cast<std::size_t>(std::floor(tcfg.val_frac * static_cast<double>(offsets.size())));
  if (n_val >= offsets.size()) throw ConfigError("train.val_frac leaves no training windows");
  auto chunk = [&](std::size_t begin, std::size_t end) {
    std::vector<std::vector<std::size_t>> plan;
    for (std::size_t i = begin; i < end; ++i) {
      if (plan.empty() || plan.back().size() == tcfg.batch_size) plan.emplace_back();
      plan.back().push_back(offsets[i]);
    }
    return plan;
  };
  const auto train_plan = chunk(0, offsets.size() - n_val);
  const auto val_plan = chunk(offsets.size() - n_val, offsets.size());
  const auto feats = data::timestamp_features(train.timestamps);

  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_plan.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = Rng::stream(tcfg.seed, 0x5eed0000ULL + epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    LossBreakdown acc;
    std::size_t windows_seen = 0;
    for (std::size_t bi : order) {
      const auto batch = data::build_batch(train, feats, mcfg.w, tcfg.stride, train_plan[bi], tcfg.use_labels);
      const std::uint64_t key = (tcfg.fixed_noise ? 0 : (epoch + 1) << 32) | train_plan[bi].front();
      Rng noise = Rng::stream(tcfg.seed, key);
      ad::Tape tape;
      ad::TapeScope scope(tape);
      const auto out = net.forward(batch, /*training=*/true, noise);
      const auto loss = cm_elbo(out, batch);
      if (!std::isfinite(loss.values.total))
        throw NumericDomainError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch starting at offset " +
                                 std::to_string(train_plan[bi].front()));
      net.params().zero_grad();
      tape.backward(loss.total);
      ad::adam_step(params, adam);
      detail::accumulate(acc, loss.values, static_cast<double>(batch.batch));
      windows_seen += batch.batch;
    }
    net.params().zero_grad();
    detail::scale(acc, 1.0 / static_cast<double>(windows_seen));
    res.history.push_back(acc);
    res.epochs_run = epoch + 1;

    double monitored = acc.total;
    if (!val_plan.empty()) {
      ad::NoGradScope no_grad;
      LossBreakdown val;
      std::size_t seen = 0;
      for (const auto& starts : val_plan) {
        const auto batch = data::build_batch(train, feats, mcfg.w, tcfg.stride, starts, tcfg.use_labels);
        Rng noise = Rng::stream(tcfg.seed, 0xfa11ULL << 40 | starts.front());
        const auto loss = cm_elbo(net.forward(batch, false, noise), batch);
        detail::accumulate(val, loss.values, static_cast<double>(batch.batch));
        seen += batch.batch;
      }
      monitored = val.total / static_cast<double>(seen);
      res.val_history.push_back(monitored);
    }
    if (monitored < best) {
      best = monitored;
      since_best = 0;
    } else if (tcfg.patience > 0 && ++since_best >= tcfg.patience) {
      res.early_stopped = true;
      break;
    }
  }
  return res;
}

}  // namespace lpcvae::training
