#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lpcvae/autodiff.hpp"
#include "lpcvae/data.hpp"
#include "lpcvae/model/lpcvae.hpp"
#include "lpcvae/training.hpp"

namespace lpcvae::diagnostics {

using ad::Tensor;

/// One registry entry: builds a random instance from `seed` and returns the
/// finite-difference comparison for it.
struct GradcheckCase {
  std::string name;
  std::function<ad::GradCheckResult(std::uint64_t seed)> run;
};

struct GradcheckRow {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t points = 0;
  bool pass = false;
};

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckRtol = 1e-4;

namespace detail {

inline Tensor uniform(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::numel_of(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), true);
}

/// Values with |x| >= margin, keeping ReLU/clamp kinks out of reach of the FD step.
inline Tensor away_from(ad::Shape shape, Rng& rng, double kink, double margin, double spread = 1.0) {
  std::vector<double> v(ad::numel_of(shape));
  for (double& x : v) {
    const double mag = rng.uniform(margin, margin + spread);
    x = kink + (rng.bernoulli(0.5) ? mag : -mag);
  }
  return Tensor(std::move(shape), std::move(v), true);
}

/// Values pairwise separated by at least `gap`, so maxpool has no near-ties.
inline Tensor distinct(ad::Shape shape, Rng& rng, double gap = 1e-2) {
  const std::size_t n = ad::numel_of(shape);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i) * gap;
  for (std::size_t i = n; i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  for (double& x : v) x += rng.uniform(0.0, 0.3 * gap);
  return Tensor(std::move(shape), std::move(v), true);
}

// Weighted sum with fixed random weights, so every output element matters.
inline Tensor probe(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed ^ 0xabcdefULL);
  std::vector<double> wv(y.numel());
  for (double& x : wv) x = rng.uniform(-1.0, 1.0);
  return ad::sum(y * Tensor(y.shape(), std::move(wv)));
}

inline GradcheckCase unary_case(std::string name, Tensor (*op)(const Tensor&), double lo, double hi) {
  return {name, [op, lo, hi](std::uint64_t seed) {
            Rng rng(seed);
            Tensor x = uniform({3, 4}, rng, lo, hi);
            return ad::finite_diff_check([&] { return probe(op(x), seed); }, x, kGradcheckStep);
          }};
}

inline GradcheckCase binary_case(std::string name, Tensor (*op)(const Tensor&, const Tensor&), double lo,
                                 double hi) {
  return {name, [op, lo, hi](std::uint64_t seed) {
            Rng rng(seed);
            Tensor a = uniform({2, 5}, rng, lo, hi);
            Tensor b = uniform({2, 5}, rng, lo, hi);
            return ad::finite_diff_check([&] { return probe(op(a, b), seed); }, {a, b}, kGradcheckStep);
          }};
}

}  // namespace detail

/// Tiny configuration used for end-to-end gradient checks.
inline model::ModelConfig tiny_gradcheck_config(model::Variant variant = model::Variant::kFull) {
  model::ModelConfig c;
  c.w = 8;
  c.conv_channels = 2;
  c.conv_kernel = 3;
  c.pool = 2;
  c.d_cond = 4;
  c.d_latent = 2;
  c.mlp_hidden = 4;
  c.dropout_rate = 0.1;
  c.variant = variant;
  return c;
}

/// Finite-difference check of the CM-ELBO of a tiny model over a 3-window
/// batch with respect to every parameter.
inline ad::GradCheckResult full_model_check(std::uint64_t seed, model::Variant variant) {
  const auto cfg = tiny_gradcheck_config(variant);
  model::LpcvaeModel net(cfg, seed);
  Rng rng(seed + 17);
  // Zero-initialized biases put dead ReLU rows exactly on the kink, so every
  // parameter is jittered. A decoder sigma near 0.4 cancels most of the
  // 0.5·log(2π) constant per point: a small loss keeps the FD roundoff
  // (about ulp(loss) / h) well below the smallest LSTM gradients.
  for (auto [name, p] : net.params().items()) {
    const double shift = name == "dec.logvar.bias" ? -1.8 : 0.0;
    for (double& v : p.mutable_data()) v += shift + rng.uniform(-0.3, 0.3);
  }
  data::SeriesDataset ds;
  const std::size_t n = cfg.w + 2;
  for (std::size_t i = 0; i < n; ++i) {
    ds.values.push_back(rng.uniform(-0.5, 0.5));
    ds.timestamps.push_back(1'700'000'000 + static_cast<std::int64_t>(i) * 3600 * 7);
    ds.labels.push_back(i == 4 ? 1 : 0);
    ds.missing.push_back(0);
  }
  const auto feats = data::timestamp_features(ds.timestamps);
  const auto batch = data::build_batch(ds, feats, cfg.w, 1, {0, 1, 2});
  auto loss = [&] {
    Rng noise(seed * 31 + 7);
    return training::cm_elbo(net.forward(batch, true, noise), batch).total;
  };
  return ad::finite_diff_check(loss, net.params().tensors(), kGradcheckStep);
}

/// Every differentiable operation plus the end-to-end models.
inline std::vector<GradcheckCase> default_gradcheck_cases() {
  using namespace detail;
  std::vector<GradcheckCase> cases;
  cases.push_back(unary_case("relu", [](const Tensor& x) { return ad::relu(x); }, 0.0, 0.0));
  cases.back().run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = away_from({3, 4}, rng, 0.0, 0.05);
    return ad::finite_diff_check([&] { return probe(ad::relu(x), seed); }, x, kGradcheckStep);
  };
  cases.push_back(unary_case("tanh", [](const Tensor& x) { return ad::tanh(x); }, -2.0, 2.0));
  cases.push_back(unary_case("sigmoid", [](const Tensor& x) { return ad::sigmoid(x); }, -3.0, 3.0));
  cases.push_back(unary_case("exp", [](const Tensor& x) { return ad::exp(x); }, -2.0, 2.0));
  cases.push_back(unary_case("log", [](const Tensor& x) { return ad::log(x); }, 0.2, 3.0));
  cases.push_back(unary_case("sqrt", [](const Tensor& x) { return ad::sqrt(x); }, 0.2, 3.0));
  cases.push_back(unary_case("neg", [](const Tensor& x) { return ad::neg(x); }, -2.0, 2.0));
  cases.push_back(unary_case("square", [](const Tensor& x) { return ad::square(x); }, -2.0, 2.0));
  cases.push_back({"clamp", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = away_from({3, 4}, rng, 0.0, 0.05, 2.0);
                     auto d = x.mutable_data();
                     for (double& v : d)
                       if (std::abs(std::abs(v) - 1.0) < 0.05) v *= 1.2;
                     return ad::finite_diff_check([&] { return probe(ad::clamp(x, -1.0, 1.0), seed); }, x,
                                                  kGradcheckStep);
                   }});
  cases.push_back(binary_case("add", [](const Tensor& a, const Tensor& b) { return ad::add(a, b); }, -2, 2));
  cases.push_back(binary_case("sub", [](const Tensor& a, const Tensor& b) { return ad::sub(a, b); }, -2, 2));
  cases.push_back(binary_case("mul", [](const Tensor& a, const Tensor& b) { return ad::mul(a, b); }, -2, 2));
  cases.push_back(binary_case("div", [](const Tensor& a, const Tensor& b) { return ad::div(a, b); }, 0.5, 2));
  cases.push_back({"scalar_broadcast", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor a = uniform({1}, rng, 0.5, 2.0);
                     Tensor b = uniform({2, 3}, rng, 0.5, 2.0);
                     return ad::finite_diff_check([&] { return probe(a / b + b * a, seed); }, {a, b},
                                                  kGradcheckStep);
                   }});
  cases.push_back({"sum", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = uniform({4, 3}, rng);
                     return ad::finite_diff_check([&] { return ad::sum(ad::square(x)); }, x, kGradcheckStep);
                   }});
  cases.push_back({"matmul", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor a = uniform({3, 4}, rng);
                     Tensor b = uniform({4, 2}, rng);
                     return ad::finite_diff_check([&] { return probe(ad::matmul(a, b), seed); }, {a, b},
                                                  kGradcheckStep);
                   }});
  cases.push_back({"linear", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = uniform({3, 5}, rng);
                     Tensor w = uniform({5, 4}, rng);
                     Tensor b = uniform({4}, rng);
                     return ad::finite_diff_check([&] { return probe(ad::linear(x, w, b), seed); }, {x, w, b},
                                                  kGradcheckStep);
                   }});
  cases.push_back({"conv1d", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = uniform({2, 2, 7}, rng);
                     Tensor k = uniform({3, 2, 3}, rng);
                     Tensor b = uniform({3}, rng);
                     return ad::finite_diff_check([&] { return probe(ad::conv1d(x, k, b, 1), seed); }, {x, k, b},
                                                  kGradcheckStep);
                   }});
  cases.push_back({"maxpool1d", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = distinct({2, 3, 8}, rng);
                     return ad::finite_diff_check([&] { return probe(ad::maxpool1d(x, 2), seed); }, x,
                                                  kGradcheckStep);
                   }});
  cases.push_back({"reshape_concat_slice", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor a = uniform({2, 3}, rng);
                     Tensor b = uniform({2, 2}, rng);
                     auto f = [&] {
                       const Tensor c = ad::concat({a, b, a});
                       const Tensor s = ad::slice_cols(c, 2, 7);
                       return probe(ad::reshape(s, {5, 2}), seed);
                     };
                     return ad::finite_diff_check(f, {a, b}, kGradcheckStep);
                   }});
  cases.push_back({"row_stack", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor m = uniform({3, 4}, rng);
                     auto f = [&] {
                       return probe(ad::stack_rows({ad::row(m, 2), ad::row(m, 0), ad::row(m, 2)}), seed);
                     };
                     return ad::finite_diff_check(f, m, kGradcheckStep);
                   }});
  cases.push_back({"dropout", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = uniform({4, 5}, rng);
                     auto f = [&] {
                       Rng mask_rng(seed + 1);
                       return probe(ad::dropout(x, 0.3, true, mask_rng), seed);
                     };
                     return ad::finite_diff_check(f, x, kGradcheckStep);
                   }});
  cases.push_back({"lstm_cell", [](std::uint64_t seed) {
                     Rng rng(seed);
                     ad::LstmParams p{uniform({4, 12}, rng), uniform({3, 12}, rng), uniform({12}, rng)};
                     Tensor x = uniform({4}, rng);
                     Tensor h = uniform({3}, rng);
                     Tensor c = uniform({3}, rng);
                     auto f = [&] {
                       const auto s = ad::lstm_cell(x, h, c, p);
                       return ad::sum(s.h) + probe(s.c, seed);
                     };
                     return ad::finite_diff_check(f, {x, h, c, p.w_ih, p.w_hh, p.bias}, kGradcheckStep);
                   }});
  cases.push_back({"poe_fuse", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor mt = uniform({2, 3}, rng), st = uniform({2, 3}, rng, 0.3, 2.0);
                     Tensor mf = uniform({2, 3}, rng), sf = uniform({2, 3}, rng, 0.3, 2.0);
                     auto f = [&] {
                       const auto q = model::poe_fuse({mt, st}, {mf, sf});
                       return probe(q.mu, seed) + probe(q.sigma, seed + 1);
                     };
                     return ad::finite_diff_check(f, {mt, st, mf, sf}, kGradcheckStep);
                   }});
  cases.push_back({"reparameterize", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor mu = uniform({2, 3}, rng), sigma = uniform({2, 3}, rng, 0.3, 2.0);
                     auto f = [&] {
                       Rng eps_rng(seed + 5);
                       return probe(model::reparameterize({mu, sigma}, eps_rng), seed);
                     };
                     return ad::finite_diff_check(f, {mu, sigma}, kGradcheckStep);
                   }});
  cases.push_back({"masked_recon_loss", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor mu = uniform({2, 6}, rng), sigma = uniform({2, 6}, rng, 0.3, 2.0);
                     const Tensor x = uniform({2, 6}, rng).detach();
                     std::vector<double> a(12);
                     for (double& v : a) v = rng.bernoulli(0.7) ? 1.0 : 0.0;
                     const Tensor alpha({2, 6}, a);
                     return ad::finite_diff_check(
                         [&] { return training::masked_recon_loss({mu, sigma}, x, alpha); }, {mu, sigma},
                         kGradcheckStep);
                   }});
  cases.push_back({"weighted_kl", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor mu = uniform({2, 3}, rng), sigma = uniform({2, 3}, rng, 0.3, 2.0);
                     const Tensor alpha({2, 4}, {1, 0, 1, 1, 1, 1, 1, 1});
                     return ad::finite_diff_check([&] { return training::weighted_kl({mu, sigma}, alpha); },
                                                  {mu, sigma}, kGradcheckStep);
                   }});
  cases.push_back({"model_full", [](std::uint64_t s) { return full_model_check(s, model::Variant::kFull); }});
  cases.push_back({"model_ltdb_only", [](std::uint64_t s) { return full_model_check(s, model::Variant::kLtdbOnly); }});
  cases.push_back({"model_fdb_only", [](std::uint64_t s) { return full_model_check(s, model::Variant::kFdbOnly); }});
  cases.push_back(
      {"model_concat_fusion", [](std::uint64_t s) { return full_model_check(s, model::Variant::kConcatFusion); }});
  return cases;
}

/// Runs each case at `points` seeds and keeps the worst relative error.
inline std::vector<GradcheckRow> run_gradcheck(const std::vector<GradcheckCase>& cases, std::size_t points = 5,
                                               double rtol = kGradcheckRtol, std::uint64_t base_seed = 2024) {
  std::vector<GradcheckRow> rows;
  for (const auto& c : cases) {
    GradcheckRow r;
    r.name = c.name;
    r.points = points;
    for (std::size_t p = 0; p < points; ++p)
      r.max_rel_error = std::max(r.max_rel_error, c.run(base_seed + 101 * p).max_rel_error);
    r.pass = r.max_rel_error < rtol;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace lpcvae::diagnostics
