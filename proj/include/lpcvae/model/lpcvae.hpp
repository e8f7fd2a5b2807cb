#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lpcvae/autodiff.hpp"
#include "lpcvae/data/windows.hpp"
#include "lpcvae/model/config.hpp"
#include "lpcvae/model/gaussian.hpp"
#include "lpcvae/spectral.hpp"

namespace lpcvae::model {

/// Named learnable tensors in creation order.
class ParameterSet {
 public:
  void add(std::string name, Tensor t) {
    if (contains(name)) throw ContractError("duplicate parameter '" + name + "'");
    items_.emplace_back(std::move(name), std::move(t));
  }
  bool contains(const std::string& name) const {
    for (const auto& [n, t] : items_)
      if (n == name) return true;
    return false;
  }
  const Tensor& get(const std::string& name) const {
    for (const auto& [n, t] : items_)
      if (n == name) return t;
    throw ContractError("unknown parameter '" + name + "'");
  }
  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    for (const auto& [n, t] : items_) out.push_back(t);
    return out;
  }
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }
  void zero_grad() {
    for (auto& [n, t] : items_) t.zero_grad();
  }
  /// Deep copy with fresh storage.
  ParameterSet clone() const {
    ParameterSet out;
    for (const auto& [n, t] : items_) out.add(n, Tensor(t.shape(), {t.data().begin(), t.data().end()}, true));
    return out;
  }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

enum class Expert { kTime, kFreq, kJoint };

inline const char* expert_prefix(Expert e) {
  switch (e) {
    case Expert::kTime: return "enc_time";
    case Expert::kFreq: return "enc_freq";
    case Expert::kJoint: return "enc_joint";
  }
  return "?";
}

/// Everything one forward pass produces for a batch; rows index windows.
struct ForwardOutput {
  GaussianParams q_time;  // undefined when the branch is absent
  GaussianParams q_freq;  // undefined when the branch is absent
  GaussianParams q_poe;
  Tensor z;
  GaussianParams px;  // [B×w]
  Tensor r_time;      // [B×d_cond], zeros when the branch is absent
  Tensor r_freq;      // [B×d_cond], zeros when the branch is absent
};

/// Channel-major embedding of one window: channel 0 holds the values,
/// channel 1 the position code sin(2πj/w), channels 2.. the calendar features.
inline Tensor time_embedding(std::span<const double> window, std::span<const double> time_feats) {
  const std::size_t w = window.size();
  if (time_feats.size() != w * data::kTimeFeatures)
    throw DimensionError("time_embedding: " + std::to_string(time_feats.size()) +
                         " timestamp features for a window of " + std::to_string(w));
  const std::size_t ch = 2 + data::kTimeFeatures;
  std::vector<double> out(ch * w);
  for (std::size_t j = 0; j < w; ++j) {
    out[j] = window[j];
    out[w + j] = std::sin(2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(w));
    for (std::size_t k = 0; k < data::kTimeFeatures; ++k)
      out[(2 + k) * w + j] = time_feats[j * data::kTimeFeatures + k];
  }
  return Tensor({ch, w}, std::move(out));
}

/// Batched embedding, shape [B×(2+d_time)×w].
inline Tensor time_embedding(const data::WindowBatch& batch) {
  const std::size_t w = batch.window;
  const std::size_t ch = 2 + data::kTimeFeatures;
  std::vector<double> out;
  out.reserve(batch.batch * ch * w);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    const auto one = time_embedding(
        batch.window_values(b),
        std::span<const double>(batch.time_feats).subspan(b * w * data::kTimeFeatures, w * data::kTimeFeatures));
    out.insert(out.end(), one.data().begin(), one.data().end());
  }
  return Tensor({batch.batch, ch, w}, std::move(out));
}

/// Spectrum magnitudes of every window, shape [B×w/2].
inline Tensor spectrum_batch(const data::WindowBatch& batch) {
  const std::size_t half = batch.window / 2;
  std::vector<double> out;
  out.reserve(batch.batch * half);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    const auto s = spectral::spectrum_features(batch.window_values(b));
    out.insert(out.end(), s.magnitudes.begin(), s.magnitudes.end());
  }
  return Tensor({batch.batch, half}, std::move(out));
}

/// The dual-branch conditional VAE with product-of-experts latent fusion.
class LpcvaeModel {
 public:
  /// Fresh model: Xavier-uniform weights, zero biases, LSTM forget bias +1.
  LpcvaeModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
    validate(cfg_);
    Rng rng(init_seed);
    for (const auto& spec : parameter_specs(cfg_)) {
      Tensor t = Tensor::zeros(spec.shape, true);
      auto d = t.mutable_data();
      if (spec.fan_in > 0) {
        const double limit = std::sqrt(6.0 / static_cast<double>(spec.fan_in + spec.fan_out));
        for (double& v : d) v = rng.uniform(-limit, limit);
      }
      if (spec.name == "ltdb.lstm.bias")
        for (std::size_t i = cfg_.d_cond; i < 2 * cfg_.d_cond; ++i) d[i] = 1.0;
      params_.add(spec.name, std::move(t));
    }
  }

  /// Model around existing weights (e.g. from a checkpoint); names and shapes
  /// must match the configuration exactly.
  LpcvaeModel(ModelConfig cfg, ParameterSet params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    validate(cfg_);
    const auto specs = parameter_specs(cfg_);
    if (specs.size() != params_.size())
      throw CompatibilityError("checkpoint holds " + std::to_string(params_.size()) +
                               " parameters, configuration expects " + std::to_string(specs.size()));
    for (const auto& s : specs) {
      if (!params_.contains(s.name)) throw CompatibilityError("checkpoint lacks parameter '" + s.name + "'");
      if (params_.get(s.name).shape() != s.shape)
        throw CompatibilityError("parameter '" + s.name + "' has shape " +
                                 ad::shape_str(params_.get(s.name).shape()) + ", expected " +
                                 ad::shape_str(s.shape));
    }
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const Tensor& param(const std::string& name) const { return params_.get(name); }

  /// conv (length-preserving) → ReLU → maxpool → flatten → dense to d_cond.
  /// Input [B×(2+d_time)×w], output [B×d_cond].
  Tensor ltdb_local(const Tensor& embedded) const {
    const std::size_t b = embedded.dim(0);
    Tensor h = ad::conv1d(embedded, param("ltdb.conv.weight"), param("ltdb.conv.bias"),
                          (cfg_.conv_kernel - 1) / 2);
    h = ad::maxpool1d(ad::relu(h), cfg_.pool);
    h = ad::reshape(h, {b, cfg_.conv_channels * cfg_.pooled_width()});
    return ad::linear(h, param("ltdb.local.weight"), param("ltdb.local.bias"));
  }

  /// Runs the LSTM over the batch's windows in order and projects each hidden
  /// state to d_cond. The recurrent state starts at zero (or `init`) for every
  /// batch. `start_indices` (when given) must increase by exactly `stride`.
  Tensor ltdb_sequence(const Tensor& locals, std::span<const std::size_t> start_indices = {},
                       std::size_t stride = 1, std::optional<ad::LstmState> init = std::nullopt) const {
    const std::size_t b = locals.dim(0);
    if (!start_indices.empty()) {
      if (start_indices.size() != b)
        throw ContractError("ltdb_sequence: " + std::to_string(start_indices.size()) +
                            " start indices for " + std::to_string(b) + " windows");
      for (std::size_t j = 1; j < b; ++j)
        if (start_indices[j] != start_indices[j - 1] + stride)
          throw ContractError("ltdb_sequence: batch is not chronologically ordered at row " +
                              std::to_string(j));
    }
    const std::size_t hs = cfg_.d_cond;
    const Tensor proj = ad::linear(locals, param("ltdb.lstm.w_ih"), param("ltdb.lstm.bias"));
    ad::LstmState st = init ? *init : ad::LstmState{Tensor::zeros({hs}), Tensor::zeros({hs})};
    std::vector<Tensor> hidden;
    hidden.reserve(b);
    for (std::size_t j = 0; j < b; ++j) {
      st = ad::lstm_step(ad::row(proj, j), st.h, st.c, param("ltdb.lstm.w_hh"));
      hidden.push_back(st.h);
    }
    return ad::linear(ad::stack_rows(hidden), param("ltdb.out.weight"), param("ltdb.out.bias"));
  }

  /// Spectrum [B×w/2] → dense → ReLU → dense → dropout, output [B×d_cond].
  Tensor fdb_forward(const Tensor& spectrum, bool training, Rng& rng) const {
    Tensor h = ad::relu(ad::linear(spectrum, param("fdb.fc1.weight"), param("fdb.fc1.bias")));
    h = ad::linear(h, param("fdb.fc2.weight"), param("fdb.fc2.bias"));
    return ad::dropout(h, cfg_.dropout_rate, training, rng);
  }

  /// dense → ReLU → (mu, log-variance) heads.
  GaussianParams encode(const Tensor& r, Expert which) const {
    const std::string p = expert_prefix(which);
    const Tensor h = ad::relu(ad::linear(r, param(p + ".hidden.weight"), param(p + ".hidden.bias")));
    const Tensor mu = ad::linear(h, param(p + ".mu.weight"), param(p + ".mu.bias"));
    const Tensor lv = ad::linear(h, param(p + ".logvar.weight"), param(p + ".logvar.bias"));
    return from_logvar(mu, lv);
  }

  /// Conditional decoder over [z, r_time, r_freq] producing (mu_x, sigma_x).
  GaussianParams decode(const Tensor& z, const Tensor& r_time, const Tensor& r_freq) const {
    const Tensor in = ad::concat({z, r_time, r_freq});
    const Tensor h = ad::relu(ad::linear(in, param("dec.hidden.weight"), param("dec.hidden.bias")));
    const Tensor mu = ad::linear(h, param("dec.mu.weight"), param("dec.mu.bias"));
    const Tensor lv = ad::linear(h, param("dec.logvar.weight"), param("dec.logvar.bias"));
    return from_logvar(mu, lv);
  }

  /// Branch features and fused posterior for a batch; no sampling.
  ForwardOutput encode_batch(const data::WindowBatch& batch, bool training, Rng& rng) const {
    if (batch.window != cfg_.w)
      throw DimensionError("batch window " + std::to_string(batch.window) + " != model.w " +
                           std::to_string(cfg_.w));
    ForwardOutput out;
    const std::size_t b = batch.batch;
    const Variant v = cfg_.variant;
    if (has_time_branch(v)) {
      out.r_time = ltdb_sequence(ltdb_local(time_embedding(batch)), batch.start_indices, batch.stride);
    } else {
      out.r_time = Tensor::zeros({b, cfg_.d_cond});
    }
    if (has_freq_branch(v)) {
      out.r_freq = fdb_forward(spectrum_batch(batch), training, rng);
    } else {
      out.r_freq = Tensor::zeros({b, cfg_.d_cond});
    }
    switch (v) {
      case Variant::kFull:
        out.q_time = encode(out.r_time, Expert::kTime);
        out.q_freq = encode(out.r_freq, Expert::kFreq);
        out.q_poe = poe_fuse(out.q_time, out.q_freq);
        break;
      case Variant::kLtdbOnly:
        out.q_time = encode(out.r_time, Expert::kTime);
        out.q_poe = out.q_time;
        break;
      case Variant::kFdbOnly:
        out.q_freq = encode(out.r_freq, Expert::kFreq);
        out.q_poe = out.q_freq;
        break;
      case Variant::kConcatFusion:
        out.q_poe = encode(ad::concat({out.r_time, out.r_freq}), Expert::kJoint);
        break;
    }
    return out;
  }

  /// Full pass: branches, fusion, one reparameterized sample, decoder.
  ForwardOutput forward(const data::WindowBatch& batch, bool training, Rng& rng) const {
    ForwardOutput out = encode_batch(batch, training, rng);
    out.z = reparameterize(out.q_poe, rng);
    out.px = decode(out.z, out.r_time, out.r_freq);
    return out;
  }

  struct ParamSpec {
    std::string name;
    ad::Shape shape;
    std::size_t fan_in = 0;  // 0 → zero init
    std::size_t fan_out = 0;
  };

  /// Parameter names and shapes instantiated for a configuration.
  static std::vector<ParamSpec> parameter_specs(const ModelConfig& c) {
    std::vector<ParamSpec> s;
    auto dense = [&s](const std::string& name, std::size_t in, std::size_t out) {
      s.push_back({name + ".weight", {in, out}, in, out});
      s.push_back({name + ".bias", {out}, 0, 0});
    };
    auto encoder = [&](Expert e, std::size_t in) {
      const std::string p = expert_prefix(e);
      dense(p + ".hidden", in, c.d_cond);
      dense(p + ".mu", c.d_cond, c.d_latent);
      dense(p + ".logvar", c.d_cond, c.d_latent);
    };
    if (has_time_branch(c.variant)) {
      const std::size_t cin = c.embed_channels();
      s.push_back({"ltdb.conv.weight", {c.conv_channels, cin, c.conv_kernel}, cin * c.conv_kernel,
                   c.conv_channels * c.conv_kernel});
      s.push_back({"ltdb.conv.bias", {c.conv_channels}, 0, 0});
      dense("ltdb.local", c.conv_channels * c.pooled_width(), c.d_cond);
      s.push_back({"ltdb.lstm.w_ih", {c.d_cond, 4 * c.d_cond}, c.d_cond, 4 * c.d_cond});
      s.push_back({"ltdb.lstm.w_hh", {c.d_cond, 4 * c.d_cond}, c.d_cond, 4 * c.d_cond});
      s.push_back({"ltdb.lstm.bias", {4 * c.d_cond}, 0, 0});
      dense("ltdb.out", c.d_cond, c.d_cond);
    }
    if (has_freq_branch(c.variant)) {
      dense("fdb.fc1", c.spectrum_width(), c.mlp_hidden);
      dense("fdb.fc2", c.mlp_hidden, c.d_cond);
    }
    switch (c.variant) {
      case Variant::kFull:
        encoder(Expert::kTime, c.d_cond);
        encoder(Expert::kFreq, c.d_cond);
        break;
      case Variant::kLtdbOnly: encoder(Expert::kTime, c.d_cond); break;
      case Variant::kFdbOnly: encoder(Expert::kFreq, c.d_cond); break;
      case Variant::kConcatFusion: encoder(Expert::kJoint, 2 * c.d_cond); break;
    }
    dense("dec.hidden", c.decoder_input(), c.mlp_hidden);
    dense("dec.mu", c.mlp_hidden, c.w);
    dense("dec.logvar", c.mlp_hidden, c.w);
    return s;
  }

 private:
  ModelConfig cfg_;
  ParameterSet params_;
};

}  // namespace lpcvae::model
