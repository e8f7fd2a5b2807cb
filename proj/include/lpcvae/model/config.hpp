#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lpcvae/data/windows.hpp"
#include "lpcvae/error.hpp"
#include "lpcvae/spectral.hpp"

namespace lpcvae::model {

/// Which branches are active and how their posteriors are combined.
enum class Variant { kFull, kLtdbOnly, kFdbOnly, kConcatFusion };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kLtdbOnly: return "ltdb_only";
    case Variant::kFdbOnly: return "fdb_only";
    case Variant::kConcatFusion: return "concat_fusion";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::kFull;
  if (s == "ltdb_only") return Variant::kLtdbOnly;
  if (s == "fdb_only") return Variant::kFdbOnly;
  if (s == "concat_fusion") return Variant::kConcatFusion;
  throw ConfigError("unknown variant '" + s + "' (expected full, ltdb_only, fdb_only or concat_fusion)");
}

inline bool has_time_branch(Variant v) { return v != Variant::kFdbOnly; }
inline bool has_freq_branch(Variant v) { return v != Variant::kLtdbOnly; }

struct ModelConfig {
  std::size_t w = 64;
  std::size_t d_time = data::kTimeFeatures;
  std::size_t conv_channels = 16;
  std::size_t conv_kernel = 3;
  std::size_t pool = 2;
  std::size_t d_cond = 32;
  std::size_t d_latent = 8;
  std::size_t mlp_hidden = 64;
  double dropout_rate = 0.1;
  Variant variant = Variant::kFull;

  std::size_t embed_channels() const { return 2 + d_time; }
  std::size_t pooled_width() const { return w / pool; }
  std::size_t spectrum_width() const { return w / 2; }
  std::size_t decoder_input() const { return d_latent + 2 * d_cond; }

  bool operator==(const ModelConfig&) const = default;
};

inline void validate(const ModelConfig& c) {
  if (!spectral::is_power_of_two(c.w) || c.w < 4)
    throw ConfigError("model.w must be a power of two >= 4, got " + std::to_string(c.w));
  if (c.d_time != data::kTimeFeatures)
    throw ConfigError("model.d_time must equal " + std::to_string(data::kTimeFeatures));
  if (c.conv_kernel == 0 || c.conv_kernel % 2 == 0 || c.conv_kernel > c.w)
    throw ConfigError("model.conv_kernel must be odd and <= w so padding preserves length");
  if (c.pool == 0 || c.w % c.pool != 0)
    throw ConfigError("model.pool must divide the post-conv length " + std::to_string(c.w));
  if (c.conv_channels == 0 || c.d_cond == 0 || c.d_latent == 0 || c.mlp_hidden == 0)
    throw ConfigError("model widths must all be >= 1");
  if (!(c.dropout_rate >= 0.0) || c.dropout_rate >= 1.0)
    throw ConfigError("model.dropout_rate must lie in [0, 1)");
}

}  // namespace lpcvae::model
