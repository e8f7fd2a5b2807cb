#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lpcvae/data.hpp"
#include "lpcvae/model/config.hpp"
#include "lpcvae/training.hpp"

namespace lpcvae::config {

struct DataSection {
  std::string source = "csv";  // csv | synth
  std::string path;
  double train_frac = 0.5;
};

struct ScoreConfig {
  std::size_t mc_samples = 16;
  std::size_t grid = 500;
  bool adjust = true;
  std::size_t batch_size = 512;
};

/// Everything a run needs. `seed` drives initialization, shuffling, noise,
/// synthetic data and Monte-Carlo scoring.
struct RunConfig {
  std::uint64_t seed = 0;
  DataSection data;
  data::SynthConfig synth;
  model::ModelConfig model;
  training::TrainConfig train;
  ScoreConfig score;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno != 0 || v[0] == '-')
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno != 0) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

inline double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || !std::isfinite(x))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string fmt(double v) { return data::detail::format_double(v); }

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
  return out;
}

struct Field {
  std::string key;  // "section.name" or "name" for top level
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<Field>& fields() {
  using R = RunConfig;
  using S = const std::string&;
  static const std::vector<Field> table = {
      {"seed", [](R& c, S v) { c.seed = to_uint("seed", v); }, [](const R& c) { return std::to_string(c.seed); }},

      {"data.source",
       [](R& c, S v) {
         if (v != "csv" && v != "synth") throw ConfigError("data.source: expected csv or synth, got '" + v + "'");
         c.data.source = v;
       },
       [](const R& c) { return c.data.source; }},
      {"data.path", [](R& c, S v) { c.data.path = v; }, [](const R& c) { return c.data.path; }},
      {"data.train_frac", [](R& c, S v) { c.data.train_frac = to_double("data.train_frac", v); },
       [](const R& c) { return fmt(c.data.train_frac); }},
      {"data.stride", [](R& c, S v) { c.train.stride = to_uint("data.stride", v); },
       [](const R& c) { return std::to_string(c.train.stride); }},
      {"data.use_labels", [](R& c, S v) { c.train.use_labels = to_bool("data.use_labels", v); },
       [](const R& c) { return std::string(c.train.use_labels ? "true" : "false"); }},

      {"synth.length", [](R& c, S v) { c.synth.length = to_uint("synth.length", v); },
       [](const R& c) { return std::to_string(c.synth.length); }},
      {"synth.periods",
       [](R& c, S v) {
         c.synth.periods.clear();
         for (const auto& x : to_list(v)) c.synth.periods.push_back(to_double("synth.periods", x));
       },
       [](const R& c) { return join(c.synth.periods, fmt); }},
      {"synth.amplitudes",
       [](R& c, S v) {
         c.synth.amplitudes.clear();
         for (const auto& x : to_list(v)) c.synth.amplitudes.push_back(to_double("synth.amplitudes", x));
       },
       [](const R& c) { return join(c.synth.amplitudes, fmt); }},
      {"synth.noise_sigma", [](R& c, S v) { c.synth.noise_sigma = to_double("synth.noise_sigma", v); },
       [](const R& c) { return fmt(c.synth.noise_sigma); }},
      {"synth.anomaly_rate", [](R& c, S v) { c.synth.anomaly_rate = to_double("synth.anomaly_rate", v); },
       [](const R& c) { return fmt(c.synth.anomaly_rate); }},
      {"synth.kinds",
       [](R& c, S v) {
         c.synth.kinds.clear();
         for (const auto& x : to_list(v)) c.synth.kinds.push_back(data::parse_anomaly_kind(x));
       },
       [](const R& c) { return join(c.synth.kinds, [](data::AnomalyKind k) { return data::to_string(k); }); }},
      {"synth.stride_seconds", [](R& c, S v) { c.synth.stride_seconds = to_int("synth.stride_seconds", v); },
       [](const R& c) { return std::to_string(c.synth.stride_seconds); }},
      {"synth.start_timestamp", [](R& c, S v) { c.synth.start_timestamp = to_int("synth.start_timestamp", v); },
       [](const R& c) { return std::to_string(c.synth.start_timestamp); }},
      {"synth.spike_min_sigma", [](R& c, S v) { c.synth.spike_min_sigma = to_double("synth.spike_min_sigma", v); },
       [](const R& c) { return fmt(c.synth.spike_min_sigma); }},
      {"synth.spike_max_sigma", [](R& c, S v) { c.synth.spike_max_sigma = to_double("synth.spike_max_sigma", v); },
       [](const R& c) { return fmt(c.synth.spike_max_sigma); }},
      {"synth.level_shift_length",
       [](R& c, S v) { c.synth.level_shift_length = to_uint("synth.level_shift_length", v); },
       [](const R& c) { return std::to_string(c.synth.level_shift_length); }},
      {"synth.level_shift_size", [](R& c, S v) { c.synth.level_shift_size = to_double("synth.level_shift_size", v); },
       [](const R& c) { return fmt(c.synth.level_shift_size); }},
      {"synth.dropout_length", [](R& c, S v) { c.synth.dropout_length = to_uint("synth.dropout_length", v); },
       [](const R& c) { return std::to_string(c.synth.dropout_length); }},

      {"model.w", [](R& c, S v) { c.model.w = to_uint("model.w", v); },
       [](const R& c) { return std::to_string(c.model.w); }},
      {"model.d_time", [](R& c, S v) { c.model.d_time = to_uint("model.d_time", v); },
       [](const R& c) { return std::to_string(c.model.d_time); }},
      {"model.conv_channels", [](R& c, S v) { c.model.conv_channels = to_uint("model.conv_channels", v); },
       [](const R& c) { return std::to_string(c.model.conv_channels); }},
      {"model.conv_kernel", [](R& c, S v) { c.model.conv_kernel = to_uint("model.conv_kernel", v); },
       [](const R& c) { return std::to_string(c.model.conv_kernel); }},
      {"model.pool", [](R& c, S v) { c.model.pool = to_uint("model.pool", v); },
       [](const R& c) { return std::to_string(c.model.pool); }},
      {"model.d_cond", [](R& c, S v) { c.model.d_cond = to_uint("model.d_cond", v); },
       [](const R& c) { return std::to_string(c.model.d_cond); }},
      {"model.d_latent", [](R& c, S v) { c.model.d_latent = to_uint("model.d_latent", v); },
       [](const R& c) { return std::to_string(c.model.d_latent); }},
      {"model.mlp_hidden", [](R& c, S v) { c.model.mlp_hidden = to_uint("model.mlp_hidden", v); },
       [](const R& c) { return std::to_string(c.model.mlp_hidden); }},
      {"model.dropout_rate", [](R& c, S v) { c.model.dropout_rate = to_double("model.dropout_rate", v); },
       [](const R& c) { return fmt(c.model.dropout_rate); }},
      {"model.variant", [](R& c, S v) { c.model.variant = model::parse_variant(v); },
       [](const R& c) { return model::to_string(c.model.variant); }},

      {"train.epochs", [](R& c, S v) { c.train.epochs = to_uint("train.epochs", v); },
       [](const R& c) { return std::to_string(c.train.epochs); }},
      {"train.batch_size", [](R& c, S v) { c.train.batch_size = to_uint("train.batch_size", v); },
       [](const R& c) { return std::to_string(c.train.batch_size); }},
      {"train.lr", [](R& c, S v) { c.train.lr = to_double("train.lr", v); },
       [](const R& c) { return fmt(c.train.lr); }},
      {"train.patience", [](R& c, S v) { c.train.patience = to_uint("train.patience", v); },
       [](const R& c) { return std::to_string(c.train.patience); }},
      {"train.val_frac", [](R& c, S v) { c.train.val_frac = to_double("train.val_frac", v); },
       [](const R& c) { return fmt(c.train.val_frac); }},
      {"train.fixed_noise", [](R& c, S v) { c.train.fixed_noise = to_bool("train.fixed_noise", v); },
       [](const R& c) { return std::string(c.train.fixed_noise ? "true" : "false"); }},

      {"score.mc_samples", [](R& c, S v) { c.score.mc_samples = to_uint("score.mc_samples", v); },
       [](const R& c) { return std::to_string(c.score.mc_samples); }},
      {"score.grid", [](R& c, S v) { c.score.grid = to_uint("score.grid", v); },
       [](const R& c) { return std::to_string(c.score.grid); }},
      {"score.adjust", [](R& c, S v) { c.score.adjust = to_bool("score.adjust", v); },
       [](const R& c) { return std::string(c.score.adjust ? "true" : "false"); }},
      {"score.batch_size", [](R& c, S v) { c.score.batch_size = to_uint("score.batch_size", v); },
       [](const R& c) { return std::to_string(c.score.batch_size); }},
  };
  return table;
}

}  // namespace detail

/// Sets one dotted key; unknown keys are rejected.
inline void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : detail::fields())
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  throw ConfigError("unknown configuration key '" + key + "'");
}

/// Raw `key -> value` pairs from sectioned text. `[section]` headers prefix
/// later keys; `#` starts a comment line.
inline std::vector<std::pair<std::string, std::string>> parse_pairs(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    out.emplace_back(section.empty() ? key : section + "." + key, detail::trim(line.substr(eq + 1)));
  }
  return out;
}

/// Parses config text. Keys under `ignored_sections` are returned in `extra`
/// instead of being rejected.
inline RunConfig parse(std::istream& in, std::map<std::string, std::string>* extra = nullptr,
                       const std::set<std::string>& ignored_sections = {}) {
  RunConfig cfg;
  for (const auto& [key, value] : parse_pairs(in)) {
    const auto dot = key.find('.');
    if (dot != std::string::npos && ignored_sections.count(key.substr(0, dot))) {
      if (extra) (*extra)[key] = value;
      continue;
    }
    set_value(cfg, key, value);
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

inline RunConfig parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

inline RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse(in);
}

/// Applies `--section.key=value` style overrides.
inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& args) {
  for (std::string a : args) {
    if (a.rfind("--", 0) == 0) a = a.substr(2);
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + a + "' is not of the form --key=value");
    set_value(cfg, a.substr(0, eq), a.substr(eq + 1));
  }
  cfg.train.seed = cfg.seed;
}

/// Canonical text of every field; parse(to_text(c)) reproduces c.
inline std::string to_text(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : detail::fields()) {
    const auto dot = f.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : f.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
    if (sec != section) {
      out << "\n[" << sec << "]\n";
      section = sec;
    }
    out << name << " = " << f.get(cfg) << '\n';
  }
  return out.str();
}

/// Cross-field checks; error messages name the offending key.
inline void validate(const RunConfig& cfg) {
  if (cfg.data.source == "csv" && cfg.data.path.empty())
    throw ConfigError("data.path: required when data.source = csv");
  if (!(cfg.data.train_frac > 0.0 && cfg.data.train_frac < 1.0))
    throw ConfigError("data.train_frac: must lie in (0, 1)");
  if (cfg.data.source == "synth") data::validate(cfg.synth);
  model::validate(cfg.model);
  training::validate(cfg.train);
  if (cfg.score.mc_samples < 1) throw ConfigError("score.mc_samples: must be >= 1");
  if (cfg.score.grid < 2) throw ConfigError("score.grid: must be >= 2");
  if (cfg.score.batch_size < 1) throw ConfigError("score.batch_size: must be >= 1");
}

}  // namespace lpcvae::config
