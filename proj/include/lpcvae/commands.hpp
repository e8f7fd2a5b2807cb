#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpcvae/config.hpp"
#include "lpcvae/data.hpp"
#include "lpcvae/gradcheck_suite.hpp"
#include "lpcvae/model/checkpoint.hpp"
#include "lpcvae/scoring.hpp"
#include "lpcvae/training.hpp"

namespace lpcvae::cli {

using config::RunConfig;

/// Seed-stream key for synthetic data, kept apart from the training streams.
inline constexpr std::uint64_t kSynthStream = 0x5917;

/// Raw series named by the data section.
inline data::SeriesDataset load_source(const RunConfig& cfg) {
  if (cfg.data.source == "synth") {
    Rng rng = Rng::stream(cfg.seed, kSynthStream);
    return data::synth_generate(cfg.synth, rng);
  }
  return data::load_csv(cfg.data.path);
}

/// Lines of `text`, each prefixed with "# ".
inline std::string comment_block(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (!line.empty()) out += "# " + line + "\n";
  return out;
}

// ---------------------------------------------------------------- synth

inline data::SeriesDataset cmd_synth(const RunConfig& cfg, const std::string& out_path) {
  data::validate(cfg.synth);
  Rng rng = Rng::stream(cfg.seed, kSynthStream);
  auto ds = data::synth_generate(cfg.synth, rng);
  std::ofstream out(out_path);
  if (!out) throw IngestionError("cannot write '" + out_path + "'");
  out << comment_block(config::to_text(cfg));
  data::write_csv(out, ds);
  return ds;
}

// ---------------------------------------------------------------- train

struct TrainOutcome {
  training::FitResult fit;
  model::Checkpoint checkpoint;
};

/// Checkpoint metadata: the resolved config followed by a [norm] section.
inline std::string checkpoint_metadata(const RunConfig& cfg, double mean, double stddev) {
  return config::to_text(cfg) + "\n[norm]\nmean = " + data::detail::format_double(mean) +
         "\nstd = " + data::detail::format_double(stddev) + "\n";
}

struct CheckpointInfo {
  RunConfig config;
  double norm_mean = 0.0;
  double norm_std = 1.0;
};

inline CheckpointInfo parse_metadata(const std::string& metadata) {
  std::istringstream in(metadata);
  std::map<std::string, std::string> extra;
  CheckpointInfo info;
  info.config = config::parse(in, &extra, {"norm"});
  if (!extra.count("norm.mean") || !extra.count("norm.std"))
    throw IngestionError("checkpoint metadata lacks normalization statistics");
  info.norm_mean = config::detail::to_double("norm.mean", extra["norm.mean"]);
  info.norm_std = config::detail::to_double("norm.std", extra["norm.std"]);
  return info;
}

inline void write_history(std::ostream& out, const RunConfig& cfg, const training::FitResult& fit) {
  out << comment_block(config::to_text(cfg));
  out << "epoch,total,recon,kl,beta_mean\n";
  for (std::size_t e = 0; e < fit.history.size(); ++e) {
    const auto& h = fit.history[e];
    using data::detail::format_double;
    out << e + 1 << ',' << format_double(h.total) << ',' << format_double(h.recon) << ','
        << format_double(h.kl) << ',' << format_double(h.beta_mean) << '\n';
  }
}

/// Loads data, fits on the training split and writes checkpoint and history.
inline TrainOutcome cmd_train(const RunConfig& cfg, const std::string& checkpoint_path,
                              const std::string& history_path, std::ostream& log) {
  config::validate(cfg);
  const auto raw = load_source(cfg);
  const auto [train, test] = data::split_and_normalize(raw, cfg.data.train_frac);
  log << "train: " << train.size() << " points, test: " << test.size() << " points, variant "
      << model::to_string(cfg.model.variant) << "\n";
  TrainOutcome r{training::fit(train, cfg.model, cfg.train), {}};
  r.checkpoint.metadata = checkpoint_metadata(cfg, train.norm_mean, train.norm_std);
  r.checkpoint.seed = cfg.seed;
  r.checkpoint.params = r.fit.model.params();
  model::save_checkpoint(checkpoint_path, r.checkpoint);
  if (!history_path.empty()) {
    std::ofstream out(history_path);
    if (!out) throw IngestionError("cannot write '" + history_path + "'");
    write_history(out, cfg, r.fit);
  }
  const auto& last = r.fit.history.back();
  log << "epochs " << r.fit.epochs_run << (r.fit.early_stopped ? " (early stop)" : "")
      << "  total " << last.total << "  recon " << last.recon << "  kl " << last.kl << "  beta "
      << last.beta_mean << "\n";
  return r;
}

// ---------------------------------------------------------------- score

enum class Split { kAll, kTrain, kTest };

inline Split parse_split(const std::string& s) {
  if (s == "all") return Split::kAll;
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ConfigError("split: expected all, train or test, got '" + s + "'");
}

struct ScoreRequest {
  std::string checkpoint_path;
  std::string out_path;
  Split split = Split::kTest;
  std::optional<std::string> data_path;           // replaces the checkpoint's data source
  std::optional<RunConfig> expected;              // must agree with the checkpoint's model section
  std::vector<std::string> overrides;             // --score.* and seed overrides
};

struct ScoreOutcome {
  RunConfig config;
  data::SeriesDataset series;  // normalized, the scored slice
  scoring::ScoreSeries scores;
};

inline void write_scores(std::ostream& out, const RunConfig& cfg, const data::SeriesDataset& ds,
                         const scoring::ScoreSeries& s) {
  out << comment_block(config::to_text(cfg));
  out << "index,timestamp,score,label\n";
  for (std::size_t i = 0; i < ds.size(); ++i)
    out << ds.origin + i << ',' << ds.timestamps[i] << ','
        << (s.scored[i] ? data::detail::format_double(s.scores[i]) : "NA") << ','
        << static_cast<int>(ds.labels[i]) << '\n';
}

inline ScoreOutcome cmd_score(const ScoreRequest& req) {
  const auto ck = model::load_checkpoint(req.checkpoint_path);
  const auto info = parse_metadata(ck.metadata);
  RunConfig cfg = info.config;
  if (req.expected && !(req.expected->model == cfg.model))
    throw CompatibilityError("checkpoint model configuration does not match the requested one\n--- checkpoint\n" +
                             config::to_text(cfg) + "--- requested\n" + config::to_text(*req.expected));
  config::apply_overrides(cfg, req.overrides);
  if (req.data_path) {
    cfg.data.source = "csv";
    cfg.data.path = *req.data_path;
  }
  config::validate(cfg);
  const model::LpcvaeModel net(cfg.model, ck.params);

  const auto raw = load_source(cfg);
  const auto norm = data::normalize_with(raw, info.norm_mean, info.norm_std);
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(raw.size()) * cfg.data.train_frac));
  data::SeriesDataset part;
  switch (req.split) {
    case Split::kAll: part = norm; break;
    case Split::kTrain: part = data::slice(norm, 0, std::min(n_train, norm.size())); break;
    case Split::kTest: part = data::slice(norm, std::min(n_train, norm.size()), norm.size()); break;
  }
  ScoreOutcome r{cfg, part, scoring::score_series(net, part, cfg.score.mc_samples, cfg.seed, cfg.score.batch_size)};
  std::ofstream out(req.out_path);
  if (!out) throw IngestionError("cannot write '" + req.out_path + "'");
  write_scores(out, cfg, r.series, r.scores);
  return r;
}

// ---------------------------------------------------------------- eval

/// Header plus rows of a small CSV; '#' lines are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  long column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<long>(i);
    return -1;
  }
};

inline CsvTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    auto f = data::detail::split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(f);
      continue;
    }
    if (f.size() != t.header.size())
      throw IngestionError(path + ": row " + std::to_string(t.rows.size()) + " has " + std::to_string(f.size()) +
                           " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(f));
  }
  if (t.header.empty()) throw IngestionError(path + ": no header row");
  return t;
}

inline std::vector<std::uint8_t> label_column(const CsvTable& t, const std::string& path) {
  const long c = t.column("label");
  if (c < 0) throw EvaluationError(path + ": no 'label' column");
  if (t.rows.empty()) throw EvaluationError(path + ": column 'label' is empty");
  std::vector<std::uint8_t> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& v = t.rows[r][static_cast<std::size_t>(c)];
    if (v.empty()) throw EvaluationError(path + ": column 'label' is empty at row " + std::to_string(r));
    out.push_back(data::detail::parse_flag(v, r, "label"));
  }
  return out;
}

inline scoring::ScoreSeries read_scores(const CsvTable& t, const std::string& path) {
  const long c = t.column("score");
  if (c < 0) throw EvaluationError(path + ": no 'score' column");
  scoring::ScoreSeries s;
  for (const auto& row : t.rows) {
    const auto& v = row[static_cast<std::size_t>(c)];
    const bool ok = v != "NA" && !v.empty();
    s.scores.push_back(ok ? data::detail::parse_value(v) : 0.0);
    s.scored.push_back(ok ? 1 : 0);
    if (ok && !std::isfinite(s.scores.back()))
      throw IngestionError(path + ": unparsable score '" + v + "'");
  }
  return s;
}

struct EvalOutcome {
  scoring::EvalReport adjusted;
  scoring::EvalReport raw;
};

inline std::string report_text(const EvalOutcome& e) {
  std::ostringstream out;
  out << std::setprecision(6);
  for (const auto* r : {&e.adjusted, &e.raw}) {
    const std::string p = r->adjusted ? "adjusted." : "raw.";
    out << p << "precision=" << r->precision << '\n'
        << p << "recall=" << r->recall << '\n'
        << p << "f1=" << r->f1 << '\n'
        << p << "threshold=" << data::detail::format_double(r->threshold) << '\n'
        << p << "tp=" << r->tp << '\n'
        << p << "fp=" << r->fp << '\n'
        << p << "fn=" << r->fn << '\n'
        << p << "tn=" << r->tn << '\n';
  }
  return out.str();
}

inline nlohmann::json report_json(const EvalOutcome& e) {
  auto one = [](const scoring::EvalReport& r) {
    return nlohmann::json{{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1},
                          {"threshold", r.threshold}, {"tp", r.tp},         {"fp", r.fp},
                          {"fn", r.fn},               {"tn", r.tn}};
  };
  return {{"adjusted", one(e.adjusted)}, {"raw", one(e.raw)}};
}

/// Best-F1 reports with and without point adjustment. Labels come from the
/// score file unless `labels_path` names another CSV with a label column.
inline EvalOutcome cmd_eval(const std::string& scores_path, const std::string& labels_path, std::size_t grid,
                            const std::string& report_path, const std::string& json_path) {
  const auto table = read_table(scores_path);
  const auto s = read_scores(table, scores_path);
  const auto labels = labels_path.empty() ? label_column(table, scores_path)
                                          : label_column(read_table(labels_path), labels_path);
  if (labels.size() != s.size())
    throw EvaluationError("score file has " + std::to_string(s.size()) + " rows but labels have " +
                          std::to_string(labels.size()));
  EvalOutcome e{scoring::best_f1_search(s, labels, true, grid), scoring::best_f1_search(s, labels, false, grid)};
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw IngestionError("cannot write '" + report_path + "'");
    out << report_text(e);
  }
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw IngestionError("cannot write '" + json_path + "'");
    out << report_json(e).dump(2) << '\n';
  }
  return e;
}

// ---------------------------------------------------------------- gradcheck

/// Prints one row per case; true when all pass.
inline bool cmd_gradcheck(const std::vector<diagnostics::GradcheckCase>& cases, std::size_t points, double rtol,
                          std::ostream& out) {
  const auto rows = diagnostics::run_gradcheck(cases, points, rtol);
  bool all = true;
  out << std::left << std::setw(24) << "op" << std::setw(16) << "max_rel_error" << "status\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(24) << r.name << std::setw(16) << std::scientific << std::setprecision(3)
        << r.max_rel_error << (r.pass ? "pass" : "FAIL") << '\n';
    all = all && r.pass;
  }
  out << std::defaultfloat;
  return all;
}

}  // namespace lpcvae::cli
