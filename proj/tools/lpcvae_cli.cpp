// lpcvae command-line entry point: synth, train, score, eval, gradcheck.

#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lpcvae.hpp"

namespace {

using namespace lpcvae;

enum Exit { kOk = 0, kValidation = 2, kData = 3, kNumeric = 4, kGradcheck = 5 };

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kIngestion:
    case ErrorKind::kEvaluation: return kData;
    case ErrorKind::kNumericDomain: return kNumeric;
    default: return kValidation;
  }
}

bool is_config_key(const std::string& key) {
  for (const auto& f : config::detail::fields())
    if (f.key == key) return true;
  return false;
}

// Pulls `--section.key=value` overrides out of argv before CLI11 sees it.
std::vector<std::string> take_overrides(std::vector<std::string>& args) {
  std::vector<std::string> overrides, rest;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (a.rfind("--", 0) == 0 && eq != std::string::npos && is_config_key(a.substr(2, eq - 2)))
      overrides.push_back(a);
    else
      rest.push_back(a);
  }
  args = rest;
  return overrides;
}

config::RunConfig resolve(const std::string& path, const std::vector<std::string>& overrides) {
  auto cfg = path.empty() ? config::RunConfig{} : config::load(path);
  config::apply_overrides(cfg, overrides);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  const auto overrides = take_overrides(args);
  std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back

  CLI::App app{"Univariate time-series anomaly detection with a two-branch conditional VAE"};
  app.require_subcommand(1);
  app.footer("Configuration keys may be overridden as --section.key=value, e.g. --train.epochs=5.");

  std::string config_path, checkpoint_path = "model.ckpt", history_path = "history.csv";
  auto* train = app.add_subcommand("train", "fit a model and write checkpoint and loss history");
  train->add_option("-c,--config", config_path, "run configuration file");
  train->add_option("--checkpoint", checkpoint_path, "checkpoint output")->capture_default_str();
  train->add_option("--history", history_path, "loss-history CSV output")->capture_default_str();

  std::string score_out = "scores.csv", split = "test", data_override;
  auto* score = app.add_subcommand("score", "score a series with a trained model");
  score->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  score->add_option("-o,--out", score_out, "score CSV output")->capture_default_str();
  score->add_option("--split", split, "all, train or test")->capture_default_str();
  score->add_option("--data", data_override, "CSV to score instead of the training source");
  score->add_option("-c,--config", config_path, "expected configuration; model section must match");

  std::string scores_path, labels_path, report_path, json_path;
  std::size_t grid = 500;
  auto* eval = app.add_subcommand("eval", "best-F1 reports, point-adjusted and raw");
  eval->add_option("--scores", scores_path, "score CSV from `score`")->required();
  eval->add_option("--labels", labels_path, "CSV with a label column (default: the score file)");
  eval->add_option("--grid", grid, "threshold quantile grid size")->capture_default_str();
  eval->add_option("--report", report_path, "key=value report output");
  eval->add_option("--json", json_path, "JSON report output");

  std::string synth_out = "synth.csv";
  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic series");
  synth->add_option("-c,--config", config_path, "run configuration file");
  synth->add_option("-o,--out", synth_out, "CSV output")->capture_default_str();

  std::size_t points = 5;
  double rtol = diagnostics::kGradcheckRtol;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  gradcheck->add_option("--points", points, "random points per op")->capture_default_str();
  gradcheck->add_option("--rtol", rtol, "relative error tolerance")->capture_default_str();

  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  try {
    if (*train) {
      cli::cmd_train(resolve(config_path, overrides), checkpoint_path, history_path, std::cout);
    } else if (*score) {
      cli::ScoreRequest req;
      req.checkpoint_path = checkpoint_path;
      req.out_path = score_out;
      req.split = cli::parse_split(split);
      if (!data_override.empty()) req.data_path = data_override;
      if (!config_path.empty()) req.expected = resolve(config_path, {});
      req.overrides = overrides;
      const auto r = cli::cmd_score(req);
      std::size_t scored = 0;
      for (auto f : r.scores.scored) scored += f;
      std::cout << "scored " << scored << " of " << r.series.size() << " points -> " << score_out << "\n";
    } else if (*eval) {
      std::cout << cli::report_text(cli::cmd_eval(scores_path, labels_path, grid, report_path, json_path));
    } else if (*synth) {
      const auto ds = cli::cmd_synth(resolve(config_path, overrides), synth_out);
      std::size_t anomalous = 0;
      for (auto l : ds.labels) anomalous += l;
      std::cout << ds.size() << " points, " << anomalous << " anomalous -> " << synth_out << "\n";
    } else if (*gradcheck) {
      if (!cli::cmd_gradcheck(diagnostics::default_gradcheck_cases(), points, rtol, std::cout)) return kGradcheck;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
