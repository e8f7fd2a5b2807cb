#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lpcvae.hpp"

using namespace lpcvae;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("lpcvae_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  // Runs the CLI binary, stdout and stderr to files in the scratch dir.
  int run(const std::string& args) const {
    const std::string cmd = std::string(LPCVAE_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" +
                            path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string stderr_text() const { return slurp(path("stderr.txt")); }
  std::string stdout_text() const { return slurp(path("stdout.txt")); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

const char* kTinyRun = R"(seed = 3

[data]
source = synth
train_frac = 0.75

[synth]
length = 320
periods = 20
noise_sigma = 0.05
anomaly_rate = 0.02
kinds = spike

[model]
w = 16
conv_channels = 4
d_cond = 6
d_latent = 3
mlp_hidden = 8

[train]
epochs = 2
batch_size = 32
lr = 0.002

[score]
mc_samples = 4
)";

std::vector<std::string> csv_rows(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  return rows;
}

std::vector<std::string> param_names(const model::ParameterSet& p) {
  std::vector<std::string> out;
  for (const auto& [name, t] : p.items()) out.push_back(name);
  return out;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration errors

TEST_F(CliTest, CsvSourceWithoutPathExitsTwoNamingTheKey) {
  const auto cfg = write("run.cfg", "[data]\nsource = csv\n");
  EXPECT_EQ(run("train -c " + cfg + " --checkpoint " + path("m.ckpt")), 2);
  EXPECT_NE(stderr_text().find("data.path"), std::string::npos) << stderr_text();
  EXPECT_FALSE(fs::exists(path("m.ckpt")));
}

TEST_F(CliTest, UnknownKeyExitsTwo) {
  const auto cfg = write("run.cfg", "[model]\nwidth = 64\n");
  EXPECT_EQ(run("synth -c " + cfg + " -o " + path("s.csv")), 2);
  EXPECT_NE(stderr_text().find("model.width"), std::string::npos) << stderr_text();
}

TEST_F(CliTest, BadOverrideValueExitsTwo) {
  EXPECT_EQ(run("synth --synth.length=abc -o " + path("s.csv")), 2);
  EXPECT_NE(stderr_text().find("synth.length"), std::string::npos) << stderr_text();
}

TEST_F(CliTest, MissingSubcommandExitsTwo) { EXPECT_EQ(run(""), 2); }

TEST_F(CliTest, HelpExitsZero) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(stdout_text().find("train"), std::string::npos);
}

TEST(ConfigText, RoundTripsEveryField) {
  auto cfg = config::parse_text(kTinyRun);
  cfg.synth.periods = {100, 24};
  cfg.model.variant = model::Variant::kFdbOnly;
  cfg.score.adjust = false;
  const auto again = config::parse_text(config::to_text(cfg));
  EXPECT_EQ(config::to_text(again), config::to_text(cfg));
}

TEST(ConfigText, OverridesWinOverFile) {
  auto cfg = config::parse_text(kTinyRun);
  config::apply_overrides(cfg, {"--train.epochs=7", "--seed=42"});
  EXPECT_EQ(cfg.train.epochs, 7u);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.train.seed, 42u);
  EXPECT_THROW(config::apply_overrides(cfg, {"--train.epochs"}), ConfigError);
  EXPECT_THROW(config::apply_overrides(cfg, {"--train.nope=1"}), ConfigError);
}

// ---------------------------------------------------------------------------
// synth

TEST_F(CliTest, SynthRoundTripsThroughCsvLoader) {
  const auto cfg = config::parse_text(kTinyRun);
  const auto ds = cli::cmd_synth(cfg, path("s.csv"));
  const auto back = data::load_csv(path("s.csv"));
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.values, ds.values);
  EXPECT_EQ(back.timestamps, ds.timestamps);
  EXPECT_EQ(back.labels, ds.labels);
}

TEST_F(CliTest, SynthReportsAnomalyCountAndEchoesConfig) {
  const auto cfg = write("run.cfg", kTinyRun);
  ASSERT_EQ(run("synth -c " + cfg + " -o " + path("s.csv")), 0) << stderr_text();
  const auto ds = data::load_csv(path("s.csv"));
  std::size_t anomalous = 0;
  for (auto l : ds.labels) anomalous += l;
  EXPECT_GT(anomalous, 0u);
  EXPECT_NE(stdout_text().find(std::to_string(anomalous) + " anomalous"), std::string::npos) << stdout_text();
  const auto text = slurp(path("s.csv"));
  EXPECT_EQ(text.rfind("# seed = 3", 0), 0u);
}

TEST_F(CliTest, SynthSeedsDiffer) {
  const auto cfg = write("run.cfg", kTinyRun);
  ASSERT_EQ(run("synth -c " + cfg + " -o " + path("a.csv")), 0);
  ASSERT_EQ(run("synth -c " + cfg + " --seed=4 -o " + path("b.csv")), 0);
  ASSERT_EQ(run("synth -c " + cfg + " -o " + path("c.csv")), 0);
  EXPECT_NE(data::load_csv(path("a.csv")).values, data::load_csv(path("b.csv")).values);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("c.csv")));
}

// ---------------------------------------------------------------------------
// train

TEST_F(CliTest, TrainIsByteReproducible) {
  const auto cfg = write("run.cfg", kTinyRun);
  ASSERT_EQ(run("train -c " + cfg + " --checkpoint " + path("a.ckpt") + " --history " + path("a.csv")), 0)
      << stderr_text();
  ASSERT_EQ(run("train -c " + cfg + " --checkpoint " + path("b.ckpt") + " --history " + path("b.csv")), 0);
  EXPECT_EQ(slurp(path("a.ckpt")), slurp(path("b.ckpt")));
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  const auto rows = csv_rows(slurp(path("a.csv")));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "epoch,total,recon,kl,beta_mean");
  EXPECT_EQ(rows[1].rfind("1,", 0), 0u);
}

TEST_F(CliTest, TrainSeedOverrideChangesWeights) {
  const auto cfg = write("run.cfg", kTinyRun);
  ASSERT_EQ(run("train -c " + cfg + " --checkpoint " + path("a.ckpt") + " --history " + path("a.csv")), 0);
  ASSERT_EQ(run("train -c " + cfg + " --seed=9 --checkpoint " + path("b.ckpt") + " --history " + path("b.csv")), 0);
  EXPECT_NE(slurp(path("a.ckpt")), slurp(path("b.ckpt")));
}

TEST_F(CliTest, CheckpointCarriesConfigAndNormalization) {
  auto cfg = config::parse_text(kTinyRun);
  std::ostringstream log;
  const auto r = cli::cmd_train(cfg, path("m.ckpt"), "", log);
  const auto ck = model::load_checkpoint(path("m.ckpt"));
  EXPECT_EQ(ck.seed, 3u);
  const auto info = cli::parse_metadata(ck.metadata);
  EXPECT_EQ(config::to_text(info.config), config::to_text(cfg));
  EXPECT_GT(info.norm_std, 0.0);
  EXPECT_EQ(param_names(ck.params), param_names(r.fit.model.params()));
}

TEST_F(CliTest, FdbOnlyCheckpointHasNoTimeBranch) {
  auto cfg = config::parse_text(kTinyRun);
  cfg.model.variant = model::Variant::kFdbOnly;
  cfg.train.epochs = 1;
  std::ostringstream log;
  cli::cmd_train(cfg, path("m.ckpt"), "", log);
  const auto names = param_names(model::load_checkpoint(path("m.ckpt")).params);
  EXPECT_FALSE(names.empty());
  for (const auto& n : names) EXPECT_NE(n.rfind("ltdb.", 0), 0u) << n;
  EXPECT_NE(std::find(names.begin(), names.end(), "fdb.fc1.weight"), names.end());
}

// ---------------------------------------------------------------------------
// score

TEST_F(CliTest, ScoreCoversEverySplitPointWithUnscoredPrefix) {
  const auto cfg = write("run.cfg", kTinyRun);
  ASSERT_EQ(run("train -c " + cfg + " --checkpoint " + path("m.ckpt") + " --history " + path("h.csv")), 0);
  ASSERT_EQ(run("score --checkpoint " + path("m.ckpt") + " --split all -o " + path("s.csv")), 0) << stderr_text();
  const auto rows = csv_rows(slurp(path("s.csv")));
  ASSERT_EQ(rows.size(), 321u);
  EXPECT_EQ(rows[0], "index,timestamp,score,label");
  for (std::size_t i = 1; i <= 15; ++i) EXPECT_NE(rows[i].find(",NA,"), std::string::npos) << rows[i];
  EXPECT_EQ(rows[16].find(",NA,"), std::string::npos);

  ASSERT_EQ(run("score --checkpoint " + path("m.ckpt") + " -o " + path("t.csv")), 0);
  const auto test_rows = csv_rows(slurp(path("t.csv")));
  ASSERT_EQ(test_rows.size(), 81u);
  EXPECT_EQ(test_rows[1].rfind("240,", 0), 0u);
}

TEST_F(CliTest, ScoreIsDeterministicAndSeedSensitive) {
  const auto cfg = write("run.cfg", kTinyRun);
  ASSERT_EQ(run("train -c " + cfg + " --checkpoint " + path("m.ckpt") + " --history " + path("h.csv")), 0);
  const auto base = "score --checkpoint " + path("m.ckpt") + " ";
  ASSERT_EQ(run(base + "-o " + path("a.csv")), 0);
  ASSERT_EQ(run(base + "-o " + path("b.csv")), 0);
  ASSERT_EQ(run(base + "--seed=5 -o " + path("c.csv")), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_NE(csv_rows(slurp(path("a.csv"))), csv_rows(slurp(path("c.csv"))));
}

TEST_F(CliTest, ScoreRejectsMismatchedModelConfig) {
  const auto cfg = write("run.cfg", kTinyRun);
  ASSERT_EQ(run("train -c " + cfg + " --checkpoint " + path("m.ckpt") + " --history " + path("h.csv")), 0);
  const auto other = write("other.cfg", std::string(kTinyRun) + "\n[model]\nd_latent = 4\n");
  EXPECT_EQ(run("score --checkpoint " + path("m.ckpt") + " -c " + other + " -o " + path("s.csv")), 2);
  EXPECT_NE(stderr_text().find("d_latent"), std::string::npos) << stderr_text();

  cli::ScoreRequest req;
  req.checkpoint_path = path("m.ckpt");
  req.out_path = path("s.csv");
  req.expected = config::load(other);
  EXPECT_THROW(cli::cmd_score(req), CompatibilityError);
  req.expected = config::load(cfg);
  EXPECT_NO_THROW(cli::cmd_score(req));
}

TEST_F(CliTest, CorruptCheckpointIsDataError) {
  write("bad.ckpt", "not a checkpoint");
  EXPECT_EQ(run("score --checkpoint " + path("bad.ckpt") + " -o " + path("s.csv")), 3);
  EXPECT_EQ(run("score --checkpoint " + path("missing.ckpt") + " -o " + path("s.csv")), 3);
}

TEST_F(CliTest, TrainedModelScoresSpikesAboveCleanPoints) {
  auto cfg = config::parse_text(kTinyRun);
  cfg.synth.length = 1200;
  cfg.synth.anomaly_rate = 0.0;
  cfg.data.train_frac = 0.9;
  cfg.train.epochs = 15;
  cfg.score.mc_samples = 8;
  std::ostringstream log;
  cli::cmd_train(cfg, path("m.ckpt"), "", log);

  const auto clean = cli::cmd_synth(cfg, path("clean.csv"));
  auto spiked = clean;
  std::vector<std::size_t> at;
  for (std::size_t i = 100; i < spiked.size(); i += 97) {
    spiked.values[i] += 5.0;
    spiked.labels[i] = 1;
    at.push_back(i);
  }
  std::ofstream(path("spiked.csv")) << [&] {
    std::ostringstream s;
    data::write_csv(s, spiked);
    return s.str();
  }();

  cli::ScoreRequest req;
  req.checkpoint_path = path("m.ckpt");
  req.split = cli::Split::kAll;
  req.data_path = path("clean.csv");
  req.out_path = path("clean_s.csv");
  const auto a = cli::cmd_score(req);
  req.data_path = path("spiked.csv");
  req.out_path = path("spiked_s.csv");
  const auto b = cli::cmd_score(req);

  std::vector<double> clean_scores;
  for (std::size_t i = 0; i < a.scores.scores.size(); ++i)
    if (a.scores.scored[i]) clean_scores.push_back(a.scores.scores[i]);
  const double m = median(clean_scores);
  for (std::size_t i : at) EXPECT_GT(b.scores.scores[i], m + 3.0) << "point " << i;

  const auto e = cli::cmd_eval(path("spiked_s.csv"), "", 500, "", "");
  EXPECT_GE(e.adjusted.f1, 0.9);
}

// ---------------------------------------------------------------------------
// eval

TEST_F(CliTest, SeparableScoresGiveUnitF1) {
  write("s.csv",
        "index,timestamp,score,label\n0,0,NA,0\n1,60,0.1,0\n2,120,0.2,0\n3,180,5.0,1\n4,240,4.0,1\n"
        "5,300,0.3,0\n6,360,6.0,1\n7,420,0.1,0\n");
  const auto e = cli::cmd_eval(path("s.csv"), "", 500, path("r.txt"), path("r.json"));
  EXPECT_EQ(e.adjusted.f1, 1.0);
  EXPECT_EQ(e.raw.f1, 1.0);
  const auto report = slurp(path("r.txt"));
  EXPECT_NE(report.find("adjusted.f1=1\n"), std::string::npos) << report;
  EXPECT_NE(report.find("raw.tp=3\n"), std::string::npos) << report;
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_EQ(j["adjusted"]["f1"].get<double>(), 1.0);
  EXPECT_EQ(j["raw"]["fn"].get<int>(), 0);
}

TEST_F(CliTest, AdjustedF1DominatesRaw) {
  // A long segment detected only at its last point.
  write("s.csv",
        "score,label\n0.1,0\n0.2,0\n0.3,1\n0.3,1\n0.3,1\n0.9,1\n0.2,0\n0.4,0\n0.1,0\n");
  const auto e = cli::cmd_eval(path("s.csv"), "", 500, "", "");
  EXPECT_GE(e.adjusted.f1, e.raw.f1);
  EXPECT_EQ(e.adjusted.f1, 1.0);
  EXPECT_LT(e.raw.f1, 1.0);
}

TEST_F(CliTest, SeparateLabelFile) {
  write("s.csv", "score\n0.1\n0.9\n0.2\n");
  write("l.csv", "timestamp,value,label\n0,1,0\n60,1,1\n120,1,0\n");
  EXPECT_EQ(cli::cmd_eval(path("s.csv"), path("l.csv"), 500, "", "").raw.f1, 1.0);
  EXPECT_EQ(run("eval --scores " + path("s.csv") + " --labels " + path("l.csv")), 0) << stderr_text();
  EXPECT_NE(stdout_text().find("raw.f1=1"), std::string::npos);
}

TEST_F(CliTest, EmptyLabelColumnNamesLabel) {
  write("s.csv", "score,label\n");
  try {
    cli::cmd_eval(path("s.csv"), "", 500, "", "");
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("'label'"), std::string::npos) << e.what();
  }
  EXPECT_EQ(run("eval --scores " + path("s.csv")), 3);
  EXPECT_NE(stderr_text().find("'label'"), std::string::npos);
}

TEST_F(CliTest, LengthMismatchIsEvaluationError) {
  write("s.csv", "score\n0.1\n0.9\n");
  write("l.csv", "label\n0\n1\n0\n");
  EXPECT_THROW(cli::cmd_eval(path("s.csv"), path("l.csv"), 500, "", ""), EvaluationError);
  EXPECT_EQ(run("eval --scores " + path("s.csv") + " --labels " + path("l.csv")), 3);
}

TEST_F(CliTest, NoScoredPointsIsEvaluationError) {
  write("s.csv", "score,label\nNA,0\nNA,1\n");
  EXPECT_THROW(cli::cmd_eval(path("s.csv"), "", 500, "", ""), EvaluationError);
}

// ---------------------------------------------------------------------------
// gradcheck

TEST(Gradcheck, ReportListsEveryOpAndPasses) {
  const auto cases = diagnostics::default_gradcheck_cases();
  std::ostringstream out;
  EXPECT_TRUE(cli::cmd_gradcheck(cases, 2, diagnostics::kGradcheckRtol, out));
  const auto text = out.str();
  EXPECT_EQ(text.rfind("op", 0), 0u);
  EXPECT_NE(text.find("max_rel_error"), std::string::npos);
  EXPECT_EQ(text.find("FAIL"), std::string::npos) << text;
  for (const auto& c : cases) EXPECT_NE(text.find(c.name + " "), std::string::npos) << c.name;
}

TEST(Gradcheck, FailingCaseShowsFailRow) {
  auto cases = diagnostics::default_gradcheck_cases();
  cases.resize(2);
  cases.push_back({"always_off", [](std::uint64_t) {
                     ad::GradCheckResult r;
                     r.max_rel_error = 0.5;
                     return r;
                   }});
  std::ostringstream out;
  EXPECT_FALSE(cli::cmd_gradcheck(cases, 1, 1e-4, out));
  std::istringstream in(out.str());
  std::string line;
  std::size_t fails = 0;
  while (std::getline(in, line))
    if (line.find("FAIL") != std::string::npos) {
      ++fails;
      EXPECT_EQ(line.rfind("always_off", 0), 0u) << line;
    }
  EXPECT_EQ(fails, 1u);
}

TEST_F(CliTest, GradcheckBinaryExitsZero) {
  EXPECT_EQ(run("gradcheck --points 1"), 0) << stdout_text();
  EXPECT_NE(stdout_text().find("model_full"), std::string::npos);
  EXPECT_EQ(run("gradcheck --points 1 --rtol 1e-30"), 5);
}
