#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "support/synthetic.hpp"
#include "tsgbm/pipeline.hpp"

using namespace tsgbm;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("tsgbm_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    testkit::Ar1Spec s;
    s.rows = 300;
    s.seed = 21;
    std::ofstream out(root_ / "bars.csv", std::ios::binary);
    write_bars(out, testkit::ar1_bars(s));
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static CliRun run(const std::string& args) {
    const char* cli = std::getenv("TSGBM_CLI");
    CliRun r;
    if (!cli) return r;
    const auto o = root_ / "stdout.txt", e = root_ / "stderr.txt";
    const std::string cmd = std::string(cli) + " " + args + " >" + o.string() + " 2>" + e.string();
    const int status = std::system(cmd.c_str());
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
  }
  static std::string data() { return "--data " + (root_ / "bars.csv").string(); }
  static std::string out(const std::string& sub) { return "--out " + (root_ / sub).string(); }

  void SetUp() override {
    if (!std::getenv("TSGBM_CLI")) GTEST_SKIP() << "TSGBM_CLI not set";
  }

  static fs::path root_;
};

fs::path Cli::root_;

}  // namespace

TEST(Config, JsonOverridesDefaults) {
  const auto j = nlohmann::json::parse(R"({"dataset":"DS2","target_transform":"std_returns","trials":3,
    "seed":11,"allow_nonstationary":true,"params":{"loss_power":2.0},"indicators":{"rsi":10},
    "features":{"lags":[1,2]}})");
  const auto cfg = pipeline::config_from_json(j);
  EXPECT_EQ(cfg.dataset, features::DatasetId::DS2);
  EXPECT_EQ(cfg.target, transforms::TargetMethod::std_returns);
  EXPECT_EQ(cfg.trials, 3);
  EXPECT_EQ(cfg.seed, 11u);
  EXPECT_TRUE(cfg.factory.allow_nonstationary);
  EXPECT_EQ(cfg.base_params.loss_power, 2.0);
  EXPECT_EQ(cfg.factory.indicators.rsi_n, 10);
  EXPECT_EQ(cfg.factory.lags, (std::vector<int>{1, 2}));
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_THROW(pipeline::config_from_json(nlohmann::json{{"dataset", "DS9"}}), Error);
}

TEST(Config, EnvironmentLayer) {
  std::map<std::string, std::string> env{{"TSGBM_TRIALS", "4"}, {"TSGBM_DATASET", "DS3"}, {"TSGBM_SEED", "99"}};
  auto get = [&](const char* k) -> const char* {
    auto it = env.find(k);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  const auto cfg = pipeline::apply_env(pipeline::RunConfig{}, get);
  EXPECT_EQ(cfg.trials, 4);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.dataset, features::DatasetId::DS3);
  env["TSGBM_TRIALS"] = "many";
  EXPECT_THROW(pipeline::apply_env(pipeline::RunConfig{}, get), Error);
}

TEST(Config, StandardizedTargetNeedsStandardizedDataset) {
  pipeline::RunConfig cfg;
  cfg.dataset = features::DatasetId::DS1;
  cfg.target = transforms::TargetMethod::std_log_returns;
  try {
    cfg.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::incompatible_config);
  }
  cfg.dataset = features::DatasetId::DS4;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Prepare, TargetsAndContext) {
  testkit::Ar1Spec s;
  s.rows = 300;
  const Frame base = shift_prev(testkit::ar1_bars(s));
  features::FactoryConfig fc;
  fc.allow_nonstationary = true;
  const auto p = pipeline::prepare(base, features::DatasetId::DS1, transforms::TargetMethod::log_returns, fc);
  ASSERT_EQ(p.y.size(), p.x.rows());
  for (std::size_t i = 0; i < p.y.size(); ++i) {
    EXPECT_NEAR(p.y[i], std::log(p.actual[i] / p.context[i].prior_price), 1e-15);
    EXPECT_NEAR(transforms::invert_target(p.y[i], p.context[i], p.spec), p.actual[i], 1e-9 * p.actual[i]);
  }
  const auto q = pipeline::prepare(base, features::DatasetId::DS2, transforms::TargetMethod::std_ema_ratio, fc);
  double m = 0.0;
  for (std::size_t i = q.plan.holdout_train.begin; i < q.plan.holdout_train.end; ++i) m += q.y[i];
  EXPECT_NEAR(m / static_cast<double>(q.plan.holdout_train.size()), 0.0, 1e-9);
  for (std::size_t i = 0; i < q.y.size(); i += 17)
    EXPECT_NEAR(transforms::invert_target(q.y[i], q.context[i], q.spec), q.actual[i], 1e-9 * q.actual[i]);
}

TEST_F(Cli, TrainTwiceIsByteIdentical) {
  const std::string common = "train " + data() + " --trials 2 --seed 3 --threads 2 --allow-nonstationary ";
  const auto a = run(common + out("a"));
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run(common + out("b"));
  ASSERT_EQ(b.code, 0) << b.err;
  for (const char* f : {"model.json", "report.json", "residuals.csv", "importance.csv"}) {
    EXPECT_FALSE(slurp(root_ / "a" / f).empty()) << f;
    EXPECT_EQ(slurp(root_ / "a" / f), slurp(root_ / "b" / f)) << f;
  }
  EXPECT_NE(a.out.find("mae="), std::string::npos);

  const auto e = run("evaluate " + data() + " --allow-nonstationary --model " + (root_ / "a" / "model.json").string() +
                     " " + out("eval"));
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(slurp(root_ / "eval" / "residuals.csv"), slurp(root_ / "a" / "residuals.csv"));
}

TEST_F(Cli, EvaluateWithMismatchedFeaturesNamesColumn) {
  const auto a = run("train " + data() + " --trials 1 --seed 4 --threads 1 --allow-nonstationary " + out("m"));
  ASSERT_EQ(a.code, 0) << a.err;
  auto j = nlohmann::json::parse(slurp(root_ / "m" / "model.json"));
  j["pipeline"]["dataset"] = "DS3";
  {
    std::ofstream o(root_ / "m" / "wrong.json", std::ios::binary);
    o << j.dump();
  }
  const auto e = run("evaluate " + data() + " --allow-nonstationary --model " + (root_ / "m" / "wrong.json").string() +
                     " " + out("m2"));
  EXPECT_EQ(e.code, 1);
  EXPECT_EQ(e.err.rfind("error:missing_column:", 0), 0u) << e.err;
  EXPECT_NE(e.err.find("feature '"), std::string::npos);
}

TEST_F(Cli, ErrorLines) {
  const auto bad = run("train " + data() + " --dataset DS1 --target-transform std_returns " + out("x"));
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(bad.err.rfind("error:incompatible_config:", 0), 0u) << bad.err;

  const auto missing = run("ingest --data " + (root_ / "nope.csv").string() + " " + out("x"));
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(missing.err.rfind("error:io:", 0), 0u) << missing.err;

  EXPECT_EQ(run("train --bogus").code, 2);
  EXPECT_EQ(run("").code, 2);

  const auto gate = run("features " + data() + " " + out("g"));
  if (gate.code != 0) EXPECT_EQ(gate.err.rfind("error:nonstationary:", 0), 0u) << gate.err;
}

TEST_F(Cli, IngestAndFeatures) {
  const auto i = run("ingest " + data() + " " + out("ing"));
  ASSERT_EQ(i.code, 0) << i.err;
  EXPECT_EQ(slurp(root_ / "ing" / "bars.csv"), slurp(root_ / "bars.csv"));
  const auto f = run("features " + data() + " --dataset DS3 --allow-nonstationary " + out("feat"));
  ASSERT_EQ(f.code, 0) << f.err;
  const auto header = slurp(root_ / "feat" / "features.csv").substr(0, 200);
  EXPECT_EQ(header.rfind("Date,", 0), 0u);
  EXPECT_TRUE(fs::exists(root_ / "feat" / "stationarity.csv"));
}

TEST_F(Cli, MatrixWritesTenRows) {
  const auto r = run("matrix " + data() + " --trials 1 --seed 5 --threads 2 --allow-nonstationary " + out("mx"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(root_ / "mx" / "summary.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 11u);
  EXPECT_EQ(lines[0].rfind("method,dataset,target_transform,", 0), 0u);
  EXPECT_EQ(lines.back().rfind("\"Random Walk\"", 0), 0u);
  EXPECT_NE(lines[1].find("DS1,log_returns"), std::string::npos);
  EXPECT_TRUE(fs::exists(root_ / "mx" / "DS3_log_returns" / "model.json"));
}
