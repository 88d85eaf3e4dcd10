#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "support/oracles.hpp"
#include "tsgbm/gbdt.hpp"
#include "tsgbm/model_io.hpp"

using namespace tsgbm;
using namespace tsgbm::gbdt;

namespace {

FeatureTable table(std::vector<std::vector<double>> cols) {
  FeatureTable t;
  for (std::size_t i = 0; i < cols.size(); ++i) t.names.push_back("f" + std::to_string(i));
  t.columns = std::move(cols);
  return t;
}

struct Regression {
  FeatureTable x;
  std::vector<double> y;
};

Regression smooth_problem(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Regression r;
  std::vector<double> a(n), b(n), c(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.uniform(-2, 2);
    b[i] = rng.uniform(-2, 2);
    c[i] = rng.uniform() < 0.1 ? kUndef : rng.normal();
    r.y.push_back(std::sin(a[i]) + 0.5 * b[i] * b[i] + 0.1 * rng.normal());
  }
  r.x = table({a, b, c});
  return r;
}

BoostParams quick(int iters = 60) {
  BoostParams p;
  p.num_iterations = iters;
  p.learning_rate = 0.1;
  p.num_leaves = 15;
  p.min_data_in_leaf = 5;
  p.loss_power = 2.0;
  p.seed = 11;
  return p;
}

}  // namespace

TEST(Loss, GradHessExamples) {
  const auto q = loss_grad_hess(3.0, 1.0, 2.0);
  EXPECT_EQ(q.grad, 2.0);
  EXPECT_EQ(q.hess, 1.0);
  const auto c = loss_grad_hess(-1.0, 1.0, 3.0);
  EXPECT_DOUBLE_EQ(c.grad, -4.0);
  EXPECT_DOUBLE_EQ(c.hess, 4.0);
  EXPECT_EQ(loss_grad_hess(1.0, 1.0, 3.0).hess, kHessianFloor);
  EXPECT_DOUBLE_EQ(power_loss(3.0, 1.0, 3.0), 8.0 / 3.0);
}

TEST(Loss, FiniteDifference) {
  EXPECT_LT(testkit::worst_fd_error(2.0, 2000, 1), 1e-5);
  EXPECT_LT(testkit::worst_fd_error(3.0, 2000, 2), 1e-5);
}

TEST(Regularization, SoftThresholdAndGain) {
  EXPECT_EQ(soft_threshold(0.5, 1.0), 0.0);
  EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_DOUBLE_EQ(leaf_value(4.0, 1.0, 1.0, 1.0), -1.5);
  EXPECT_DOUBLE_EQ(split_gain(-2.0, 1.0, 2.0, 1.0, 0.0, 0.0), 4.0);
  EXPECT_EQ(split_gain(1.0, 1.0, 1.0, 1.0, 0.0, 0.0), 0.0);
}

TEST(Bins, DistinctValuesGetOwnBins) {
  const std::vector<double> v{3, 1, 2, 2, kUndef, 1};
  const auto fb = build_feature_bins(v, 255);
  ASSERT_EQ(fb.cuts.size(), 2u);
  EXPECT_EQ(fb.bin(1), 0);
  EXPECT_EQ(fb.bin(2), 1);
  EXPECT_EQ(fb.bin(3), 2);
  EXPECT_EQ(fb.bin(kUndef), fb.missing_bin());
  EXPECT_EQ(fb.bin(-100), 0);
  EXPECT_EQ(fb.bin(100), 2);
}

TEST(Bins, CappedAtMaxBin) {
  std::vector<double> v(5000);
  std::iota(v.begin(), v.end(), 0.0);
  const auto fb = build_feature_bins(v, 16);
  EXPECT_LE(fb.num_bins(), 16);
  EXPECT_GE(fb.num_bins(), 15);
  EXPECT_TRUE(std::is_sorted(fb.cuts.begin(), fb.cuts.end()));
  EXPECT_TRUE(build_feature_bins(std::vector<double>(10, 4.0), 16).cuts.empty());
}

TEST(Goss, FullRateKeepsEverything) {
  std::vector<double> g{3, -1, 0.5, 7};
  const auto s = goss_sample(g, 1.0, 0.0, 3);
  EXPECT_EQ(s.rows, (std::vector<std::uint32_t>{0, 1, 2, 3}));
  EXPECT_EQ(s.weights, std::vector<double>(4, 1.0));
}

TEST(Goss, KeepsTopAndAmplifiesRest) {
  std::vector<double> g(100);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<double>(i);
  const auto s = goss_sample(g, 0.2, 0.1, 5);
  EXPECT_EQ(s.rows.size(), 30u);
  EXPECT_TRUE(std::is_sorted(s.rows.begin(), s.rows.end()));
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    if (s.rows[i] >= 80) EXPECT_EQ(s.weights[i], 1.0);
    else EXPECT_DOUBLE_EQ(s.weights[i], 8.0);
  }
}

TEST(Goss, WeightedGradientSumIsUnbiased) {
  Rng rng(9);
  std::vector<double> g(400);
  for (auto& v : g) v = rng.normal(0.3, 1.0);
  const double full = std::accumulate(g.begin(), g.end(), 0.0);
  double mean = 0.0;
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    const auto s = goss_sample(g, 0.2, 0.1, mix_seed(77, static_cast<std::uint64_t>(r)));
    double acc = 0.0;
    for (std::size_t i = 0; i < s.rows.size(); ++i) acc += g[s.rows[i]] * s.weights[i];
    mean += acc / reps;
  }
  EXPECT_NEAR(mean, full, 0.02 * std::abs(full) + 2.0);
}

TEST(Tree, StructuralInvariants) {
  const auto pr = smooth_problem(600, 1);
  auto p = quick(30);
  p.num_leaves = 12;
  p.max_depth = 4;
  p.min_data_in_leaf = 10;
  p.goss_top_rate = 0.3;
  p.goss_other_rate = 0.2;
  const auto m = train(pr.x, pr.y, p);
  ASSERT_FALSE(m.trees.empty());
  for (const auto& t : m.trees) {
    EXPECT_LE(t.num_leaves(), 12);
    EXPECT_LE(t.max_depth(), 4);
    EXPECT_EQ(t.split_order.size() + 1, static_cast<std::size_t>(t.num_leaves()));
    for (const auto& nd : t.nodes) {
      if (nd.is_leaf()) {
        EXPECT_GE(nd.count, 10u);
      } else {
        EXPECT_GT(nd.gain, 0.0);
        EXPECT_EQ(t.nodes[nd.left].count + t.nodes[nd.right].count, nd.count);
      }
    }
  }
}

TEST(Tree, MatchesExhaustiveOracle) {
  Rng rng(2024);
  for (int k = 0; k < 60; ++k) {
    const auto fx = testkit::random_fixture(rng);
    const auto m = train(fx.x, fx.y, fx.params);
    EXPECT_EQ(testkit::compare_first_tree(m, testkit::oracle_first_tree(fx)), "") << "fixture " << k;
  }
}

TEST(Tree, MissingValuesRouteByLearnedDirection) {
  // Missing rows share the high targets, so they must follow the high side.
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(i < 20 ? 0.0 : 1.0);
    y.push_back(i < 20 ? 0.0 : 10.0);
  }
  for (int i = 0; i < 10; ++i) {
    x.push_back(kUndef);
    y.push_back(10.0);
  }
  auto p = quick(1);
  p.num_leaves = 2;
  p.min_data_in_leaf = 1;
  const auto m = train(table({x}), y, p);
  ASSERT_EQ(m.trees.size(), 1u);
  const auto pred = predict(m, table({{0.0, 1.0, kUndef}}));
  EXPECT_LT(pred[0], pred[1]);
  EXPECT_EQ(pred[1], pred[2]);
}

TEST(Train, LearnsAndEarlyStops) {
  const auto pr = smooth_problem(800, 2);
  const auto xt = table({std::vector<double>(pr.x.columns[0].begin(), pr.x.columns[0].begin() + 600),
                         std::vector<double>(pr.x.columns[1].begin(), pr.x.columns[1].begin() + 600),
                         std::vector<double>(pr.x.columns[2].begin(), pr.x.columns[2].begin() + 600)});
  const auto xv = table({std::vector<double>(pr.x.columns[0].begin() + 600, pr.x.columns[0].end()),
                         std::vector<double>(pr.x.columns[1].begin() + 600, pr.x.columns[1].end()),
                         std::vector<double>(pr.x.columns[2].begin() + 600, pr.x.columns[2].end())});
  const std::span<const double> y(pr.y);
  auto p = quick(2000);
  p.learning_rate = 0.3;
  p.early_stopping_rounds = 10;
  TrainLog log;
  const auto m = train(xt, y.first(600), p, &xv, y.subspan(600), &log);
  EXPECT_LT(m.trees.size(), 2000u);
  EXPECT_EQ(static_cast<int>(m.trees.size()), log.best_iteration);
  EXPECT_EQ(log.valid_loss.size(), static_cast<std::size_t>(log.best_iteration) + 10u);
  const auto best = *std::min_element(log.valid_loss.begin(), log.valid_loss.end());
  EXPECT_EQ(best, log.best_valid_loss);
  const auto pv = predict(m, xv);
  EXPECT_NEAR(mean_power_loss(pv, y.subspan(600), 2.0), best, 1e-12);
  double var = 0.0, mu = 0.0;
  for (double v : y.subspan(600)) mu += v / 200.0;
  for (double v : y.subspan(600)) var += (v - mu) * (v - mu) / 200.0;
  EXPECT_LT(best, 0.25 * var);
  for (std::size_t i = 1; i < log.train_loss.size(); ++i) EXPECT_LE(log.train_loss[i], log.train_loss[i - 1] + 1e-12);
}

TEST(Train, ConstantTargetStopsImmediately) {
  const auto pr = smooth_problem(100, 3);
  const auto m = train(pr.x, std::vector<double>(100, 2.5), quick());
  EXPECT_TRUE(m.trees.empty());
  EXPECT_EQ(predict(m, pr.x)[7], 2.5);
}

TEST(Train, GossFullRateIsBitExactToUnsampled) {
  const auto pr = smooth_problem(500, 4);
  auto p = quick(40);
  p.goss_top_rate = 1.0;
  p.goss_other_rate = 0.0;
  auto q = p;
  q.seed = 999;
  const auto a = train(pr.x, pr.y, p);
  const auto b = train(pr.x, pr.y, q);
  ASSERT_EQ(a.trees.size(), b.trees.size());
  for (std::size_t i = 0; i < a.trees.size(); ++i) EXPECT_TRUE(a.trees[i] == b.trees[i]);
}

TEST(Train, DeterministicForSeed) {
  const auto pr = smooth_problem(500, 5);
  auto p = quick(30);
  p.goss_top_rate = 0.2;
  p.goss_other_rate = 0.1;
  EXPECT_EQ(dump_model(train(pr.x, pr.y, p)), dump_model(train(pr.x, pr.y, p)));
  auto q = p;
  q.seed = 12;
  EXPECT_NE(dump_model(train(pr.x, pr.y, p)), dump_model(train(pr.x, pr.y, q)));
}

TEST(Train, InvalidInputs) {
  const auto pr = smooth_problem(50, 6);
  auto p = quick();
  p.num_leaves = 1;
  EXPECT_THROW(train(pr.x, pr.y, p), Error);
  std::vector<double> bad = pr.y;
  bad[3] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train(pr.x, bad, quick()), Error);
  EXPECT_THROW(train(pr.x, std::vector<double>(10, 0.0), quick()), Error);
}

TEST(ModelIo, RoundTripIsBitExact) {
  const auto pr = smooth_problem(400, 7);
  auto m = train(pr.x, pr.y, quick(25));
  m.target_spec.kind = transforms::Kind::log_returns;
  m.target_spec.standardized = true;
  m.target_spec.stats = {0.1 / 3.0, 1.0 / 7.0};
  const auto path = std::filesystem::temp_directory_path() / "tsgbm_model_roundtrip.json";
  save(m, path.string());
  const auto back = load(path.string());
  EXPECT_EQ(dump_model(back), dump_model(m));
  const auto a = predict(m, pr.x), b = predict(back, pr.x);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_EQ(back.target_spec.stats.mean, m.target_spec.stats.mean);
  EXPECT_EQ(back.target_spec.stats.std, m.target_spec.stats.std);
  std::filesystem::remove(path);
}

TEST(ModelIo, VersionMismatch) {
  const auto pr = smooth_problem(100, 8);
  auto j = model_to_json(train(pr.x, pr.y, quick(3)));
  j["version"] = kModelVersion + 1;
  try {
    model_from_json(nlohmann::json::parse(j.dump()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::version_mismatch);
  }
}

TEST(Predict, MissingColumnNamesFeature) {
  const auto pr = smooth_problem(100, 9);
  const auto m = train(pr.x, pr.y, quick(3));
  auto x = pr.x;
  x.names[1] = "other";
  try {
    predict(m, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_column);
    EXPECT_NE(std::string(e.what()).find("f1"), std::string::npos);
  }
}

TEST(Importance, SumsGains) {
  const auto pr = smooth_problem(300, 10);
  const auto m = train(pr.x, pr.y, quick(10));
  const auto imp = feature_importance(m);
  double total = 0.0, want = 0.0;
  for (const auto& fi : imp) total += fi.gain;
  for (const auto& t : m.trees)
    for (const auto& nd : t.nodes) want += nd.is_leaf() ? 0.0 : nd.gain;
  EXPECT_NEAR(total, want, 1e-9 * want);
  EXPECT_GT(imp[0].split_count + imp[1].split_count, imp[2].split_count);
}
