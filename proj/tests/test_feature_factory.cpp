#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <set>

#include "support/synthetic.hpp"
#include "tsgbm/feature_factory.hpp"

using namespace tsgbm;
namespace ff = tsgbm::features;

namespace {

Series S(std::vector<double> v, std::string name = "x") { return Series(std::move(name), std::move(v)); }

Date ymd(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

const Frame& base_frame() {
  static const Frame f = [] {
    testkit::Ar1Spec s;
    s.rows = 400;
    s.seed = 3;
    return shift_prev(testkit::ar1_bars(s));
  }();
  return f;
}

ff::FactoryConfig no_gate() {
  ff::FactoryConfig c;
  c.gate = false;
  return c;
}

bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

TEST(Lags, ShiftDefinition) {
  std::vector<Date> idx(10);
  Frame f(idx);
  f.add(S({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, "open"));
  f.add(S({10, 11, 12, 13, 14, 15, 16, 17, 18, 19}, "closeprev"));
  f.add(S(std::vector<double>(10, 1.0), "typical"));
  const std::vector<int> lags{1, 5};
  const Frame out = ff::make_lags(f, lags);
  EXPECT_FALSE(is_defined(out.at("closeprev_lag1")[0]));
  EXPECT_EQ(out.at("closeprev_lag1")[1], 10);
  EXPECT_EQ(out.at("closeprev_lag1")[3], 12);
  EXPECT_EQ(out.at("open_lag5")[9], 4);
  EXPECT_EQ(out.at("open_lag5").warmup, 5u);
}

TEST(Lags, LongLagWarns) {
  Frame f(std::vector<Date>(20));
  for (const char* n : {"open", "closeprev", "typical"}) f.add(S(std::vector<double>(20, 1.0), n));
  std::vector<std::string> warnings;
  const std::vector<int> lags{30};
  const Frame out = ff::make_lags(f, lags, &warnings);
  EXPECT_TRUE(out.at("open_lag30").all_undefined());
  EXPECT_EQ(warnings.size(), 3u);
}

TEST(Lags, MissingColumnFails) {
  Frame f(std::vector<Date>(3));
  f.add(S({1, 2, 3}, "open"));
  const std::vector<int> lags{1};
  EXPECT_THROW(ff::make_lags(f, lags), Error);
}

TEST(Cyclical, Examples) {
  // 2024-01-08 is a Monday; 2024-06-08 has day-of-month 8 and month 6.
  const Frame c = ff::cyclical_features({ymd(2024, 1, 8), ymd(2024, 6, 8)});
  EXPECT_NEAR(c.at("dow_sin")[0], 0.0, 1e-15);
  EXPECT_NEAR(c.at("month_sin")[1], 0.0, 1e-12);
  EXPECT_NEAR(c.at("dom_sin")[1], std::sin(16.0 * M_PI / 31.0), 1e-15);
  EXPECT_NEAR(c.at("dom_sin")[1], 0.9987, 1e-4);
}

TEST(Cross, Examples) {
  Frame f(std::vector<Date>(2));
  f.add(S({150, 102}, "open"));
  f.add(S({100, 100}, "closeprev"));
  const Frame c = ff::cross_features(f, S({3, kUndef}));
  EXPECT_EQ(c.at("difference_open-closeprev")[1], 2);
  EXPECT_EQ(c.at("difference_open-closeprev_lag1")[1], 2);
  EXPECT_NEAR(c.at("ratio_atr-open")[0], 0.02, 1e-15);
  Frame g(std::vector<Date>(1));
  g.add(S({100}, "open"));
  g.add(S({100}, "closeprev"));
  EXPECT_EQ(ff::cross_features(g, S({1})).at("difference_open-closeprev")[0], 0);
}

TEST(SlopeFixed, IdenticalSeriesIsZero) {
  Rng rng(1);
  std::vector<double> x(60);
  for (auto& v : x) v = rng.normal();
  const auto s = ff::slope_diff_fixed(S(x), S(x), 14);
  EXPECT_EQ(s.warmup, 14u);
  for (std::size_t t = 14; t < 60; ++t) EXPECT_EQ(s[t], 0.0);
}

TEST(SlopeFixed, HandNormalization) {
  const auto s = ff::slope_diff_fixed(S({0, 1, 2}), S({2, 1, 0}), 2);
  EXPECT_NEAR(s[2], 2.0, 1e-15);
  EXPECT_GT(ff::slope_diff_fixed(S({0, 1, 3, 7}), S({9, 8, 6, 5}), 3)[3], 0.0);
}

TEST(SlopeFixed, FlatWindowGivesZero) {
  const auto s = ff::slope_diff_fixed(S({1, 2, 3, 4}), S({5, 5, 5, 5}), 2);
  EXPECT_EQ(s[3], 0.0);
  EXPECT_THROW(ff::slope_diff_fixed(S({1, 2}), S({1, 2}), 1), Error);
}

TEST(SlopeDynamic, PeriodFromLastConfirmedPivot) {
  Rng rng(3);
  std::vector<double> ind(40), price(40);
  for (std::size_t i = 0; i < 40; ++i) {
    ind[i] = rng.normal();
    price[i] = 100 + rng.normal();
  }
  indicators::ZigZagPivots z;
  z.pivots.push_back({10, 12, 100.0, indicators::PivotKind::peak});
  z.pivots.push_back({25, 26, 90.0, indicators::PivotKind::trough});
  const auto s = ff::slope_diff_dynamic(S(ind), S(price), z);
  EXPECT_FALSE(is_defined(s[11]));
  // t = 14: last pivot at 10 -> n = 4.
  EXPECT_DOUBLE_EQ(s[14], ff::slope_diff_fixed(S(ind), S(price), 4)[14]);
  // t = 26: pivot at 25 confirmed at 26 -> n = 1, clipped to 2.
  EXPECT_DOUBLE_EQ(s[26], ff::slope_diff_fixed(S(ind), S(price), 2)[26]);
  // t = 25: the pivot at 25 is not yet confirmed, so the one at 10 still applies.
  EXPECT_DOUBLE_EQ(s[25], ff::slope_diff_fixed(S(ind), S(price), 15)[25]);
  const auto same = ff::slope_diff_dynamic(S(price), S(price), z);
  for (std::size_t t = 12; t < 40; ++t) EXPECT_EQ(same[t], 0.0);
}

TEST(Dataset, NamingGrammarAndRemovalRules) {
  const auto cfg = no_gate();
  const auto ds1 = ff::assemble_dataset(ff::DatasetId::DS1, base_frame(), cfg);
  const auto ds2 = ff::assemble_dataset(ff::DatasetId::DS2, base_frame(), cfg);
  const auto ds3 = ff::assemble_dataset(ff::DatasetId::DS3, base_frame(), cfg);
  const auto ds4 = ff::assemble_dataset(ff::DatasetId::DS4, base_frame(), cfg);

  EXPECT_TRUE(ds1.features.contains("difference_open-closeprev_ema"));
  EXPECT_EQ(ds1.features.names(), ds2.features.names());
  EXPECT_EQ(ds3.features.names(), ds4.features.names());
  EXPECT_LT(ds3.features.cols(), ds1.features.cols());

  const auto n1 = ds1.features.names(), n3 = ds3.features.names();
  const std::set<std::string> s1(n1.begin(), n1.end());
  for (const auto& n : n3) {
    EXPECT_TRUE(s1.count(n)) << n;
    EXPECT_FALSE(has_suffix(n, "_ema") || has_suffix(n, "_emadiff")) << n;
    EXPECT_EQ(n.rfind("slope_", 0), std::string::npos) << n;
    EXPECT_EQ(n.rfind("ratio_atr-open", 0), std::string::npos) << n;
  }
  EXPECT_TRUE(ds3.features.contains("difference_open-closeprev_ret"));
  EXPECT_TRUE(ds3.features.contains("closeprev_ret_oh"));
  for (const auto& spec : ds3.specs) EXPECT_FALSE(spec.novel) << spec.base_name;

  EXPECT_EQ(ds1.usable, ds3.usable);
  for (const auto& c : ds2.features.columns()) {
    double m = 0.0;
    std::size_t k = 0;
    for (std::size_t i = ds2.fit.begin; i < ds2.fit.end; ++i)
      if (is_defined(c[i])) m += c[i], ++k;
    EXPECT_NEAR(m / static_cast<double>(k), 0.0, 1e-9) << c.name;
  }
}

TEST(Dataset, TransformRulesFollowPredicates) {
  const auto ds = ff::assemble_dataset(ff::DatasetId::DS1, base_frame(), no_gate());
  for (std::size_t i = 0; i < ds.specs.size(); ++i) {
    const auto& spec = ds.specs[i];
    const auto& t = spec.transform;
    if (t == "ema" || t == "emadiff") {
      EXPECT_TRUE(spec.ema_eligible) << spec.base_name;
      EXPECT_TRUE(spec.novel);
    }
    if (t == "ret_oh") EXPECT_TRUE(spec.outlier_handled);
    if (spec.outlier_handled) EXPECT_EQ(t, "ret_oh");
    if (spec.treatment == ff::Treatment::level) EXPECT_FALSE(t.empty()) << spec.base_name;
  }
  // Volume is positive: log returns. The overnight gap changes sign: cube-root returns.
  EXPECT_TRUE(ds.features.contains("volumeprev_logret"));
  EXPECT_TRUE(ds.features.contains("difference_open-closeprev_cbrtret"));
  EXPECT_FALSE(ds.features.contains("difference_open-closeprev_logret"));
  EXPECT_FALSE(ds.features.contains("volumeprev_ema"));
  // EMA of closeprev divided by itself is identically one and is dropped.
  EXPECT_FALSE(ds.features.contains("ema14_ema"));
}

TEST(Dataset, EveryColumnFiniteOrMissingFromUsableStart) {
  const auto ds = ff::assemble_dataset(ff::DatasetId::DS1, base_frame(), no_gate());
  for (const auto& c : ds.features.columns()) {
    EXPECT_LE(c.warmup, ds.usable.begin) << c.name;
    for (std::size_t i = ds.usable.begin; i < c.size(); ++i)
      EXPECT_FALSE(std::isinf(c[i])) << c.name << " row " << i;
  }
}

TEST(Dataset, Deterministic) {
  const auto a = ff::assemble_dataset(ff::DatasetId::DS2, base_frame(), no_gate());
  const auto b = ff::assemble_dataset(ff::DatasetId::DS2, base_frame(), no_gate());
  ASSERT_EQ(a.features.cols(), b.features.cols());
  for (std::size_t i = 0; i < a.features.cols(); ++i) {
    const auto& x = a.features.columns()[i].values;
    const auto& y = b.features.columns()[i].values;
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t r = 0; r < x.size(); ++r)
      EXPECT_TRUE((std::isnan(x[r]) && std::isnan(y[r])) || x[r] == y[r]);
  }
}

TEST(Dataset, GateAbortsUnlessAllowed) {
  ff::FactoryConfig cfg;
  try {
    ff::assemble_dataset(ff::DatasetId::DS1, base_frame(), cfg);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::nonstationary);
    EXPECT_NE(std::string(e.what()).find("--allow-nonstationary"), std::string::npos);
  }
  cfg.allow_nonstationary = true;
  const auto ds = ff::assemble_dataset(ff::DatasetId::DS1, base_frame(), cfg);
  EXPECT_EQ(ds.gate.entries.size(), ds.features.cols());
  for (const auto& e : ds.gate.entries)
    if (e.column == "dow_sin") EXPECT_TRUE(e.pass);
}

TEST(Dataset, InjectedRawPriceFailsGate) {
  ff::FactoryConfig cfg;
  cfg.allow_nonstationary = true;
  const auto ds = ff::assemble_dataset(ff::DatasetId::DS1, base_frame(), cfg);
  for (const auto& e : ds.gate.entries) {
    if (e.column == "closeprev_ret" || e.column == "closeprev_logret") {
      EXPECT_TRUE(e.pass) << e.column;
    }
  }
  Frame raw(base_frame().index());
  raw.add(base_frame().at("closeprev"));
  EXPECT_FALSE(stationarity::gate_frame(raw, 0.05, 1).entries[0].pass);
}

TEST(Dataset, TooShortFails) {
  testkit::Ar1Spec s;
  s.rows = 40;
  EXPECT_THROW(ff::assemble_dataset(ff::DatasetId::DS1, shift_prev(testkit::ar1_bars(s)), no_gate()), Error);
}
