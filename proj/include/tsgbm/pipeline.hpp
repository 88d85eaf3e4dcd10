#pragma once

// End-to-end orchestration: configuration, dataset preparation, tuning,
// final training, evaluation and the nine-configuration test matrix.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsgbm/cv_tuning.hpp"
#include "tsgbm/error.hpp"
#include "tsgbm/evaluation.hpp"
#include "tsgbm/feature_factory.hpp"
#include "tsgbm/gbdt.hpp"
#include "tsgbm/model_io.hpp"
#include "tsgbm/series_core.hpp"
#include "tsgbm/transforms.hpp"

namespace tsgbm::pipeline {

using features::DatasetId;
using transforms::TargetMethod;

struct RunConfig {
  std::string data_path;
  DatasetId dataset = DatasetId::DS1;
  TargetMethod target = TargetMethod::log_returns;
  features::FactoryConfig factory;
  gbdt::BoostParams base_params;  // fields the search does not draw
  cv::SearchSpace space;
  cv::Objective objective = cv::Objective::training_loss;
  int trials = 25;
  std::uint64_t seed = 7;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::string out_dir = "tsgbm-out";

  unsigned worker_threads() const {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
  }

  void validate() const {
    if (transforms::is_standardized(target) && !features::is_standardized(dataset))
      throw Error(Errc::incompatible_config, "target '" + std::string(transforms::target_method_name(target)) +
                                                 "' is standardized and needs DS2 or DS4, got " +
                                                 std::string(features::dataset_name(dataset)));
    if (trials < 1) throw Error(Errc::invalid_argument, "trials must be >= 1");
    factory.indicators.validate();
    base_params.validate();
  }
};

// ------------------------------------------------------------ configuration

/// Keys mirror the CLI flags with underscores. Absent keys keep `cfg` values.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig cfg = {}) {
  auto str = [&](const char* k, auto&& apply) {
    if (j.contains(k)) apply(j.at(k).get<std::string>());
  };
  str("data", [&](const std::string& v) { cfg.data_path = v; });
  str("dataset", [&](const std::string& v) { cfg.dataset = features::parse_dataset(v); });
  str("target_transform", [&](const std::string& v) { cfg.target = transforms::parse_target_method(v); });
  str("out", [&](const std::string& v) { cfg.out_dir = v; });
  str("objective", [&](const std::string& v) {
    if (v == "mae") cfg.objective = cv::Objective::mae;
    else if (v == "training_loss") cfg.objective = cv::Objective::training_loss;
    else throw Error(Errc::invalid_argument, "objective must be training_loss or mae");
  });
  if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<unsigned>();
  if (j.contains("full_stats")) cfg.factory.full_stats = j.at("full_stats").get<bool>();
  if (j.contains("allow_nonstationary")) cfg.factory.allow_nonstationary = j.at("allow_nonstationary").get<bool>();
  if (j.contains("stationarity_gate")) cfg.factory.gate = j.at("stationarity_gate").get<bool>();
  if (j.contains("holdout_fraction")) cfg.factory.holdout_fraction = j.at("holdout_fraction").get<double>();
  if (j.contains("params")) cfg.base_params = gbdt::params_from_json(j.at("params"), cfg.base_params);
  if (j.contains("indicators")) {
    const auto& ij = j.at("indicators");
    auto& ip = cfg.factory.indicators;
    for (auto [key, field] : {std::pair{"rsi", &ip.rsi_n}, {"cmo", &ip.cmo_n}, {"atr", &ip.atr_n},
                              {"stoch_k", &ip.stoch_k_n}, {"stoch_d", &ip.stoch_d_n}, {"cci", &ip.cci_n},
                              {"roc", &ip.roc_n}, {"psy", &ip.psy_n}, {"macd_fast", &ip.macd_fast},
                              {"macd_slow", &ip.macd_slow}, {"macd_signal", &ip.macd_signal},
                              {"chaikin_ema", &ip.chaikin_ema_n}, {"chaikin_roc", &ip.chaikin_roc_n},
                              {"ema", &ip.ema_n}}) {
      if (ij.contains(key)) *field = ij.at(key).get<int>();
    }
  }
  if (j.contains("features")) {
    const auto& fj = j.at("features");
    auto& f = cfg.factory;
    if (fj.contains("lags")) f.lags = fj.at("lags").get<std::vector<int>>();
    if (fj.contains("rolling_window")) f.rolling_window = fj.at("rolling_window").get<int>();
    if (fj.contains("slope_period")) f.slope_period = fj.at("slope_period").get<int>();
    if (fj.contains("zigzag_threshold")) f.zigzag_threshold = fj.at("zigzag_threshold").get<double>();
    if (fj.contains("outlier_families"))
      f.outlier_families = fj.at("outlier_families").get<std::vector<std::string>>();
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path, RunConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path);
  try {
    return config_from_json(nlohmann::json::parse(in), std::move(cfg));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, path + ": " + e.what());
  }
}

inline constexpr const char* kEnvPrefix = "TSGBM_";

/// TSGBM_DATA, TSGBM_DATASET, TSGBM_TARGET_TRANSFORM, TSGBM_TRIALS, TSGBM_SEED,
/// TSGBM_OUT, TSGBM_THREADS. `getenv` is injectable for tests.
inline RunConfig apply_env(RunConfig cfg,
                           const std::function<const char*(const char*)>& getenv = [](const char* k) {
                             return std::getenv(k);
                           }) {
  nlohmann::json j = nlohmann::json::object();
  auto take = [&](const char* suffix, const char* key, bool numeric) {
    const std::string name = std::string(kEnvPrefix) + suffix;
    const char* v = getenv(name.c_str());
    if (!v || !*v) return;
    if (!numeric) {
      j[key] = v;
      return;
    }
    try {
      j[key] = std::stoull(v);
    } catch (const std::exception&) {
      throw Error(Errc::invalid_argument, name + " must be a non-negative integer");
    }
  };
  take("DATA", "data", false);
  take("DATASET", "dataset", false);
  take("TARGET_TRANSFORM", "target_transform", false);
  take("OUT", "out", false);
  take("TRIALS", "trials", true);
  take("SEED", "seed", true);
  take("THREADS", "threads", true);
  return config_from_json(j, std::move(cfg));
}

// -------------------------------------------------------------- preparation

/// Everything the learner sees, restricted to the dataset's usable rows.
struct Prepared {
  features::Dataset dataset;
  transforms::TransformSpec spec;
  gbdt::FeatureTable x;
  std::vector<double> y;
  std::vector<double> actual;  // close
  std::vector<transforms::PriceContext> context;
  std::vector<Date> dates;
  cv::SplitPlan plan;  // row numbers relative to the usable range
};

inline gbdt::FeatureTable feature_table(const Frame& f, transforms::RowRange rows) {
  gbdt::FeatureTable t;
  for (const auto& c : f.columns()) {
    t.names.push_back(c.name);
    t.columns.emplace_back(c.values.begin() + rows.begin, c.values.begin() + rows.end);
  }
  return t;
}

inline Prepared prepare(const Frame& base, DatasetId id, TargetMethod target, const features::FactoryConfig& fc) {
  Prepared p;
  p.dataset = features::assemble_dataset(id, base, fc);
  const auto usable = p.dataset.usable;
  p.x = feature_table(p.dataset.features, usable);
  p.plan = cv::make_splits(usable.size(), fc.holdout_fraction);
  cv::check_plan(p.plan);

  p.spec.kind = transforms::base_kind(target);
  p.spec.ema_period = fc.indicators.ema_n;
  const auto& px = p.dataset.prices;
  std::vector<double> raw;
  for (std::size_t t = usable.begin; t < usable.end; ++t) {
    const transforms::PriceContext ctx{px.closeprev[t], px.ema[t]};
    p.context.push_back(ctx);
    p.actual.push_back(px.close[t]);
    p.dates.push_back(base.index()[t]);
    raw.push_back(transforms::transform_price(px.close[t], ctx, p.spec.kind));
  }
  const transforms::RowRange fit =
      fc.full_stats ? transforms::RowRange{0, raw.size()} : p.plan.holdout_train;
  p.spec.fitted_on = {usable.begin + fit.begin, usable.begin + fit.end};
  if (transforms::is_standardized(target)) {
    p.spec.standardized = true;
    p.spec.stats = transforms::standardize_fit(Series("target", raw), fit);
    for (double& v : raw) v = (v - p.spec.stats.mean) / p.spec.stats.std;
  }
  p.y = std::move(raw);
  p.spec.validate();
  return p;
}

inline Prepared prepare(const RunConfig& cfg, const Frame& base) {
  cfg.validate();
  return prepare(base, cfg.dataset, cfg.target, cfg.factory);
}

// ---------------------------------------------------- tuning and training

inline cv::SearchResult tune(const Prepared& p, const RunConfig& cfg) {
  return cv::run_search(p.x, p.y, p.plan, cfg.trials, cfg.seed, cfg.base_params, cfg.space, cfg.objective,
                        cfg.worker_threads());
}

struct Trained {
  gbdt::BoostedModel model;
  double seconds = 0.0;
};

/// Refits on the whole holdout-training region; only this call is timed.
inline Trained final_train(const Prepared& p, gbdt::BoostParams params) {
  const auto xt = cv::slice_rows(p.x, p.plan.holdout_train);
  const std::span<const double> yt(p.y.data() + p.plan.holdout_train.begin, p.plan.holdout_train.size());
  const auto t0 = std::chrono::steady_clock::now();
  Trained out;
  out.model = gbdt::train(xt, yt, params);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.model.target_spec = p.spec;
  return out;
}

inline gbdt::BoostParams refit_params(const cv::SearchResult& r) {
  const auto& best = r.trials[r.best];
  gbdt::BoostParams p = best.params;
  p.num_iterations = cv::refit_rounds(best);
  return p;
}

inline evaluation::ScoredRange test_range(const Prepared& p, const gbdt::BoostedModel& m) {
  const auto r = p.plan.holdout_test;
  const auto xt = cv::slice_rows(p.x, r);
  evaluation::ScoredRange s;
  s.transformed_pred = gbdt::predict(m, xt);
  for (std::size_t i = r.begin; i < r.end; ++i) {
    s.dates.push_back(p.dates[i]);
    s.actual_price.push_back(p.actual[i]);
    s.context.push_back(p.context[i]);
  }
  return s;
}

inline nlohmann::ordered_json pipeline_json(const RunConfig& cfg, const Prepared& p) {
  return {{"dataset", std::string(features::dataset_name(cfg.dataset))},
          {"target_transform", std::string(transforms::target_method_name(cfg.target))},
          {"full_stats", cfg.factory.full_stats},
          {"holdout_fraction", cfg.factory.holdout_fraction},
          {"usable_rows", {p.dataset.usable.begin, p.dataset.usable.end}},
          {"trials", cfg.trials},
          {"seed", cfg.seed}};
}

/// Rebuilds the run configuration recorded in a model's pipeline block.
inline RunConfig config_from_pipeline(const nlohmann::json& pj, RunConfig cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const char* k : {"dataset", "target_transform", "full_stats", "holdout_fraction"})
    if (pj.contains(k)) j[k] = pj.at(k);
  return config_from_json(j, std::move(cfg));
}

// ------------------------------------------------------------------ runs

struct RunResult {
  cv::SearchResult search;
  Trained trained;
  evaluation::EvalReport report;
  double tune_seconds = 0.0;
};

inline void write_text(const std::filesystem::path& path, const std::string& s) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << s;
}

/// Tune, refit, evaluate and write ledger.csv, best_params.json, model.json and
/// the report files into `dir`.
inline RunResult run_one(const RunConfig& cfg, const Frame& base, const std::filesystem::path& dir,
                         std::optional<evaluation::BenchmarkMetrics> bench = std::nullopt) {
  const Prepared p = prepare(cfg, base);
  RunResult r;
  const auto t0 = std::chrono::steady_clock::now();
  r.search = tune(p, cfg);
  r.tune_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.trained = final_train(p, refit_params(r.search));
  r.report = evaluation::build_report(test_range(p, r.trained.model), p.spec,
                                      gbdt::feature_importance(r.trained.model), r.trained.seconds, bench);

  std::filesystem::create_directories(dir);
  {
    std::ofstream ledger(dir / "ledger.csv", std::ios::binary);
    if (!ledger) throw Error(Errc::io, "cannot write " + (dir / "ledger.csv").string());
    cv::write_ledger(ledger, r.search);
  }
  write_text(dir / "best_params.json", gbdt::params_to_json(refit_params(r.search)).dump(2) + "\n");
  gbdt::save(r.trained.model, (dir / "model.json").string(), pipeline_json(cfg, p));
  evaluation::write_report(r.report, dir);
  return r;
}

struct MatrixEntry {
  std::string method;
  DatasetId dataset;
  TargetMethod target;
};

/// The nine configurations of the test matrix, benchmark rows last.
inline std::vector<MatrixEntry> matrix_entries() {
  using D = DatasetId;
  using T = TargetMethod;
  return {{"Log Returns", D::DS1, T::log_returns},
          {"Standardized Log Returns", D::DS2, T::std_log_returns},
          {"Returns", D::DS1, T::returns},
          {"Standardized Returns", D::DS2, T::std_returns},
          {"EMA Ratio", D::DS1, T::ema_ratio},
          {"Standardized EMA Ratio", D::DS2, T::std_ema_ratio},
          {"EMA Difference Ratio", D::DS1, T::ema_diff_ratio},
          {"Benchmark (Log Returns)", D::DS3, T::log_returns},
          {"Benchmark (Standardized Log Returns)", D::DS4, T::std_log_returns}};
}

struct MatrixRow {
  std::string method;
  std::string dataset;
  std::string target;
  double train_seconds = 0.0;
  double tune_seconds = 0.0;
  double da = 0.0, mae = 0.0, rmse = 0.0;
  std::optional<evaluation::RelativeBlock> vs_rw, vs_benchmark;
  double efficiency = 0.0;
};

/// Runs every configuration into its own subdirectory and writes summary.csv
/// (method, train time, DA, MAE, RMSE, ...) plus a Random Walk row. The
/// benchmark rows run first so the others can report relative figures.
inline std::vector<MatrixRow> run_matrix(const RunConfig& cfg, const Frame& base,
                                         const std::function<void(const std::string&)>& progress = {}) {
  const auto entries = matrix_entries();
  std::vector<std::size_t> order{7, 8, 0, 1, 2, 3, 4, 5, 6};
  std::vector<std::optional<RunResult>> results(entries.size());
  std::optional<evaluation::BenchmarkMetrics> bench;
  const std::filesystem::path root(cfg.out_dir);
  for (std::size_t i : order) {
    const auto& e = entries[i];
    if (progress) progress(e.method);
    RunConfig c = cfg;
    c.dataset = e.dataset;
    c.target = e.target;
    const std::string sub = std::string(features::dataset_name(e.dataset)) + "_" +
                            std::string(transforms::target_method_name(e.target));
    results[i] = run_one(c, base, root / sub, i == 7 ? std::nullopt : bench);
    if (i == 7) bench = evaluation::BenchmarkMetrics{results[i]->report.da, results[i]->report.mae,
                                                     results[i]->report.rmse};
  }

  std::vector<MatrixRow> rows;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& r = *results[i];
    MatrixRow row{entries[i].method,
                  std::string(features::dataset_name(entries[i].dataset)),
                  std::string(transforms::target_method_name(entries[i].target)),
                  r.trained.seconds,
                  r.tune_seconds,
                  r.report.da,
                  r.report.mae,
                  r.report.rmse,
                  r.report.vs_rw,
                  r.report.vs_benchmark,
                  r.report.efficiency};
    rows.push_back(std::move(row));
  }
  const auto& any = results[0]->report;
  MatrixRow rw;
  rw.method = "Random Walk";
  rw.da = any.rw_da;
  rw.mae = any.rw_mae;
  rw.rmse = any.rw_rmse;
  rows.push_back(rw);

  std::filesystem::create_directories(root);
  std::ofstream out(root / "summary.csv", std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write summary.csv");
  out << "method,dataset,target_transform,train_seconds,tune_seconds,da,mae,rmse,"
         "da_vs_rw_pct,mae_vs_rw_pct,rmse_vs_rw_pct,da_vs_benchmark_pct,mae_vs_benchmark_pct,"
         "rmse_vs_benchmark_pct,efficiency\n";
  auto num = [](double v) { return text::format_double(v); };
  for (const auto& r : rows) {
    const bool is_rw = r.method == "Random Walk";
    out << '"' << r.method << "\"," << r.dataset << ',' << r.target << ',' << (is_rw ? "" : num(r.train_seconds))
        << ',' << (is_rw ? "" : num(r.tune_seconds)) << ',' << num(r.da) << ',' << num(r.mae) << ',' << num(r.rmse);
    for (const auto& blk : {r.vs_rw, r.vs_benchmark}) {
      if (blk) out << ',' << num(blk->da) << ',' << num(blk->mae) << ',' << num(blk->rmse);
      else out << ",,,";
    }
    out << ',' << (is_rw ? "" : num(r.efficiency)) << '\n';
  }
  return rows;
}

}  // namespace tsgbm::pipeline
