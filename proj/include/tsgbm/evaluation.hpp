#pragma once

// Error metrics, directional accuracy, the random-walk benchmark, relative
// improvement arithmetic and report emission.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsgbm/error.hpp"
#include "tsgbm/gbdt.hpp"
#include "tsgbm/series_core.hpp"
#include "tsgbm/transforms.hpp"

namespace tsgbm::evaluation {

namespace detail {

inline void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw Error(Errc::misaligned, std::string(what) + ": length mismatch");
  if (a.empty()) throw Error(Errc::insufficient_data, std::string(what) + ": empty input");
}

inline int sign(double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

}  // namespace detail

/// Mean absolute error over pairs where both values are defined.
inline double mae(std::span<const double> pred, std::span<const double> actual) {
  detail::check_pair(pred, actual, "mae");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!is_defined(pred[i]) || !is_defined(actual[i])) continue;
    s += std::abs(pred[i] - actual[i]);
    ++n;
  }
  if (n == 0) throw Error(Errc::insufficient_data, "mae: no defined pairs");
  return s / static_cast<double>(n);
}

inline double rmse(std::span<const double> pred, std::span<const double> actual) {
  detail::check_pair(pred, actual, "rmse");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!is_defined(pred[i]) || !is_defined(actual[i])) continue;
    const double d = pred[i] - actual[i];
    s += d * d;
    ++n;
  }
  if (n == 0) throw Error(Errc::insufficient_data, "rmse: no defined pairs");
  return std::sqrt(s / static_cast<double>(n));
}

/// Fraction of rows where sign(pred - prior) == sign(actual - prior); zero
/// counts as its own sign.
inline double directional_accuracy(std::span<const double> pred, std::span<const double> actual,
                                   std::span<const double> prior) {
  detail::check_pair(pred, actual, "directional_accuracy");
  detail::check_pair(pred, prior, "directional_accuracy");
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!is_defined(pred[i]) || !is_defined(actual[i]) || !is_defined(prior[i])) continue;
    correct += detail::sign(pred[i] - prior[i]) == detail::sign(actual[i] - prior[i]) ? 1 : 0;
    ++total;
  }
  if (total == 0) throw Error(Errc::insufficient_data, "directional_accuracy: no defined rows");
  return static_cast<double>(correct) / static_cast<double>(total);
}

/// P_hat_t = P_{t-1}; the first entry is undefined.
inline std::vector<double> random_walk_forecast(std::span<const double> prices) {
  std::vector<double> out(prices.size(), kUndef);
  for (std::size_t i = 1; i < prices.size(); ++i) out[i] = prices[i - 1];
  return out;
}

/// The random walk's predicted change is identically zero; its directional
/// accuracy is reported as the coin-flip expectation of the noisy walk.
inline constexpr double kRandomWalkDa = 0.5;

enum class Sense { lower_is_better, higher_is_better };

/// Percent improvement of a model over the random walk.
inline double relative_improvement(double model, double rw, Sense sense = Sense::lower_is_better) {
  if (rw == 0.0) throw Error(Errc::domain, "relative_improvement: zero random-walk metric");
  const double delta = sense == Sense::lower_is_better ? rw - model : model - rw;
  return 100.0 * delta / rw;
}

/// Percent change of the model's margin over the random walk relative to the
/// benchmark's margin over the random walk.
inline double relative_vs_benchmark(double model, double bench, double rw, Sense sense = Sense::lower_is_better) {
  const double m = sense == Sense::lower_is_better ? rw - model : model - rw;
  const double b = sense == Sense::lower_is_better ? rw - bench : bench - rw;
  if (b == 0.0) throw Error(Errc::domain, "relative_vs_benchmark: benchmark equals random walk");
  return 100.0 * (m - b) / b;
}

/// MAE^2 * seconds; lower is better.
inline double training_efficiency(double mae_value, double seconds) {
  if (mae_value < 0.0 || seconds < 0.0) throw Error(Errc::invalid_argument, "training_efficiency: negative input");
  return mae_value * mae_value * seconds;
}

struct RelativeBlock {
  double da = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
};

struct EvalReport {
  double mae = 0.0;
  double rmse = 0.0;
  double da = 0.0;
  double train_seconds = 0.0;
  double rw_mae = 0.0;
  double rw_rmse = 0.0;
  double rw_da = kRandomWalkDa;
  double rw_da_strict = 0.0;
  RelativeBlock vs_rw;
  std::optional<RelativeBlock> vs_benchmark;
  double efficiency = 0.0;
  std::vector<Date> dates;
  std::vector<double> actual;
  std::vector<double> predicted;
  std::vector<double> residuals;  // actual - predicted
  std::vector<gbdt::FeatureImportance> importance;
};

/// Inputs for one scored range. All vectors are aligned on the test rows.
struct ScoredRange {
  std::vector<Date> dates;
  std::vector<double> transformed_pred;
  std::vector<double> actual_price;
  std::vector<transforms::PriceContext> context;
};

/// Benchmark metrics for the vs-benchmark block.
struct BenchmarkMetrics {
  double da = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
};

/// Inverts predictions to prices and scores model and random walk on the same rows.
inline EvalReport build_report(const ScoredRange& in, const transforms::TransformSpec& spec,
                               std::vector<gbdt::FeatureImportance> importance, double train_seconds,
                               std::optional<BenchmarkMetrics> bench = std::nullopt) {
  const std::size_t n = in.transformed_pred.size();
  if (in.actual_price.size() != n || in.context.size() != n || in.dates.size() != n)
    throw Error(Errc::misaligned, "build_report: inputs not aligned");
  if (n == 0) throw Error(Errc::insufficient_data, "build_report: empty test range");
  EvalReport r;
  r.dates = in.dates;
  r.actual = in.actual_price;
  std::vector<double> prior(n), rw(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.predicted.push_back(transforms::invert_target(in.transformed_pred[i], in.context[i], spec));
    r.residuals.push_back(in.actual_price[i] - r.predicted.back());
    prior[i] = in.context[i].prior_price;
    rw[i] = prior[i];  // random walk on exactly the same rows
  }
  r.mae = mae(r.predicted, r.actual);
  r.rmse = rmse(r.predicted, r.actual);
  r.da = directional_accuracy(r.predicted, r.actual, prior);
  r.rw_mae = mae(rw, r.actual);
  r.rw_rmse = rmse(rw, r.actual);
  r.rw_da_strict = directional_accuracy(rw, r.actual, prior);
  r.vs_rw = {relative_improvement(r.da, r.rw_da, Sense::higher_is_better), relative_improvement(r.mae, r.rw_mae),
             relative_improvement(r.rmse, r.rw_rmse)};
  if (bench) {
    r.vs_benchmark = RelativeBlock{relative_vs_benchmark(r.da, bench->da, r.rw_da, Sense::higher_is_better),
                                   relative_vs_benchmark(r.mae, bench->mae, r.rw_mae),
                                   relative_vs_benchmark(r.rmse, bench->rmse, r.rw_rmse)};
  }
  r.train_seconds = train_seconds;
  r.efficiency = training_efficiency(r.mae, train_seconds);
  r.importance = std::move(importance);
  return r;
}

/// Deterministic summary (no wall-clock fields).
inline nlohmann::ordered_json report_summary(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["rows"] = r.actual.size();
  j["first_date"] = format_date(r.dates.front());
  j["last_date"] = format_date(r.dates.back());
  j["model"] = {{"da", r.da}, {"mae", r.mae}, {"rmse", r.rmse}};
  j["random_walk"] = {{"da", r.rw_da}, {"da_strict", r.rw_da_strict}, {"mae", r.rw_mae}, {"rmse", r.rw_rmse}};
  j["relative_vs_random_walk_pct"] = {{"da", r.vs_rw.da}, {"mae", r.vs_rw.mae}, {"rmse", r.vs_rw.rmse}};
  if (r.vs_benchmark)
    j["relative_vs_benchmark_pct"] = {
        {"da", r.vs_benchmark->da}, {"mae", r.vs_benchmark->mae}, {"rmse", r.vs_benchmark->rmse}};
  return j;
}

/// Writes residuals.csv, importance.csv, report.json and timing.json into dir.
inline void write_report(const EvalReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("residuals.csv");
    out << "date,actual,predicted,residual\n";
    for (std::size_t i = 0; i < r.actual.size(); ++i)
      out << format_date(r.dates[i]) << ',' << text::format_double(r.actual[i]) << ','
          << text::format_double(r.predicted[i]) << ',' << text::format_double(r.residuals[i]) << '\n';
  }
  {
    auto out = open("importance.csv");
    out << "feature,split_count,gain\n";
    for (const auto& fi : r.importance)
      out << fi.feature << ',' << fi.split_count << ',' << text::format_double(fi.gain) << '\n';
  }
  open("report.json") << report_summary(r).dump(2) << '\n';
  nlohmann::ordered_json timing{{"train_seconds", r.train_seconds}, {"efficiency_mae2_seconds", r.efficiency}};
  open("timing.json") << timing.dump(2) << '\n';
}

/// build_report followed by write_report.
inline EvalReport emit_report(const ScoredRange& in, const transforms::TransformSpec& spec,
                              std::vector<gbdt::FeatureImportance> importance, double train_seconds,
                              const std::filesystem::path& dir,
                              std::optional<BenchmarkMetrics> bench = std::nullopt) {
  EvalReport r = build_report(in, spec, std::move(importance), train_seconds, bench);
  write_report(r, dir);
  return r;
}

}  // namespace tsgbm::evaluation
