#pragma once

// Rolling-origin splits and seeded random hyperparameter search.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "tsgbm/error.hpp"
#include "tsgbm/gbdt.hpp"
#include "tsgbm/rng.hpp"
#include "tsgbm/transforms.hpp"

namespace tsgbm::cv {

using transforms::RowRange;

struct Fold {
  RowRange train;
  RowRange validation;
};

struct SplitPlan {
  RowRange holdout_train;
  RowRange holdout_test;
  std::vector<Fold> folds;
};

inline constexpr double kHoldoutFraction = 0.8;
inline constexpr std::size_t kSegments = 4;

/// Holdout at floor(0.8 n). The training region is cut into four equal
/// contiguous segments (remainder to the last); fold k trains on segments
/// 1..k and validates on segment k+1.
inline SplitPlan make_splits(std::size_t n_rows, double holdout_fraction = kHoldoutFraction) {
  if (n_rows < 20) throw Error(Errc::insufficient_data, "make_splits needs >= 20 rows");
  SplitPlan plan;
  const auto h = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(n_rows)));
  plan.holdout_train = {0, h};
  plan.holdout_test = {h, n_rows};
  const std::size_t seg = h / kSegments;
  for (std::size_t k = 1; k < kSegments; ++k) {
    const std::size_t train_end = k * seg;
    const std::size_t valid_end = (k + 1 == kSegments) ? h : (k + 1) * seg;
    plan.folds.push_back({{0, train_end}, {train_end, valid_end}});
  }
  return plan;
}

/// Throws unless every fold trains strictly before it validates, inside the
/// holdout training region.
inline void check_plan(const SplitPlan& plan) {
  for (const auto& f : plan.folds) {
    if (f.train.size() == 0 || f.validation.size() == 0)
      throw Error(Errc::invariant, "split plan has an empty fold range");
    if (f.train.end > f.validation.begin) throw Error(Errc::invariant, "fold validates before it trains");
    if (f.validation.end > plan.holdout_train.end || f.train.begin < plan.holdout_train.begin)
      throw Error(Errc::invariant, "fold leaves the holdout training region");
  }
  if (plan.holdout_train.end != plan.holdout_test.begin) throw Error(Errc::invariant, "holdout ranges not contiguous");
}

// -------------------------------------------------------------------- search

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct LogRange {
  double lo = 1.0;
  double hi = 1.0;
};

/// Integer ranges are sampled uniformly; LogRange entries log-uniformly.
struct SearchSpace {
  IntRange num_iterations{500, 2200};
  LogRange learning_rate{1e-5, 0.02};
  IntRange num_leaves{10, 80};
  IntRange max_depth{-1, 30};
  LogRange lambda_l1{1e-8, 1e-3};
  LogRange lambda_l2{1e-6, 10.0};
  IntRange max_bin{125, 750};

  bool contains(const gbdt::BoostParams& p) const {
    auto in = [](auto v, auto r) { return v >= r.lo && v <= r.hi; };
    return in(p.num_iterations, num_iterations) && in(p.learning_rate, learning_rate) &&
           in(p.num_leaves, num_leaves) && in(p.max_depth, max_depth) && in(p.lambda_l1, lambda_l1) &&
           in(p.lambda_l2, lambda_l2) && in(p.max_bin, max_bin);
  }
};

/// Draws the searched fields; the rest are copied from `base`.
inline gbdt::BoostParams sample_params(const SearchSpace& space, Rng& rng, gbdt::BoostParams base = {}) {
  auto clamp_log = [](double v, LogRange r) { return std::clamp(v, r.lo, r.hi); };
  base.num_iterations = static_cast<int>(rng.uniform_int(space.num_iterations.lo, space.num_iterations.hi));
  base.learning_rate = clamp_log(rng.log_uniform(space.learning_rate.lo, space.learning_rate.hi), space.learning_rate);
  base.num_leaves = static_cast<int>(rng.uniform_int(space.num_leaves.lo, space.num_leaves.hi));
  base.max_depth = static_cast<int>(rng.uniform_int(space.max_depth.lo, space.max_depth.hi));
  base.lambda_l1 = clamp_log(rng.log_uniform(space.lambda_l1.lo, space.lambda_l1.hi), space.lambda_l1);
  base.lambda_l2 = clamp_log(rng.log_uniform(space.lambda_l2.lo, space.lambda_l2.hi), space.lambda_l2);
  base.max_bin = static_cast<int>(rng.uniform_int(space.max_bin.lo, space.max_bin.hi));
  return base;
}

enum class Objective { training_loss, mae };

struct Trial {
  gbdt::BoostParams params;
  std::vector<double> fold_losses;
  std::vector<int> fold_best_iterations;
  double mean_loss = std::numeric_limits<double>::infinity();
  double seconds = 0.0;
  bool failed = false;
  std::string error;
};

struct SearchResult {
  std::size_t best = 0;
  std::vector<Trial> trials;
  std::vector<double> best_so_far;  // per trial index
};

inline gbdt::FeatureTable slice_rows(const gbdt::FeatureTable& x, RowRange r) {
  gbdt::FeatureTable out;
  out.names = x.names;
  out.columns.reserve(x.cols());
  for (const auto& c : x.columns) out.columns.emplace_back(c.begin() + r.begin, c.begin() + r.end);
  return out;
}

inline double objective_value(const gbdt::BoostedModel& m, const gbdt::FeatureTable& xv, std::span<const double> yv,
                              Objective obj) {
  const auto pred = gbdt::predict(m, xv);
  if (obj == Objective::training_loss) return gbdt::mean_power_loss(pred, yv, m.params.loss_power);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - yv[i]);
  return s / static_cast<double>(pred.size());
}

inline void evaluate_trial(Trial& trial, const gbdt::FeatureTable& x, std::span<const double> y,
                           const SplitPlan& plan, Objective obj) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    double sum = 0.0;
    for (const auto& fold : plan.folds) {
      const auto xt = slice_rows(x, fold.train);
      const auto xv = slice_rows(x, fold.validation);
      const auto yt = y.subspan(fold.train.begin, fold.train.size());
      const auto yv = y.subspan(fold.validation.begin, fold.validation.size());
      gbdt::TrainLog log;
      const auto model = gbdt::train(xt, yt, trial.params, &xv, yv, &log);
      const double loss = objective_value(model, xv, yv, obj);
      trial.fold_losses.push_back(loss);
      trial.fold_best_iterations.push_back(log.best_iteration);
      sum += loss;
    }
    trial.mean_loss = sum / static_cast<double>(plan.folds.size());
    if (!std::isfinite(trial.mean_loss)) throw Error(Errc::domain, "non-finite fold loss");
  } catch (const std::exception& e) {
    trial.failed = true;
    trial.error = e.what();
    trial.mean_loss = std::numeric_limits<double>::infinity();
  }
  trial.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Draws every trial's parameters up front from `seed`, evaluates them (in
/// parallel when threads > 1) and picks the lowest mean fold loss, ties to
/// the earlier trial. Only rows inside plan.holdout_train are ever read.
inline SearchResult run_search(const gbdt::FeatureTable& x, std::span<const double> y, const SplitPlan& plan,
                               int n_trials, std::uint64_t seed, const gbdt::BoostParams& base = {},
                               const SearchSpace& space = {}, Objective obj = Objective::training_loss,
                               unsigned threads = 1) {
  if (n_trials < 1) throw Error(Errc::invalid_argument, "run_search needs n_trials >= 1");
  check_plan(plan);
  if (y.size() != x.rows()) throw Error(Errc::misaligned, "run_search: target length differs from rows");
  const auto train_x = slice_rows(x, plan.holdout_train);
  const auto train_y = y.subspan(plan.holdout_train.begin, plan.holdout_train.size());

  SearchResult res;
  Rng rng(seed);
  res.trials.resize(static_cast<std::size_t>(n_trials));
  for (std::size_t i = 0; i < res.trials.size(); ++i) {
    res.trials[i].params = sample_params(space, rng, base);
    res.trials[i].params.seed = gbdt::mix_seed(seed, 1'000'000 + i);
  }

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_trials)));
  if (workers == 1) {
    for (auto& t : res.trials) evaluate_trial(t, train_x, train_y, plan, obj);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < res.trials.size(); i += workers)
          evaluate_trial(res.trials[i], train_x, train_y, plan, obj);
      });
    }
    for (auto& th : pool) th.join();
  }

  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < res.trials.size(); ++i) {
    const auto& t = res.trials[i];
    if (!t.failed && t.mean_loss < best) {
      best = t.mean_loss;
      res.best = i;
      any = true;
    }
    res.best_so_far.push_back(best);
  }
  if (!any) throw Error(Errc::search_failed, "all " + std::to_string(n_trials) + " trials failed: " + res.trials[0].error);
  return res;
}

/// Rounds for the final refit: mean of the per-fold early-stopping optima (at least 1).
inline int refit_rounds(const Trial& t) {
  if (t.fold_best_iterations.empty()) return t.params.num_iterations;
  double s = 0.0;
  for (int v : t.fold_best_iterations) s += v;
  return std::max(1, static_cast<int>(std::lround(s / static_cast<double>(t.fold_best_iterations.size()))));
}

/// One row per trial. `with_seconds = false` drops the wall-time column so the
/// file is reproducible byte for byte.
inline void write_ledger(std::ostream& out, const SearchResult& r, bool with_seconds = true) {
  out << "trial,num_iterations,learning_rate,num_leaves,max_depth,lambda_l1,lambda_l2,max_bin";
  std::size_t folds = 0;
  for (const auto& t : r.trials) folds = std::max(folds, t.fold_losses.size());
  for (std::size_t k = 0; k < folds; ++k) out << ",fold" << k + 1 << "_loss";
  for (std::size_t k = 0; k < folds; ++k) out << ",fold" << k + 1 << "_best_iter";
  out << ",mean_loss,best_so_far,status";
  if (with_seconds) out << ",seconds";
  out << '\n';
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    const auto& t = r.trials[i];
    const auto& p = t.params;
    out << i << ',' << p.num_iterations << ',' << text::format_double(p.learning_rate) << ',' << p.num_leaves << ','
        << p.max_depth << ',' << text::format_double(p.lambda_l1) << ',' << text::format_double(p.lambda_l2) << ','
        << p.max_bin;
    for (std::size_t k = 0; k < folds; ++k)
      out << ',' << (k < t.fold_losses.size() ? text::format_double(t.fold_losses[k]) : "");
    for (std::size_t k = 0; k < folds; ++k)
      out << ',' << (k < t.fold_best_iterations.size() ? std::to_string(t.fold_best_iterations[k]) : "");
    out << ',' << text::format_double(t.mean_loss) << ',' << text::format_double(r.best_so_far[i]) << ','
        << (t.failed ? "failed" : "ok");
    if (with_seconds) out << ',' << text::format_double(t.seconds);
    out << '\n';
  }
}

}  // namespace tsgbm::cv
