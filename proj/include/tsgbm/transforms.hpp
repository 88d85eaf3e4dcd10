#pragma once

// Stationarity transforms, IQR root-compression of outliers, standardization,
// and exact inversion of target transforms back to prices.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsgbm/error.hpp"
#include "tsgbm/indicators.hpp"
#include "tsgbm/series_core.hpp"

namespace tsgbm::transforms {

enum class Kind { returns, log_returns, cbrt_returns, ema_ratio, ema_diff_ratio };

constexpr std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::returns: return "returns";
    case Kind::log_returns: return "log_returns";
    case Kind::cbrt_returns: return "cbrt_returns";
    case Kind::ema_ratio: return "ema_ratio";
    case Kind::ema_diff_ratio: return "ema_diff_ratio";
  }
  return "?";
}

inline Kind parse_kind(std::string_view s) {
  for (Kind k : {Kind::returns, Kind::log_returns, Kind::cbrt_returns, Kind::ema_ratio, Kind::ema_diff_ratio}) {
    if (kind_name(k) == s) return k;
  }
  throw Error(Errc::invalid_argument, "unknown transform kind '" + std::string(s) + "'");
}

/// Half-open row range.
struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

struct StandardStats {
  double mean = 0.0;
  double std = 1.0;
};

struct TransformSpec {
  Kind kind = Kind::returns;
  bool standardized = false;
  StandardStats stats;
  int ema_period = 14;
  RowRange fitted_on;

  void validate() const {
    if (ema_period < 2) throw Error(Errc::invalid_argument, "ema_period must be >= 2");
    if (standardized && !(stats.std > 0.0)) throw Error(Errc::zero_variance, "standardized spec needs std > 0");
  }
};

// ---------------------------------------------------------------- transforms

inline Series returns(const Series& x, std::string name = {}) {
  std::vector<double> v(x.size(), kUndef);
  for (std::size_t t = 1; t < x.size(); ++t) {
    if (x[t - 1] != 0.0) v[t] = x[t] / x[t - 1] - 1.0;
  }
  return Series(name.empty() ? x.name + "_ret" : std::move(name), std::move(v));
}

inline bool strictly_positive(const Series& x) {
  for (double v : x.values) {
    if (is_defined(v) && !(v > 0.0)) return false;
  }
  return true;
}

inline Series log_returns(const Series& x, std::string name = {}) {
  if (!strictly_positive(x))
    throw Error(Errc::domain, "log_returns: '" + x.name + "' has non-positive values; route to cbrt_returns");
  std::vector<double> v(x.size(), kUndef);
  for (std::size_t t = 1; t < x.size(); ++t) v[t] = std::log(x[t] / x[t - 1]);
  return Series(name.empty() ? x.name + "_logret" : std::move(name), std::move(v));
}

/// Difference of sign-preserving cube roots.
inline Series cbrt_returns(const Series& x, std::string name = {}) {
  std::vector<double> v(x.size(), kUndef);
  for (std::size_t t = 1; t < x.size(); ++t) v[t] = std::cbrt(x[t]) - std::cbrt(x[t - 1]);
  return Series(name.empty() ? x.name + "_cbrtret" : std::move(name), std::move(v));
}

/// x_t / EMA_n(closeprev)_t, given the EMA series.
inline Series ema_ratio_with(const Series& x, const Series& ema_ctx, std::string name = {}) {
  std::vector<double> v(x.size(), kUndef);
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (ema_ctx[t] != 0.0) v[t] = x[t] / ema_ctx[t];
  }
  return Series(name.empty() ? x.name + "_ema" : std::move(name), std::move(v));
}

/// (x_t - x_{t-1}) / EMA_n(closeprev)_t, given the EMA series.
inline Series ema_diff_ratio_with(const Series& x, const Series& ema_ctx, std::string name = {}) {
  std::vector<double> v(x.size(), kUndef);
  for (std::size_t t = 1; t < x.size(); ++t) {
    if (ema_ctx[t] != 0.0) v[t] = (x[t] - x[t - 1]) / ema_ctx[t];
  }
  return Series(name.empty() ? x.name + "_emadiff" : std::move(name), std::move(v));
}

inline Series ema_ratio(const Series& x, const Series& closeprev, int n = 14) {
  return ema_ratio_with(x, indicators::ema(closeprev, n));
}

inline Series ema_diff_ratio(const Series& x, const Series& closeprev, int n = 14) {
  return ema_diff_ratio_with(x, indicators::ema(closeprev, n));
}

// ----------------------------------------------------------- standardization

/// Mean and sample standard deviation over the defined values in range.
inline StandardStats standardize_fit(const Series& x, RowRange range) {
  range.end = std::min(range.end, x.size());
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    if (is_defined(x[i])) { sum += x[i]; ++n; }
  }
  if (n < 2) throw Error(Errc::zero_variance, "standardize: '" + x.name + "' has fewer than 2 values in fit range");
  const double mean = sum / n;
  double ss = 0.0;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    if (is_defined(x[i])) ss += (x[i] - mean) * (x[i] - mean);
  }
  const double sd = std::sqrt(ss / (n - 1));
  if (!(sd > 0.0)) throw Error(Errc::zero_variance, "standardize: '" + x.name + "' has zero variance");
  return {mean, sd};
}

inline Series standardize_apply(const Series& x, const StandardStats& s, std::string name = {}) {
  std::vector<double> v(x.size(), kUndef);
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = (x[i] - s.mean) / s.std;
  return Series(name.empty() ? x.name : std::move(name), std::move(v));
}

// ---------------------------------------------------------- outlier handling

enum class Root { square, cubic };

struct OutlierPolicy {
  std::vector<double> n_iqr{3.0};  // one fence multiplier per pass
  Root root = Root::square;

  std::size_t passes() const { return n_iqr.size(); }
  void validate() const {
    if (n_iqr.empty()) throw Error(Errc::invalid_argument, "outlier policy needs at least one pass");
    for (double n : n_iqr) {
      if (!(n > 0.0)) throw Error(Errc::invalid_argument, "outlier n_iqr must be > 0");
    }
  }
};

/// Quantile by linear interpolation between order statistics: h = (n - 1) q.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct Fences {
  double lower = 0.0;
  double upper = 0.0;
};

inline Fences iqr_fences(std::vector<double> values, double n_iqr) {
  if (values.size() < 4) throw Error(Errc::insufficient_data, "outlier fences need >= 4 defined values");
  std::sort(values.begin(), values.end());
  const double q1 = quantile_sorted(values, 0.25);
  const double q3 = quantile_sorted(values, 0.75);
  const double iqr = q3 - q1;
  return {q1 - n_iqr * iqr, q3 + n_iqr * iqr};
}

/// Root-compresses one value toward the fence it crossed; identity inside.
inline double compress_outlier(double v, const Fences& f, Root root) {
  if (!is_defined(v)) return v;
  auto r = [root](double d) { return root == Root::square ? std::sqrt(d) : std::cbrt(d); };
  if (v > f.upper) return r(v - f.upper + 1.0) - 1.0 + f.upper;
  if (v < f.lower) return -r(std::abs(v - f.lower) + 1.0) + 1.0 + f.lower;
  return v;
}

/// Quartiles are refit each pass on the defined values inside fit_range
/// (whole series when omitted) and the compression is applied to every row.
inline Series normalize_outliers(const Series& x, const OutlierPolicy& policy,
                                 std::optional<RowRange> fit_range = std::nullopt,
                                 std::vector<Fences>* fitted = nullptr) {
  policy.validate();
  RowRange range = fit_range.value_or(RowRange{0, x.size()});
  range.end = std::min(range.end, x.size());
  std::vector<double> v = x.values;
  for (double n : policy.n_iqr) {
    std::vector<double> sample;
    for (std::size_t i = range.begin; i < range.end; ++i) {
      if (is_defined(v[i])) sample.push_back(v[i]);
    }
    const Fences f = iqr_fences(std::move(sample), n);
    if (fitted) fitted->push_back(f);
    for (double& e : v) e = compress_outlier(e, f, policy.root);
  }
  return Series(x.name + "_oh", std::move(v));
}

// ------------------------------------------------------------ target methods

/// The seven target transformations compared across the test matrix.
enum class TargetMethod {
  returns,
  log_returns,
  ema_ratio,
  ema_diff_ratio,
  std_returns,
  std_log_returns,
  std_ema_ratio,
};

inline constexpr TargetMethod kAllTargetMethods[] = {
    TargetMethod::returns,     TargetMethod::log_returns,     TargetMethod::ema_ratio,
    TargetMethod::ema_diff_ratio, TargetMethod::std_returns, TargetMethod::std_log_returns,
    TargetMethod::std_ema_ratio};

constexpr std::string_view target_method_name(TargetMethod m) {
  switch (m) {
    case TargetMethod::returns: return "returns";
    case TargetMethod::log_returns: return "log_returns";
    case TargetMethod::ema_ratio: return "ema_ratio";
    case TargetMethod::ema_diff_ratio: return "ema_diff_ratio";
    case TargetMethod::std_returns: return "std_returns";
    case TargetMethod::std_log_returns: return "std_log_returns";
    case TargetMethod::std_ema_ratio: return "std_ema_ratio";
  }
  return "?";
}

inline TargetMethod parse_target_method(std::string_view s) {
  for (TargetMethod m : kAllTargetMethods) {
    if (target_method_name(m) == s) return m;
  }
  throw Error(Errc::invalid_argument, "unknown target transform '" + std::string(s) + "'");
}

constexpr bool is_standardized(TargetMethod m) {
  return m == TargetMethod::std_returns || m == TargetMethod::std_log_returns || m == TargetMethod::std_ema_ratio;
}

constexpr Kind base_kind(TargetMethod m) {
  switch (m) {
    case TargetMethod::returns:
    case TargetMethod::std_returns: return Kind::returns;
    case TargetMethod::log_returns:
    case TargetMethod::std_log_returns: return Kind::log_returns;
    case TargetMethod::ema_ratio:
    case TargetMethod::std_ema_ratio: return Kind::ema_ratio;
    case TargetMethod::ema_diff_ratio: return Kind::ema_diff_ratio;
  }
  return Kind::returns;
}

/// Information known before the target close prints.
struct PriceContext {
  double prior_price = kUndef;  // P_{t-1}, i.e. closeprev_t
  double ema = kUndef;          // EMA_n(closeprev)_t
};

/// Unstandardized transformed value of price given its context.
inline double transform_price(double price, const PriceContext& ctx, Kind kind) {
  switch (kind) {
    case Kind::returns: return price / ctx.prior_price - 1.0;
    case Kind::log_returns:
      if (!(price > 0.0) || !(ctx.prior_price > 0.0)) throw Error(Errc::domain, "log_returns needs positive prices");
      return std::log(price / ctx.prior_price);
    case Kind::cbrt_returns: return std::cbrt(price) - std::cbrt(ctx.prior_price);
    case Kind::ema_ratio: return price / ctx.ema;
    case Kind::ema_diff_ratio: return (price - ctx.prior_price) / ctx.ema;
  }
  return kUndef;
}

/// Maps a prediction in transformed space back to a price.
inline double invert_target(double pred, const PriceContext& ctx, const TransformSpec& spec) {
  const bool needs_ema = spec.kind == Kind::ema_ratio || spec.kind == Kind::ema_diff_ratio;
  const bool needs_prior = spec.kind != Kind::ema_ratio;
  if ((needs_ema && !is_defined(ctx.ema)) || (needs_prior && !is_defined(ctx.prior_price)))
    throw Error(Errc::invalid_argument, "invert_target: context missing for " + std::string(kind_name(spec.kind)));
  const double r = spec.standardized ? pred * spec.stats.std + spec.stats.mean : pred;
  switch (spec.kind) {
    case Kind::returns: return ctx.prior_price * (1.0 + r);
    case Kind::log_returns: return ctx.prior_price * std::exp(r);
    case Kind::cbrt_returns: {
      const double c = r + std::cbrt(ctx.prior_price);
      return c * c * c;
    }
    case Kind::ema_ratio: return r * ctx.ema;
    case Kind::ema_diff_ratio: return ctx.prior_price + r * ctx.ema;
  }
  return kUndef;
}

}  // namespace tsgbm::transforms
