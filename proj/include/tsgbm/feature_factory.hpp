#pragma once

// Feature generators (lags, rolling statistics, indicators, cyclical calendar
// terms, cross features, slope differences) and assembly of the four
// datasets: DS1 all features, DS2 standardized DS1, DS3 DS1 without the novel
// features, DS4 standardized DS3.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsgbm/error.hpp"
#include "tsgbm/indicators.hpp"
#include "tsgbm/series_core.hpp"
#include "tsgbm/stationarity.hpp"
#include "tsgbm/transforms.hpp"

namespace tsgbm::features {

using transforms::RowRange;

enum class Generator { base, lag, rolling, indicator, cyclical, cross, slope_diff_fixed, slope_diff_dynamic };

/// How a raw generator output becomes stationary.
enum class Treatment {
  level,       // trending or scale-bearing: returns, log/cbrt returns, EMA variants when price-like
  stationary,  // bounded or unit-free already: used as is
};

struct FeatureSpec {
  std::string base_name;
  Generator generator = Generator::base;
  Treatment treatment = Treatment::level;
  bool ema_eligible = false;  // price-like level or a difference of prices
  bool outlier_handled = false;
  bool novel = false;
  std::string transform;  // "", "ret", "logret", "cbrtret", "ema", "emadiff", "ret_oh"
};

enum class DatasetId { DS1, DS2, DS3, DS4 };

constexpr std::string_view dataset_name(DatasetId id) {
  switch (id) {
    case DatasetId::DS1: return "DS1";
    case DatasetId::DS2: return "DS2";
    case DatasetId::DS3: return "DS3";
    case DatasetId::DS4: return "DS4";
  }
  return "?";
}

inline DatasetId parse_dataset(std::string_view s) {
  for (DatasetId id : {DatasetId::DS1, DatasetId::DS2, DatasetId::DS3, DatasetId::DS4}) {
    if (dataset_name(id) == s) return id;
  }
  throw Error(Errc::invalid_argument, "unknown dataset '" + std::string(s) + "' (expected DS1..DS4)");
}

constexpr bool is_standardized(DatasetId id) { return id == DatasetId::DS2 || id == DatasetId::DS4; }
constexpr bool keeps_novel(DatasetId id) { return id == DatasetId::DS1 || id == DatasetId::DS2; }

struct FactoryConfig {
  indicators::IndicatorParams indicators;
  std::vector<int> lags{1, 5, 30};
  int rolling_window = 20;
  int slope_period = 14;
  double zigzag_threshold = 0.05;
  int dynamic_min = 2;
  int dynamic_max = 90;
  transforms::OutlierPolicy price_outliers{{3.0, 1.5}, transforms::Root::square};
  transforms::OutlierPolicy macd_hist_outliers{{20.0}, transforms::Root::square};
  std::vector<std::string> outlier_families{"open", "closeprev", "typical", "volumeprev", "macd_hist"};
  double holdout_fraction = 0.8;
  bool full_stats = false;  // fit standardization/outlier stats on all usable rows
  bool gate = true;
  bool allow_nonstationary = false;
  double gate_alpha = 0.05;
};

// ------------------------------------------------------------------ generators

/// Lag-k copies of open, closeprev and typical. Lags longer than the frame
/// produce an all-undefined column and a warning.
inline Frame make_lags(const Frame& frame, std::span<const int> lags, std::vector<std::string>* warnings = nullptr) {
  Frame out(frame.index());
  for (const char* name : {"open", "closeprev", "typical"}) {
    const Series& s = frame.at(name);
    for (int k : lags) {
      if (k < 1) throw Error(Errc::invalid_argument, "lag must be >= 1");
      Series lagged = shifted(s, static_cast<std::size_t>(k), s.name + "_lag" + std::to_string(k));
      if (lagged.all_undefined() && warnings)
        warnings->push_back(lagged.name + ": lag exceeds available history, column is entirely undefined");
      out.add(std::move(lagged));
    }
  }
  return out;
}

/// Monday = 0 ... Friday = 4.
inline unsigned weekday_index(const Date& d) {
  const unsigned iso = std::chrono::weekday(std::chrono::sys_days(d)).iso_encoding();  // Mon = 1 .. Sun = 7
  return iso - 1;
}

inline Frame cyclical_features(const std::vector<Date>& index) {
  std::vector<double> dow, dom, mon;
  for (const auto& d : index) {
    dow.push_back(std::sin(2.0 * M_PI * weekday_index(d) / 5.0));
    dom.push_back(std::sin(2.0 * M_PI * static_cast<unsigned>(d.day()) / 31.0));
    mon.push_back(std::sin(2.0 * M_PI * static_cast<unsigned>(d.month()) / 12.0));
  }
  Frame out(index);
  out.add(Series("dow_sin", std::move(dow)));
  out.add(Series("dom_sin", std::move(dom)));
  out.add(Series("month_sin", std::move(mon)));
  return out;
}

/// Overnight gap, two-night move and ATR relative to open.
inline Frame cross_features(const Frame& frame, const Series& atr) {
  const Series& open = frame.at("open");
  const Series& cp = frame.at("closeprev");
  const std::size_t n = frame.rows();
  std::vector<double> gap(n, kUndef), two(n, kUndef), ratio(n, kUndef);
  for (std::size_t t = 0; t < n; ++t) {
    gap[t] = open[t] - cp[t];
    if (t >= 1) two[t] = open[t] - cp[t - 1];
    if (open[t] == 0.0) throw Error(Errc::domain, "cross_features: open is zero");
    ratio[t] = atr[t] / open[t];
  }
  Frame out(frame.index());
  out.add(Series("difference_open-closeprev", std::move(gap)));
  out.add(Series("difference_open-closeprev_lag1", std::move(two)));
  out.add(Series("ratio_atr-open", std::move(ratio)));
  return out;
}

namespace detail {

struct ZSlope {
  bool defined = false;
  bool flat = false;
  double slope = 0.0;
};

/// Slope of the window-z-normalized series over [t - n, t].
inline ZSlope z_slope(const Series& x, std::size_t t, std::size_t n) {
  ZSlope z;
  if (t < n) return z;
  double sum = 0.0;
  for (std::size_t i = t - n; i <= t; ++i) {
    if (!is_defined(x[i])) return z;
    sum += x[i];
  }
  const double m = sum / static_cast<double>(n + 1);
  double ss = 0.0;
  for (std::size_t i = t - n; i <= t; ++i) ss += (x[i] - m) * (x[i] - m);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  z.defined = true;
  if (sd < 1e-12) {
    z.flat = true;
    return z;
  }
  z.slope = (x[t] - x[t - n]) / sd / static_cast<double>(n);
  return z;
}

inline double slope_difference_at(const Series& ind, const Series& price, std::size_t t, std::size_t n) {
  const ZSlope a = z_slope(ind, t, n);
  const ZSlope b = z_slope(price, t, n);
  if (!a.defined || !b.defined) return kUndef;
  if (a.flat || b.flat) return 0.0;
  return a.slope - b.slope;
}

}  // namespace detail

inline Series slope_diff_fixed(const Series& indicator, const Series& price, int n, std::string name = {}) {
  if (n < 2) throw Error(Errc::invalid_argument, "slope_diff_fixed: n must be >= 2");
  if (indicator.size() != price.size()) throw Error(Errc::misaligned, "slope_diff_fixed: inputs not aligned");
  std::vector<double> v(price.size(), kUndef);
  for (std::size_t t = 0; t < v.size(); ++t)
    v[t] = detail::slope_difference_at(indicator, price, t, static_cast<std::size_t>(n));
  return Series(name.empty() ? "slope_" + indicator.name + "-" + price.name + "_fixed" + std::to_string(n)
                             : std::move(name),
                std::move(v));
}

/// Window length = bars since the last pivot confirmed at or before t,
/// clipped to [min_n, max_n]; undefined before the first confirmation.
inline Series slope_diff_dynamic(const Series& indicator, const Series& price, const indicators::ZigZagPivots& pivots,
                                 int min_n = 2, int max_n = 90, std::string name = {}) {
  if (indicator.size() != price.size()) throw Error(Errc::misaligned, "slope_diff_dynamic: inputs not aligned");
  std::vector<double> v(price.size(), kUndef);
  std::size_t next = 0;
  std::optional<std::size_t> last_pivot;
  for (std::size_t t = 0; t < v.size(); ++t) {
    while (next < pivots.pivots.size() && pivots.pivots[next].confirmed <= t) {
      last_pivot = pivots.pivots[next].index;
      ++next;
    }
    if (!last_pivot) continue;
    const auto span = static_cast<long>(t - *last_pivot);
    const auto n = static_cast<std::size_t>(std::clamp<long>(span, min_n, max_n));
    v[t] = detail::slope_difference_at(indicator, price, t, n);
  }
  return Series(name.empty() ? "slope_" + indicator.name + "-" + price.name + "_dyn" : std::move(name), std::move(v));
}

// ------------------------------------------------------------- raw features

struct RawFeature {
  FeatureSpec spec;
  Series series;
};

/// Context needed by transforms and target inversion.
struct PriceColumns {
  Series close;      // target source (same day)
  Series closeprev;  // P_{t-1}
  Series ema;        // EMA_n(closeprev)
};

/// Every generator output before stationarity transforms, in a fixed order.
inline std::vector<RawFeature> raw_features(const Frame& base, const FactoryConfig& cfg,
                                            std::vector<std::string>* warnings = nullptr) {
  cfg.indicators.validate();
  const auto& ip = cfg.indicators;
  std::vector<RawFeature> out;
  auto push = [&](Series s, Generator g, Treatment tr, bool ema_ok, bool novel = false) {
    FeatureSpec spec;
    spec.base_name = s.name;
    spec.generator = g;
    spec.treatment = tr;
    spec.ema_eligible = ema_ok;
    spec.novel = novel;
    out.push_back({std::move(spec), std::move(s)});
  };
  const Series& open = base.at("open");
  const Series& highprev = base.at("highprev");
  const Series& lowprev = base.at("lowprev");
  const Series& closeprev = base.at("closeprev");
  const Series& volumeprev = base.at("volumeprev");
  const Series typical = indicators::typical_price(highprev, lowprev, closeprev);

  for (const char* n : {"open", "openprev", "highprev", "lowprev", "closeprev"})
    push(base.at(n), Generator::base, Treatment::level, true);
  push(volumeprev, Generator::base, Treatment::level, false);
  push(typical, Generator::indicator, Treatment::level, true);

  Frame with_typical(base.index());
  with_typical.add(open);
  with_typical.add(closeprev);
  with_typical.add(typical);
  const Frame lagged = make_lags(with_typical, cfg.lags, warnings);
  for (const auto& s : lagged.columns()) push(s, Generator::lag, Treatment::level, true);

  for (const Series* s : {&volumeprev, &open, &closeprev, &typical}) {
    const bool price = s != &volumeprev;
    auto rs = indicators::rolling_stats(*s, cfg.rolling_window, s->name);
    push(std::move(rs.mean), Generator::rolling, Treatment::level, price);
    push(std::move(rs.std), Generator::rolling, Treatment::level, false);
    push(std::move(rs.min), Generator::rolling, Treatment::level, price);
    push(std::move(rs.max), Generator::rolling, Treatment::level, price);
  }

  push(indicators::ema(closeprev, ip.ema_n), Generator::indicator, Treatment::level, true);
  push(indicators::sma(closeprev, ip.ema_n), Generator::indicator, Treatment::level, true);
  auto m = indicators::macd(closeprev, ip.macd_fast, ip.macd_slow, ip.macd_signal);
  push(std::move(m.line), Generator::indicator, Treatment::level, false);
  push(std::move(m.signal), Generator::indicator, Treatment::level, false);
  push(std::move(m.histogram), Generator::indicator, Treatment::level, false);
  const Series atr = indicators::atr(highprev, lowprev, closeprev, ip.atr_n);
  push(atr, Generator::indicator, Treatment::level, false);

  const Series roc = indicators::roc(closeprev, ip.roc_n);
  const Series psy = indicators::psy(closeprev, ip.psy_n);
  push(indicators::rsi(closeprev, ip.rsi_n), Generator::indicator, Treatment::stationary, false);
  push(indicators::cmo(closeprev, ip.cmo_n), Generator::indicator, Treatment::stationary, false);
  push(roc, Generator::indicator, Treatment::stationary, false);
  push(psy, Generator::indicator, Treatment::stationary, false);
  auto st = indicators::stochastic(closeprev, highprev, lowprev, ip.stoch_k_n, ip.stoch_d_n);
  push(std::move(st.k), Generator::indicator, Treatment::stationary, false);
  push(std::move(st.d), Generator::indicator, Treatment::stationary, false);
  push(indicators::cci(typical, ip.cci_n), Generator::indicator, Treatment::stationary, false);
  push(indicators::chaikin_volatility(highprev, lowprev, ip.chaikin_ema_n, ip.chaikin_roc_n), Generator::indicator,
       Treatment::stationary, false);

  const Frame cyclical = cyclical_features(base.index());
  for (const auto& s : cyclical.columns()) push(s, Generator::cyclical, Treatment::stationary, false);

  const Frame cross = cross_features(base, atr);
  push(cross.at("difference_open-closeprev"), Generator::cross, Treatment::level, true);
  push(cross.at("difference_open-closeprev_lag1"), Generator::cross, Treatment::level, true);
  push(cross.at("ratio_atr-open"), Generator::cross, Treatment::stationary, false, true);

  const auto pivots = indicators::zigzag(closeprev, cfg.zigzag_threshold);
  const Series* pairs[] = {&roc, &volumeprev, &psy};
  const char* labels[] = {"roc", "volume", "psy"};
  for (int i = 0; i < 3; ++i) {
    const std::string stem = std::string("slope_") + labels[i] + "-closeprev";
    push(slope_diff_fixed(*pairs[i], closeprev, cfg.slope_period, stem + "_fixed" + std::to_string(cfg.slope_period)),
         Generator::slope_diff_fixed, Treatment::stationary, false, true);
  }
  for (int i = 0; i < 3; ++i) {
    const std::string stem = std::string("slope_") + labels[i] + "-closeprev";
    push(slope_diff_dynamic(*pairs[i], closeprev, pivots, cfg.dynamic_min, cfg.dynamic_max, stem + "_dyn"),
         Generator::slope_diff_dynamic, Treatment::stationary, false, true);
  }
  return out;
}

inline PriceColumns price_columns(const Frame& base, const FactoryConfig& cfg) {
  return {base.at("close"), base.at("closeprev"), indicators::ema(base.at("closeprev"), cfg.indicators.ema_n)};
}

// ------------------------------------------------------------------ dataset

struct Dataset {
  DatasetId id = DatasetId::DS1;
  Frame features;                  // full date index; rows before usable.begin are warmup
  std::vector<FeatureSpec> specs;  // aligned with features.columns()
  RowRange usable;                 // rows with every column past warmup
  RowRange fit;                    // rows used to fit standardization and outlier fences
  PriceColumns prices;
  stationarity::GateReport gate;   // empty when gating is disabled
  std::vector<std::string> warnings;
};

namespace detail {

inline void add_column(Dataset& ds, FeatureSpec spec, Series s, std::string transform) {
  spec.transform = std::move(transform);
  s.name = spec.transform.empty() ? spec.base_name : spec.base_name + "_" + spec.transform;
  if (spec.transform == "ema" || spec.transform == "emadiff") spec.novel = true;
  ds.specs.push_back(std::move(spec));
  ds.features.add(std::move(s));
}

inline bool is_constant(const Series& s, std::size_t from) {
  std::optional<double> first;
  for (std::size_t i = from; i < s.size(); ++i) {
    if (!is_defined(s[i])) continue;
    if (!first) first = s[i];
    else if (s[i] != *first) return false;
  }
  return true;
}

inline bool in_outlier_family(const FactoryConfig& cfg, const std::string& name) {
  return std::find(cfg.outlier_families.begin(), cfg.outlier_families.end(), name) != cfg.outlier_families.end();
}

}  // namespace detail

/// Rows [start, start + floor(fraction * usable)) unless full_stats.
inline RowRange fit_range_for(std::size_t start, std::size_t rows, const FactoryConfig& cfg) {
  if (cfg.full_stats) return {start, rows};
  const auto h = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(rows - start)));
  return {start, start + h};
}

/// Builds the requested dataset. Usable rows and fit rows are derived from the
/// full DS1 column set so every dataset shares one row range and one target.
inline Dataset assemble_dataset(DatasetId id, const Frame& base, const FactoryConfig& cfg,
                                std::optional<RowRange> fit_override = std::nullopt) {
  Dataset ds;
  ds.id = id;
  ds.features = Frame(base.index());
  ds.prices = price_columns(base, cfg);
  const auto raw = raw_features(base, cfg, &ds.warnings);

  struct Pending {
    FeatureSpec spec;
    Series series;
    std::string transform;
    const transforms::OutlierPolicy* outliers = nullptr;
  };
  std::vector<Pending> pending;
  for (const auto& rf : raw) {
    if (rf.series.all_undefined()) {
      ds.warnings.push_back(rf.spec.base_name + ": dropped, entirely undefined");
      continue;
    }
    if (rf.spec.treatment == Treatment::stationary) {
      pending.push_back({rf.spec, rf.series, ""});
      continue;
    }
    pending.push_back({rf.spec, transforms::returns(rf.series), "ret"});
    if (transforms::strictly_positive(rf.series))
      pending.push_back({rf.spec, transforms::log_returns(rf.series), "logret"});
    else
      pending.push_back({rf.spec, transforms::cbrt_returns(rf.series), "cbrtret"});
    if (rf.spec.ema_eligible) {
      pending.push_back({rf.spec, transforms::ema_ratio_with(rf.series, ds.prices.ema), "ema"});
      pending.push_back({rf.spec, transforms::ema_diff_ratio_with(rf.series, ds.prices.ema), "emadiff"});
    }
    if (detail::in_outlier_family(cfg, rf.spec.base_name)) {
      FeatureSpec oh = rf.spec;
      oh.outlier_handled = true;
      const auto* policy = rf.spec.base_name == "macd_hist" ? &cfg.macd_hist_outliers : &cfg.price_outliers;
      pending.push_back({oh, transforms::returns(rf.series), "ret_oh", policy});
    }
  }

  std::size_t start = std::max(ds.prices.ema.warmup, ds.prices.closeprev.warmup);
  for (const auto& p : pending) start = std::max(start, p.series.warmup);
  if (start + 20 > base.rows())
    throw Error(Errc::insufficient_data, "assemble_dataset: only " + std::to_string(base.rows()) +
                                             " rows, warmup needs " + std::to_string(start));
  ds.usable = {start, base.rows()};
  ds.fit = fit_override.value_or(fit_range_for(start, base.rows(), cfg));

  Dataset all = ds;  // DS1 columns, also used for gating
  for (auto& p : pending) {
    if (p.outliers) p.series = transforms::normalize_outliers(p.series, *p.outliers, ds.fit);
    if (detail::is_constant(p.series, start)) {
      all.warnings.push_back(p.spec.base_name + (p.transform.empty() ? "" : "_" + p.transform) +
                             ": dropped, constant over the usable rows");
      continue;
    }
    detail::add_column(all, p.spec, std::move(p.series), p.transform);
  }

  if (cfg.gate) {
    // Calendar sines are deterministic and periodic; they are reported, not tested.
    Frame tested(base.index());
    for (std::size_t i = 0; i < all.specs.size(); ++i)
      if (all.specs[i].generator != Generator::cyclical) tested.add(all.features.columns()[i]);
    all.gate = stationarity::gate_frame(tested, cfg.gate_alpha, start);
    for (std::size_t i = 0; i < all.specs.size(); ++i)
      if (all.specs[i].generator == Generator::cyclical)
        all.gate.entries.push_back({all.features.columns()[i].name, kUndef, kUndef, true, "deterministic, not tested"});
    const auto failed = all.gate.failures();
    if (!failed.empty() && !cfg.allow_nonstationary) {
      std::string names;
      for (std::size_t i = 0; i < failed.size() && i < 8; ++i) names += (i ? ", " : "") + failed[i]->column;
      if (failed.size() > 8) names += ", ...";
      throw Error(Errc::nonstationary, std::to_string(failed.size()) + " column(s) failed the stationarity gate: " +
                                           names + " (use --allow-nonstationary to override)");
    }
  }

  Dataset out = ds;
  out.gate = all.gate;
  out.warnings = all.warnings;
  for (std::size_t i = 0; i < all.specs.size(); ++i) {
    const auto& spec = all.specs[i];
    if (!keeps_novel(id) && spec.novel) continue;
    Series s = all.features.columns()[i];
    if (is_standardized(id)) s = transforms::standardize_apply(s, transforms::standardize_fit(s, ds.fit));
    out.specs.push_back(spec);
    out.features.add(std::move(s));
  }
  return out;
}

}  // namespace tsgbm::features
