#pragma once

// Technical indicators over prev-shifted price columns. Every output at index t
// reads inputs at indexes <= t only. Output warmup equals input warmup plus the
// history the formula needs; zero denominators yield kUndef at that position.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tsgbm/error.hpp"
#include "tsgbm/series_core.hpp"

namespace tsgbm::indicators {

struct IndicatorParams {
  int rsi_n = 14;
  int cmo_n = 14;
  int atr_n = 14;
  int stoch_k_n = 14;
  int stoch_d_n = 3;
  int cci_n = 20;
  int roc_n = 12;
  int psy_n = 12;
  int macd_fast = 12;
  int macd_slow = 26;
  int macd_signal = 9;
  int chaikin_ema_n = 10;
  int chaikin_roc_n = 10;
  int ema_n = 14;

  void validate() const {
    for (int n : {rsi_n, cmo_n, atr_n, stoch_k_n, cci_n, roc_n, psy_n, macd_fast, macd_slow,
                  macd_signal, chaikin_ema_n, chaikin_roc_n, ema_n}) {
      if (n < 2) throw Error(Errc::invalid_argument, "indicator periods must be >= 2");
    }
    if (stoch_d_n < 1) throw Error(Errc::invalid_argument, "stoch_d_n must be >= 1");
    if (macd_fast >= macd_slow) throw Error(Errc::invalid_argument, "macd_fast must be < macd_slow");
  }
};

namespace detail {

inline void require_aligned(std::initializer_list<const Series*> xs) {
  const std::size_t n = (*xs.begin())->size();
  for (const Series* s : xs) {
    if (s->size() != n) throw Error(Errc::misaligned, "indicator inputs have different lengths");
  }
}

inline std::size_t max_warmup(std::initializer_list<const Series*> xs) {
  std::size_t w = 0;
  for (const Series* s : xs) w = std::max(w, s->warmup);
  return w;
}

inline bool window_defined(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  for (std::size_t i = lo; i <= hi; ++i) {
    if (!is_defined(v[i])) return false;
  }
  return true;
}

inline Series finish(std::string name, std::vector<double> v) { return Series(std::move(name), std::move(v)); }

}  // namespace detail

/// (H + L + C) / 3
inline Series typical_price(const Series& high, const Series& low, const Series& close) {
  detail::require_aligned({&high, &low, &close});
  std::vector<double> v(close.size(), kUndef);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (high[i] + low[i] + close[i]) / 3.0;
  return detail::finish("typical", std::move(v));
}

inline Series sma(const Series& x, int n, std::string name = {}) {
  if (n < 1) throw Error(Errc::invalid_argument, "sma period must be >= 1");
  const std::size_t len = x.size(), un = static_cast<std::size_t>(n);
  std::vector<double> v(len, kUndef);
  for (std::size_t t = x.warmup + un - 1; t < len; ++t) {
    double sum = 0.0;
    bool ok = true;
    for (std::size_t i = t + 1 - un; i <= t; ++i) {
      if (!is_defined(x[i])) { ok = false; break; }
      sum += x[i];
    }
    if (ok) v[t] = sum / n;
  }
  return detail::finish(name.empty() ? "sma" + std::to_string(n) : std::move(name), std::move(v));
}

/// Exponential filter seeded with the mean of its first n values.
inline Series exp_smooth(const Series& x, int n, double alpha, std::string name) {
  const std::size_t len = x.size(), un = static_cast<std::size_t>(n);
  if (x.warmup + un > len)
    throw Error(Errc::insufficient_data, name + ": period " + std::to_string(n) + " exceeds available history");
  std::vector<double> v(len, kUndef);
  const std::size_t seed_at = x.warmup + un - 1;
  double state = 0.0;
  for (std::size_t i = x.warmup; i <= seed_at; ++i) state += x[i];
  state /= n;
  if (!is_defined(state)) throw Error(Errc::domain, name + ": undefined values inside the seed window");
  v[seed_at] = state;
  for (std::size_t t = seed_at + 1; t < len; ++t) {
    if (!is_defined(x[t])) continue;
    state = alpha * x[t] + (1.0 - alpha) * state;
    v[t] = state;
  }
  return detail::finish(std::move(name), std::move(v));
}

inline Series ema(const Series& x, int n, std::string name = {}) {
  if (n < 1) throw Error(Errc::invalid_argument, "ema period must be >= 1");
  return exp_smooth(x, n, 2.0 / (n + 1.0), name.empty() ? "ema" + std::to_string(n) : std::move(name));
}

/// Wilder RSI: gains/losses seeded with an n-change average, then alpha = 1/n.
inline Series rsi(const Series& x, int n) {
  if (n < 2) throw Error(Errc::invalid_argument, "rsi period must be >= 2");
  const std::size_t len = x.size(), un = static_cast<std::size_t>(n);
  std::vector<double> v(len, kUndef);
  if (x.warmup + un >= len) return detail::finish("rsi" + std::to_string(n), std::move(v));
  double gain = 0.0, loss = 0.0;
  for (std::size_t i = x.warmup + 1; i <= x.warmup + un; ++i) {
    const double d = x[i] - x[i - 1];
    gain += std::max(d, 0.0);
    loss += std::max(-d, 0.0);
  }
  gain /= n;
  loss /= n;
  auto value = [](double g, double l) {
    if (l == 0.0) return g > 0.0 ? 100.0 : kUndef;
    return 100.0 - 100.0 / (1.0 + g / l);
  };
  v[x.warmup + un] = value(gain, loss);
  for (std::size_t t = x.warmup + un + 1; t < len; ++t) {
    const double d = x[t] - x[t - 1];
    if (!is_defined(d)) continue;
    gain = (gain * (n - 1) + std::max(d, 0.0)) / n;
    loss = (loss * (n - 1) + std::max(-d, 0.0)) / n;
    v[t] = value(gain, loss);
  }
  return detail::finish("rsi" + std::to_string(n), std::move(v));
}

struct Macd {
  Series line;
  Series signal;
  Series histogram;
};

inline Macd macd(const Series& x, int fast, int slow, int signal) {
  if (fast >= slow) throw Error(Errc::invalid_argument, "macd fast period must be < slow period");
  const Series ef = ema(x, fast);
  const Series es = ema(x, slow);
  std::vector<double> line(x.size(), kUndef);
  for (std::size_t i = 0; i < x.size(); ++i) line[i] = ef[i] - es[i];
  Series line_s("macd_line", std::move(line));
  Series sig = ema(line_s, signal, "macd_signal");
  std::vector<double> hist(x.size(), kUndef);
  for (std::size_t i = 0; i < x.size(); ++i) hist[i] = line_s[i] - sig[i];
  return Macd{std::move(line_s), std::move(sig), Series("macd_hist", std::move(hist))};
}

/// (TP - SMA_n(TP)) / (0.015 * mean absolute deviation)
inline Series cci(const Series& typical, int n) {
  if (n < 2) throw Error(Errc::invalid_argument, "cci period must be >= 2");
  const std::size_t len = typical.size(), un = static_cast<std::size_t>(n);
  std::vector<double> v(len, kUndef);
  for (std::size_t t = typical.warmup + un - 1; t < len; ++t) {
    if (!detail::window_defined(typical.values, t + 1 - un, t)) continue;
    double mean = 0.0;
    for (std::size_t i = t + 1 - un; i <= t; ++i) mean += typical[i];
    mean /= n;
    double mad = 0.0;
    for (std::size_t i = t + 1 - un; i <= t; ++i) mad += std::abs(typical[i] - mean);
    mad /= n;
    if (mad > 0.0) v[t] = (typical[t] - mean) / (0.015 * mad);
  }
  return detail::finish("cci" + std::to_string(n), std::move(v));
}

/// 100 * (Su - Sd) / (Su + Sd) over the last n one-step changes.
inline Series cmo(const Series& x, int n) {
  if (n < 2) throw Error(Errc::invalid_argument, "cmo period must be >= 2");
  const std::size_t len = x.size(), un = static_cast<std::size_t>(n);
  std::vector<double> v(len, kUndef);
  for (std::size_t t = x.warmup + un; t < len; ++t) {
    if (!detail::window_defined(x.values, t - un, t)) continue;
    double up = 0.0, down = 0.0;
    for (std::size_t i = t + 1 - un; i <= t; ++i) {
      const double d = x[i] - x[i - 1];
      if (d > 0) up += d; else down -= d;
    }
    if (up + down > 0.0) v[t] = 100.0 * (up - down) / (up + down);
  }
  return detail::finish("cmo" + std::to_string(n), std::move(v));
}

inline Series roc(const Series& x, int n) {
  if (n < 1) throw Error(Errc::invalid_argument, "roc period must be >= 1");
  const std::size_t un = static_cast<std::size_t>(n);
  std::vector<double> v(x.size(), kUndef);
  for (std::size_t t = x.warmup + un; t < x.size(); ++t) {
    const double base = x[t - un];
    if (base != 0.0) v[t] = 100.0 * (x[t] - base) / base;
  }
  return detail::finish("roc" + std::to_string(n), std::move(v));
}

/// Psychological line: percentage of up-moves among the last n changes.
inline Series psy(const Series& x, int n) {
  if (n < 1) throw Error(Errc::invalid_argument, "psy period must be >= 1");
  const std::size_t un = static_cast<std::size_t>(n);
  std::vector<double> v(x.size(), kUndef);
  for (std::size_t t = x.warmup + un; t < x.size(); ++t) {
    if (!detail::window_defined(x.values, t - un, t)) continue;
    int ups = 0;
    for (std::size_t i = t + 1 - un; i <= t; ++i) ups += x[i] > x[i - 1] ? 1 : 0;
    v[t] = 100.0 * ups / n;
  }
  return detail::finish("psy" + std::to_string(n), std::move(v));
}

struct Stochastic {
  Series k;
  Series d;
};

inline Stochastic stochastic(const Series& close, const Series& high, const Series& low, int k_n, int d_n) {
  detail::require_aligned({&close, &high, &low});
  if (k_n < 2 || d_n < 1) throw Error(Errc::invalid_argument, "stochastic periods out of range");
  const std::size_t len = close.size(), un = static_cast<std::size_t>(k_n);
  const std::size_t w = detail::max_warmup({&close, &high, &low});
  std::vector<double> k(len, kUndef);
  for (std::size_t t = w + un - 1; t < len; ++t) {
    double hh = -INFINITY, ll = INFINITY;
    bool ok = is_defined(close[t]);
    for (std::size_t i = t + 1 - un; i <= t && ok; ++i) {
      if (!is_defined(high[i]) || !is_defined(low[i])) ok = false;
      hh = std::max(hh, high[i]);
      ll = std::min(ll, low[i]);
    }
    if (ok && hh > ll) k[t] = 100.0 * (close[t] - ll) / (hh - ll);
  }
  Series ks("stoch_k", std::move(k));
  Series ds = sma(ks, d_n, "stoch_d");
  return Stochastic{std::move(ks), std::move(ds)};
}

inline Series true_range(const Series& high, const Series& low, const Series& close) {
  detail::require_aligned({&high, &low, &close});
  const std::size_t w = detail::max_warmup({&high, &low, &close});
  std::vector<double> v(close.size(), kUndef);
  for (std::size_t t = w + 1; t < close.size(); ++t) {
    const double pc = close[t - 1];
    v[t] = std::max({high[t] - low[t], std::abs(high[t] - pc), std::abs(low[t] - pc)});
  }
  return Series("true_range", std::move(v));
}

/// Wilder-smoothed true range.
inline Series atr(const Series& high, const Series& low, const Series& close, int n) {
  if (n < 2) throw Error(Errc::invalid_argument, "atr period must be >= 2");
  return exp_smooth(true_range(high, low, close), n, 1.0 / n, "atr" + std::to_string(n));
}

/// 100 * (E_t - E_{t-m}) / E_{t-m} with E = EMA_n(H - L).
inline Series chaikin_volatility(const Series& high, const Series& low, int ema_n, int roc_n) {
  detail::require_aligned({&high, &low});
  std::vector<double> range(high.size(), kUndef);
  for (std::size_t i = 0; i < range.size(); ++i) range[i] = high[i] - low[i];
  const Series e = ema(Series("range", std::move(range)), ema_n);
  Series out = roc(e, roc_n);
  out.name = "chaikin_vol";
  return out;
}

struct RollingStats {
  Series mean;
  Series std;
  Series min;
  Series max;
};

/// Window mean, sample standard deviation (n - 1), min and max.
inline RollingStats rolling_stats(const Series& x, int n, const std::string& prefix = "x") {
  if (n < 2) throw Error(Errc::invalid_argument, "rolling window must be >= 2");
  const std::size_t len = x.size(), un = static_cast<std::size_t>(n);
  std::vector<double> mean(len, kUndef), sd(len, kUndef), mn(len, kUndef), mx(len, kUndef);
  for (std::size_t t = x.warmup + un - 1; t < len; ++t) {
    if (!detail::window_defined(x.values, t + 1 - un, t)) continue;
    double s = 0.0, lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = t + 1 - un; i <= t; ++i) {
      s += x[i];
      lo = std::min(lo, x[i]);
      hi = std::max(hi, x[i]);
    }
    const double m = s / n;
    double ss = 0.0;
    for (std::size_t i = t + 1 - un; i <= t; ++i) ss += (x[i] - m) * (x[i] - m);
    mean[t] = m;
    sd[t] = std::sqrt(ss / (n - 1));
    mn[t] = lo;
    mx[t] = hi;
  }
  const std::string suffix = std::to_string(n);
  return RollingStats{Series(prefix + "_rollmean" + suffix, std::move(mean)),
                      Series(prefix + "_rollstd" + suffix, std::move(sd)),
                      Series(prefix + "_rollmin" + suffix, std::move(mn)),
                      Series(prefix + "_rollmax" + suffix, std::move(mx))};
}

enum class PivotKind { peak, trough };

struct Pivot {
  std::size_t index = 0;      // where the extreme printed
  std::size_t confirmed = 0;  // first index at which the reversal is known
  double price = 0.0;
  PivotKind kind = PivotKind::peak;
};

struct ZigZagPivots {
  double threshold_pct = 0.05;
  std::vector<Pivot> pivots;
};

/// Confirms a pivot at the first index where price has retraced by
/// threshold_pct (relative) from the running extreme. The series start is
/// never a pivot, so a monotone series confirms nothing.
inline ZigZagPivots zigzag(const Series& x, double threshold_pct) {
  if (!(threshold_pct > 0.0)) throw Error(Errc::invalid_argument, "zigzag threshold must be > 0");
  ZigZagPivots out;
  out.threshold_pct = threshold_pct;
  enum class Trend { unknown, up, down } trend = Trend::unknown;
  double run_max = 0.0, run_min = 0.0, extreme = 0.0;
  std::size_t extreme_at = 0;
  bool started = false;
  for (std::size_t t = x.warmup; t < x.size(); ++t) {
    const double p = x[t];
    if (!is_defined(p)) continue;
    if (!started) {
      run_max = run_min = p;
      started = true;
      continue;
    }
    switch (trend) {
      case Trend::unknown:
        run_max = std::max(run_max, p);
        run_min = std::min(run_min, p);
        if (p >= run_min * (1.0 + threshold_pct)) {
          trend = Trend::up;
          extreme = p;
          extreme_at = t;
        } else if (p <= run_max * (1.0 - threshold_pct)) {
          trend = Trend::down;
          extreme = p;
          extreme_at = t;
        }
        break;
      case Trend::up:
        if (p > extreme) {
          extreme = p;
          extreme_at = t;
        } else if (p <= extreme * (1.0 - threshold_pct)) {
          out.pivots.push_back({extreme_at, t, extreme, PivotKind::peak});
          trend = Trend::down;
          extreme = p;
          extreme_at = t;
        }
        break;
      case Trend::down:
        if (p < extreme) {
          extreme = p;
          extreme_at = t;
        } else if (p >= extreme * (1.0 + threshold_pct)) {
          out.pivots.push_back({extreme_at, t, extreme, PivotKind::trough});
          trend = Trend::up;
          extreme = p;
          extreme_at = t;
        }
        break;
    }
  }
  return out;
}

}  // namespace tsgbm::indicators
