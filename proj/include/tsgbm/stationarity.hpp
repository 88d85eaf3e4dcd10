#pragma once

// Augmented Dickey-Fuller (unit-root null) and KPSS (level-stationarity null)
// tests, and a per-column gate requiring ADF rejection and KPSS non-rejection.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tsgbm/error.hpp"
#include "tsgbm/series_core.hpp"

namespace tsgbm::stationarity {

struct TestResult {
  double statistic = 0.0;
  std::map<double, double> critical_values;  // significance -> threshold
  std::size_t lags_or_bandwidth = 0;
  std::size_t nobs = 0;
  bool reject_null = false;  // at the alpha the test was run with
};

inline constexpr std::size_t kMinLength = 25;

/// MacKinnon (2010) response-surface critical values, constant-only ADF
/// regression: tau(T) = b0 + b1/T + b2/T^2 + b3/T^3.
inline double adf_critical_value(double alpha, std::size_t nobs) {
  struct Row { double alpha, b0, b1, b2, b3; };
  static constexpr Row kTable[] = {
      {0.01, -3.43035, -6.5393, -16.786, -79.433},
      {0.05, -2.86154, -2.8903, -4.234, -40.040},
      {0.10, -2.56677, -1.5384, -2.809, 0.0},
  };
  const double t = static_cast<double>(nobs);
  for (const auto& r : kTable) {
    if (std::abs(r.alpha - alpha) < 1e-12) return r.b0 + r.b1 / t + r.b2 / (t * t) + r.b3 / (t * t * t);
  }
  throw Error(Errc::invalid_argument, "ADF critical values tabulated only for alpha in {0.01, 0.05, 0.10}");
}

/// KPSS level-stationarity asymptotic critical values.
inline double kpss_critical_value(double alpha) {
  static const std::map<double, double> kTable{{0.10, 0.347}, {0.05, 0.463}, {0.025, 0.574}, {0.01, 0.739}};
  for (const auto& [a, c] : kTable) {
    if (std::abs(a - alpha) < 1e-12) return c;
  }
  throw Error(Errc::invalid_argument, "KPSS critical values tabulated only for alpha in {0.01, 0.025, 0.05, 0.10}");
}

inline std::size_t schwert_lag(std::size_t n) {
  return static_cast<std::size_t>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

inline std::size_t kpss_default_bandwidth(std::size_t n) {
  return static_cast<std::size_t>(std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

/// Regression dy_t = a + b*y_{t-1} + sum_i g_i*dy_{t-i} + e_t; statistic is the t-value of b.
inline TestResult adf_test(std::span<const double> y, std::optional<std::size_t> max_lag = std::nullopt,
                           double alpha = 0.05) {
  const std::size_t n = y.size();
  if (n < kMinLength) throw Error(Errc::insufficient_data, "adf_test needs >= 25 values");
  std::size_t p = max_lag.value_or(schwert_lag(n));
  // Keep at least twice as many observations as regressors.
  while (p > 0 && (n - 1 - p) < 2 * (p + 2)) --p;

  const std::size_t nobs = n - 1 - p;
  const std::size_t k = p + 2;
  Eigen::MatrixXd X(nobs, k);
  Eigen::VectorXd z(nobs);
  for (std::size_t r = 0; r < nobs; ++r) {
    const std::size_t t = r + p + 1;  // index into y of the response level
    z(r) = y[t] - y[t - 1];
    X(r, 0) = 1.0;
    X(r, 1) = y[t - 1];
    for (std::size_t i = 1; i <= p; ++i) X(r, 1 + i) = y[t - i] - y[t - i - 1];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < static_cast<Eigen::Index>(k)) throw Error(Errc::singular, "adf_test: singular regression");
  const Eigen::VectorXd beta = qr.solve(z);
  const Eigen::VectorXd resid = z - X * beta;
  const double s2 = resid.squaredNorm() / static_cast<double>(nobs - k);

  // (X'X)^-1 = P R^-1 R^-T P'
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv =
      R.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd cov_perm = Rinv * Rinv.transpose();
  const auto& perm = qr.colsPermutation().indices();
  Eigen::Index slot = 0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(k); ++i) {
    if (perm(i) == 1) slot = i;
  }
  const double se = std::sqrt(s2 * cov_perm(slot, slot));
  if (!(se > 0.0)) throw Error(Errc::singular, "adf_test: zero standard error");

  TestResult out;
  out.statistic = beta(1) / se;
  out.lags_or_bandwidth = p;
  out.nobs = nobs;
  for (double a : {0.01, 0.05, 0.10}) out.critical_values[a] = adf_critical_value(a, nobs);
  out.reject_null = out.statistic < adf_critical_value(alpha, nobs);
  return out;
}

/// Level KPSS: sum_t S_t^2 / (T^2 * long-run variance), Bartlett weights.
inline TestResult kpss_test(std::span<const double> x, std::optional<std::size_t> bandwidth = std::nullopt,
                            double alpha = 0.05) {
  const std::size_t n = x.size();
  if (n < kMinLength) throw Error(Errc::insufficient_data, "kpss_test needs >= 25 values");
  const std::size_t lags = std::min(bandwidth.value_or(kpss_default_bandwidth(n)), n - 1);

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = x[i] - mean;

  double partial = 0.0, eta = 0.0;
  for (double v : e) {
    partial += v;
    eta += partial * partial;
  }
  double lrv = 0.0;
  for (double v : e) lrv += v * v;
  for (std::size_t l = 1; l <= lags; ++l) {
    double acc = 0.0;
    for (std::size_t t = l; t < n; ++t) acc += e[t] * e[t - l];
    lrv += 2.0 * (1.0 - static_cast<double>(l) / static_cast<double>(lags + 1)) * acc;
  }
  lrv /= static_cast<double>(n);
  if (!(lrv > 0.0)) throw Error(Errc::zero_variance, "kpss_test: zero long-run variance");

  TestResult out;
  const double tn = static_cast<double>(n);
  out.statistic = eta / (tn * tn * lrv);
  out.lags_or_bandwidth = lags;
  out.nobs = n;
  for (double a : {0.10, 0.05, 0.025, 0.01}) out.critical_values[a] = kpss_critical_value(a);
  out.reject_null = out.statistic > kpss_critical_value(alpha);
  return out;
}

struct GateEntry {
  std::string column;
  double adf_stat = kUndef;
  double kpss_stat = kUndef;
  bool pass = false;
  std::string note;  // why a statistic could not be computed
};

struct GateReport {
  std::vector<GateEntry> entries;

  std::vector<const GateEntry*> failures() const {
    std::vector<const GateEntry*> out;
    for (const auto& e : entries) {
      if (!e.pass) out.push_back(&e);
    }
    return out;
  }
};

inline std::vector<double> defined_values(const Series& s, std::size_t from = 0) {
  std::vector<double> v;
  v.reserve(s.size());
  for (std::size_t i = from; i < s.size(); ++i) {
    if (is_defined(s[i])) v.push_back(s[i]);
  }
  return v;
}

/// Pass = ADF rejects the unit root AND KPSS fails to reject stationarity.
/// Each column is tested on its defined values from `from_row` on.
inline GateReport gate_frame(const Frame& frame, double alpha = 0.05, std::size_t from_row = 0) {
  GateReport report;
  for (const auto& col : frame.columns()) {
    GateEntry e;
    e.column = col.name;
    const auto v = defined_values(col, from_row);
    try {
      const auto adf = adf_test(v, std::nullopt, alpha);
      const auto kpss = kpss_test(v, std::nullopt, alpha);
      e.adf_stat = adf.statistic;
      e.kpss_stat = kpss.statistic;
      e.pass = adf.reject_null && !kpss.reject_null;
    } catch (const Error& err) {
      e.note = err.what();
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

inline void write_gate_csv(std::ostream& out, const GateReport& r) {
  out << "column,adf_stat,kpss_stat,pass\n";
  for (const auto& e : r.entries) {
    out << e.column << ',' << text::format_double(e.adf_stat) << ',' << text::format_double(e.kpss_stat) << ','
        << (e.pass ? "true" : "false") << '\n';
  }
}

}  // namespace tsgbm::stationarity
