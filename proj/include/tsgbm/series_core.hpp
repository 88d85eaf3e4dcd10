#pragma once

// OHLCV ingestion, the shared date axis, and the previous-day shift that
// produces the openprev/highprev/lowprev/closeprev columns.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tsgbm/error.hpp"

namespace tsgbm {

using Date = std::chrono::year_month_day;

/// Not-a-value sentinel for undefined series entries.
inline constexpr double kUndef = std::numeric_limits<double>::quiet_NaN();

inline bool is_defined(double v) { return std::isfinite(v); }

namespace text {

inline std::string format_double(double v) {
  if (!is_defined(v)) return {};
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::string_view chomp(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

}  // namespace text

inline bool parse_date(std::string_view s, Date& out) {
  s = text::chomp(s);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  int y = 0;
  unsigned m = 0, d = 0;
  auto ok = [](std::string_view part, auto& v) {
    auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    return res.ec == std::errc{} && res.ptr == part.data() + part.size();
  };
  if (!ok(s.substr(0, 4), y) || !ok(s.substr(5, 2), m) || !ok(s.substr(8, 2), d)) return false;
  out = Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  return out.ok();
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

struct Bar {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  friend bool operator==(const Bar&, const Bar&) = default;
};

/// Empty string when the bar satisfies the OHLCV invariants, else the violation.
inline std::string bar_violation(const Bar& b) {
  if (!(b.open > 0 && b.high > 0 && b.low > 0 && b.close > 0)) return "price <= 0";
  if (!std::isfinite(b.open) || !std::isfinite(b.high) || !std::isfinite(b.low) ||
      !std::isfinite(b.close) || !std::isfinite(b.volume))
    return "non-finite value";
  if (b.volume < 0) return "negative volume";
  if (b.low > std::min(b.open, b.close)) return "low above min(open, close)";
  if (b.high < std::max(b.open, b.close)) return "high below max(open, close)";
  return {};
}

inline constexpr std::string_view kBarHeader = "Date,Open,High,Low,Close,Volume";

/// Parses OHLCV CSV text. Row numbers in errors are 1-based file lines.
inline std::vector<Bar> parse_bars(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::malformed_row, "row 1: missing header");
  std::string_view header = text::chomp(line);
  if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF) header.remove_prefix(3);
  if (header != kBarHeader)
    throw Error(Errc::malformed_row, "row 1: header must be exactly " + std::string(kBarHeader));

  std::vector<Bar> bars;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    std::string_view sv = text::chomp(line);
    if (sv.empty()) continue;
    auto fields = text::split(sv);
    const std::string where = "row " + std::to_string(row) + ": ";
    if (fields.size() != 6) throw Error(Errc::malformed_row, where + "expected 6 fields");
    Bar b;
    if (!parse_date(fields[0], b.date)) throw Error(Errc::malformed_row, where + "bad date");
    double* targets[] = {&b.open, &b.high, &b.low, &b.close, &b.volume};
    for (int i = 0; i < 5; ++i) {
      if (!text::parse_double(fields[i + 1], *targets[i]))
        throw Error(Errc::malformed_row, where + "bad number '" + std::string(fields[i + 1]) + "'");
    }
    if (!bars.empty() && !(bars.back().date < b.date))
      throw Error(Errc::non_monotonic, where + "dates must strictly increase");
    if (auto v = bar_violation(b); !v.empty()) throw Error(Errc::invariant, where + v);
    bars.push_back(b);
  }
  return bars;
}

inline std::vector<Bar> load_bars(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  return parse_bars(in);
}

/// Writes bars in the exact format parse_bars accepts (shortest round-trip numbers).
inline void write_bars(std::ostream& out, const std::vector<Bar>& bars) {
  out << kBarHeader << '\n';
  for (const auto& b : bars) {
    out << format_date(b.date) << ',' << text::format_double(b.open) << ','
        << text::format_double(b.high) << ',' << text::format_double(b.low) << ','
        << text::format_double(b.close) << ',' << text::format_double(b.volume) << '\n';
  }
}

/// Values with a leading warmup region of undefined entries. Positions past
/// warmup may still hold isolated undefined entries (zero denominators); the
/// tree learner treats those as missing values.
struct Series {
  std::string name;
  std::vector<double> values;
  std::size_t warmup = 0;

  Series() = default;
  Series(std::string n, std::vector<double> v) : name(std::move(n)), values(std::move(v)) {
    recompute_warmup();
  }

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }

  void recompute_warmup() {
    warmup = 0;
    while (warmup < values.size() && !is_defined(values[warmup])) ++warmup;
  }

  bool all_undefined() const { return warmup >= values.size(); }
};

/// Named columns on one shared date index.
class Frame {
 public:
  Frame() = default;
  explicit Frame(std::vector<Date> index) : index_(std::move(index)) {}

  const std::vector<Date>& index() const { return index_; }
  std::size_t rows() const { return index_.size(); }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<Series>& columns() const { return columns_; }

  void add(Series s) {
    if (s.size() != index_.size())
      throw Error(Errc::misaligned, "column '" + s.name + "' has " + std::to_string(s.size()) +
                                        " rows, index has " + std::to_string(index_.size()));
    if (lookup_.count(s.name)) throw Error(Errc::name_collision, "duplicate column '" + s.name + "'");
    lookup_.emplace(s.name, columns_.size());
    columns_.push_back(std::move(s));
  }

  bool contains(std::string_view name) const { return lookup_.count(std::string(name)) > 0; }

  const Series& at(std::string_view name) const {
    auto it = lookup_.find(std::string(name));
    if (it == lookup_.end()) throw Error(Errc::missing_column, "missing column '" + std::string(name) + "'");
    return columns_[it->second];
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
  }

  /// First row at which every column is past its warmup.
  std::size_t effective_start() const {
    std::size_t start = 0;
    for (const auto& c : columns_) start = std::max(start, c.warmup);
    return start;
  }

  /// Returns a frame holding only the named columns, in the given order.
  Frame select(const std::vector<std::string>& names) const {
    Frame out(index_);
    for (const auto& n : names) out.add(at(n));
    out.target_name = target_name;
    return out;
  }

  std::string target_name;

 private:
  std::vector<Date> index_;
  std::vector<Series> columns_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

inline Series shifted(const Series& s, std::size_t k, std::string name) {
  std::vector<double> v(s.size(), kUndef);
  for (std::size_t i = k; i < s.size(); ++i) v[i] = s.values[i - k];
  return Series(std::move(name), std::move(v));
}

/// Same-day open and close plus the prior day's OHLCV. close is kept only as
/// the target source.
inline Frame shift_prev(const std::vector<Bar>& bars) {
  if (bars.size() < 2) throw Error(Errc::insufficient_data, "shift_prev needs at least 2 bars");
  std::vector<Date> index;
  index.reserve(bars.size());
  for (const auto& b : bars) index.push_back(b.date);

  auto column = [&](double Bar::*field) {
    std::vector<double> v;
    v.reserve(bars.size());
    for (const auto& b : bars) v.push_back(b.*field);
    return v;
  };

  Frame f(std::move(index));
  const Series open("open", column(&Bar::open));
  f.add(open);
  f.add(shifted(open, 1, "openprev"));
  f.add(shifted(Series("high", column(&Bar::high)), 1, "highprev"));
  f.add(shifted(Series("low", column(&Bar::low)), 1, "lowprev"));
  const Series close("close", column(&Bar::close));
  f.add(shifted(close, 1, "closeprev"));
  f.add(shifted(Series("volume", column(&Bar::volume)), 1, "volumeprev"));
  f.add(close);
  f.target_name = "close";
  return f;
}

inline Frame align(const std::vector<Frame>& frames) {
  if (frames.empty()) return Frame{};
  Frame out(frames.front().index());
  out.target_name = frames.front().target_name;
  for (const auto& f : frames) {
    if (f.index() != out.index()) throw Error(Errc::misaligned, "frames have different date indexes");
    for (const auto& c : f.columns()) out.add(c);
    if (out.target_name.empty()) out.target_name = f.target_name;
  }
  return out;
}

/// Feature matrix export: Date column then one column per feature; undefined cells empty.
inline void write_frame_csv(std::ostream& out, const Frame& f) {
  out << "Date";
  for (const auto& c : f.columns()) out << ',' << c.name;
  out << '\n';
  for (std::size_t r = 0; r < f.rows(); ++r) {
    out << format_date(f.index()[r]);
    for (const auto& c : f.columns()) out << ',' << text::format_double(c.values[r]);
    out << '\n';
  }
}

}  // namespace tsgbm
