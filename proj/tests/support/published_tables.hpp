#pragma once

// Published results used to check the relative-metric and efficiency arithmetic.

#include <array>
#include <optional>
#include <string_view>

namespace tsgbm::testkit {

struct PublishedRow {
  std::string_view method;
  double train_seconds;
  double da_pct, mae, rmse;
};

inline constexpr double hms(int h, int m) { return 3600.0 * h + 60.0 * m; }

inline constexpr std::array<PublishedRow, 9> kPublishedRows{{
    {"Log Returns", hms(1, 38), 63.15, 1.3336, 3.6475},
    {"Std Log Returns", hms(6, 57), 62.41, 1.3422, 3.6740},
    {"Returns", hms(1, 24), 63.64, 1.3369, 3.6859},
    {"Std Returns", hms(7, 13), 63.58, 1.3435, 3.7036},
    {"EMA Ratio", hms(1, 49), 58.02, 1.3424, 3.6277},
    {"Std EMA Ratio", hms(3, 31), 56.98, 1.3507, 3.6743},
    {"EMA Diff Ratio", hms(1, 33), 63.09, 1.3365, 3.665},
    {"Benchmark (Log Returns)", hms(9, 9), 60.43, 1.4194, 4.0677},
    {"Benchmark (Std Log Returns)", hms(6, 49), 60.99, 1.4309, 4.1489},
}};

inline constexpr PublishedRow kPublishedRandomWalk{"Random Walk", 0.0, 50.0, 1.6225, 5.4932};

struct PublishedRelative {
  std::string_view method;
  std::size_t row;  // index into kPublishedRows
  std::array<double, 3> vs_rw;         // DA, MAE, RMSE (%)
  std::array<double, 3> vs_benchmark;  // DA, MAE, RMSE (%)
  double efficiency;
};

inline constexpr std::array<PublishedRelative, 5> kPublishedRelative{{
    {"Log Returns", 0, {26.3, 17.81, 33.6}, {26.07, 42.25, 29.47}, 10507},
    {"Returns", 2, {27.28, 17.6, 32.9}, {30.77, 40.57, 26.78}, 9153},
    {"EMA Ratio", 4, {16.04, 17.26, 33.96}, {-23.11, 37.85, 30.86}, 11877},
    {"EMA Diff Ratio", 6, {26.18, 17.63, 33.28}, {25.5, 40.81, 25.95}, 10045},
    {"Benchmark", 7, {20.86, 12.52, 25.95}, {0, 0, 0}, 66362},
}};

}  // namespace tsgbm::testkit
