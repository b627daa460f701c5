#pragma once

// Published reference numbers used by the arithmetic checks.

#include <array>
#include <cstddef>

namespace reference {

using Row = std::array<double, 5>;

// Loss rows of the four-vs-five comparison, evaluated on 18-30 .. 60-85.
// Index = held-out ordinal; kLossWithAll is the all-domain run.
inline constexpr std::array<Row, 5> kLossWithout{{
    {1.55, 1.54, 1.69, 1.83, 1.83},  // without 18-30
    {1.48, 1.56, 1.71, 1.72, 1.82},  // without 30-40
    {1.46, 1.50, 1.71, 1.80, 1.70},  // without 40-50
    {1.27, 1.35, 1.55, 1.69, 1.78},  // without 50-60
    {1.32, 1.32, 1.47, 1.66, 1.51},  // without 60-85
}};
inline constexpr Row kLossWithAll{1.29, 1.31, 1.50, 1.60, 1.59};

// Published loss-difference table, same row order.
inline constexpr std::array<Row, 5> kLossIncrease{{
    {0.26, 0.23, 0.19, 0.22, 0.25},
    {0.18, 0.20, 0.16, 0.14, 0.17},
    {0.17, 0.19, 0.20, 0.20, 0.12},
    {-0.02, 0.04, 0.05, 0.08, 0.20},
    {0.03, 0.01, -0.03, 0.06, -0.07},
}};

// Leave-one-domain-out CDANN cells (held-out domain = column) and the printed means.
inline constexpr Row kCdannArousal{0.61, 0.64, 0.55, 0.51, 0.57};
inline constexpr Row kCdannValence{0.71, 0.67, 0.62, 0.61, 0.64};
inline constexpr Row kCdannAccuracy{0.60, 0.59, 0.54, 0.57, 0.60};
inline constexpr std::array<double, 3> kCdannMeans{0.58, 0.65, 0.58};

// Training-set sizes in thousands for three subset configurations and printed totals.
struct SizesRow {
  std::array<double, 5> pools;
  double total;
  std::array<int, 2> held_out;  // ordinals, -1 = unused
};
inline constexpr std::array<SizesRow, 3> kSizes{{
    {{61.9, 50.4, 37.5, 0.0, 20.6}, 170.4, {3, -1}},
    {{68.5, 55.8, 0.0, 26.0, 20.6}, 170.8, {2, -1}},
    {{83.6, 67.8, 0.0, 0.0, 20.6}, 171.9, {2, 3}},
}};

}  // namespace reference
