#pragma once

#include <string>
#include <vector>

#include "ftsbench/evaluation/metric_table.hpp"

// Reference EMD tables for the NGARCH+ and Heston+ datasets and their average ranks.
namespace fixture {

inline const std::vector<std::string>& reference_models() {
  static const std::vector<std::string> m = {"CoMeTS", "CTNF",  "CTVAE", "GMMN",   "RCGAN",
                                             "TimeGAN", "FSV_C", "COG",   "COG_R",  "DCCN",
                                             "DCCN_R", "DCCT",  "DCCT_R", "FSV",   "FSV_R"};
  return m;
}

inline ftsbench::evaluation::MetricTable make_table(const std::vector<std::vector<double>>& rows) {
  ftsbench::evaluation::MetricTable t(reference_models());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.set(i, j, rows[i][j]);
  return t;
}

inline ftsbench::evaluation::MetricTable ngarch_plus_table() {
  return make_table({
      {1.83, 2.96, 2.19, 0.06, 0.02, 2.76, 2.07, 0.02, 2.99, 0.02, 1.38, 0.03, 3.23, 2.10, 2.21},
      {0.25, 1.01, 0.21, 0.02, 0.01, 0.20, 0.06, 0.09, 0.08, 0.02, 0.39, 0.05, 0.68, 0.21, 0.27},
      {0.33, 0.05, 0.35, 0.09, 0.07, 0.03, 0.03, 0.04, 0.10, 0.12, 0.03, 0.03, 0.08, 0.04, 0.03},
      {0.13, 0.22, 0.18, 0.01, 0.00, 0.02, 0.03, 0.03, 0.08, 0.02, 0.20, 0.02, 0.26, 0.06, 0.09},
      {2.36, 0.52, 27.06, 0.14, 0.03, 0.45, 0.08, 0.10, 0.42, 0.04, 7.83, 0.16, 0.93, 0.62, 0.05},
      {4.24, 31.49, 27.65, 2.29, 0.03, 18.92, 17.39, 0.05, 25.27, 0.08, 16.29, 0.08, 9.13, 17.40, 14.22},
      {0.06, 2.62, 0.31, 0.07, 0.12, 0.38, 0.22, 0.08, 0.27, 0.08, 0.29, 0.05, 0.93, 0.22, 0.12},
      {0.47, 0.63, 2.54, 0.20, 0.06, 0.64, 1.34, 0.06, 0.37, 0.09, 0.25, 0.07, 0.19, 0.87, 0.17},
      {0.07, 0.69, 0.24, 0.39, 0.13, 0.49, 0.13, 0.04, 0.21, 0.07, 0.14, 0.08, 0.35, 0.15, 0.06},
      {1.02, 2.26, 18.69, 0.49, 0.04, 4.41, 17.26, 0.21, 0.66, 0.20, 4.00, 0.34, 2.15, 11.49, 0.46},
  });
}

inline ftsbench::evaluation::MetricTable heston_plus_table() {
  return make_table({
      {6.29, 1.29, 0.32, 2.83, 0.09, 4.44, 0.25, 0.94, 9.05, 1.28, 3.97, 0.17, 4.69, 0.60, 0.21},
      {24.91, 22.61, 19.55, 5.52, 3.73, 22.97, 4.78, 24.59, 17.28, 23.00, 10.92, 24.29, 9.16, 3.48, 3.72},
      {0.47, 0.05, 0.65, 0.02, 0.18, 0.10, 0.05, 0.04, 0.04, 0.05, 0.40, 0.03, 0.06, 0.20, 0.03},
      {6.70, 6.00, 5.00, 1.30, 0.84, 6.06, 1.10, 6.46, 4.52, 6.07, 2.48, 6.37, 2.05, 0.79, 0.88},
      {0.82, 3.34, 10.67, 0.08, 2.25, 1.17, 0.14, 2.22, 0.12, 3.15, 2.82, 0.17, 0.21, 0.71, 0.04},
      {10.40, 10.29, 11.64, 14.65, 9.04, 9.22, 9.03, 7.43, 13.59, 10.90, 3.46, 9.41, 4.18, 11.57, 7.73},
      {19.53, 18.20, 9.33, 3.77, 2.74, 6.79, 3.61, 20.10, 2.38, 8.20, 3.40, 14.63, 3.69, 3.45, 4.22},
      {1.40, 0.49, 2.19, 0.19, 0.55, 0.57, 0.17, 0.28, 0.21, 0.31, 0.30, 0.16, 0.24, 0.40, 0.24},
      {6.00, 4.36, 2.39, 1.18, 1.14, 1.91, 0.94, 4.92, 0.67, 2.02, 0.82, 3.55, 0.82, 0.90, 1.05},
      {6.99, 6.83, 10.63, 0.21, 2.23, 2.85, 0.43, 4.60, 0.38, 4.29, 1.57, 1.89, 0.57, 1.67, 0.82},
  });
}

struct ReferenceRank {
  std::string model;
  double ngarch_plus;
  double heston_plus;
  double combined;
};

inline const std::vector<ReferenceRank>& reference_ranks() {
  static const std::vector<ReferenceRank> r = {
      {"RCGAN", 3.0, 6.6, 4.80},   {"FSV_R", 6.6, 4.3, 5.45},    {"DCCT", 3.8, 7.9, 5.85},
      {"GMMN", 6.0, 5.9, 5.95},    {"FSV_C", 8.1, 4.4, 6.25},    {"COG", 3.9, 10.9, 7.40},
      {"DCCN", 4.1, 11.0, 7.55},   {"COG_R", 9.8, 6.3, 8.05},    {"FSV", 9.9, 6.7, 8.30},
      {"DCCN_R", 9.7, 7.3, 8.50},  {"DCCT_R", 11.4, 6.2, 8.80},  {"TimeGAN", 9.7, 10.5, 10.10},
      {"CoMeTS", 8.6, 14.3, 11.45}, {"CTNF", 12.6, 11.6, 12.10}, {"CTVAE", 12.8, 12.4, 12.60},
  };
  return r;
}

}  // namespace fixture
