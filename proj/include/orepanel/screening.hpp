#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace orepanel {

// Type-7 (linear interpolation) quantile of a sample; q in [0, 1].
double quantile_type7(std::vector<double> values, double q);

// Indices of values outside [Q1 - k*IQR, Q3 + k*IQR].
// Throws std::invalid_argument on fewer than 4 values.
std::vector<size_t> iqr_flag(const std::vector<double>& values, double k = 2.0);

struct EsdIteration {
  size_t index = 0;   // index into the original vector
  double r = 0;       // studentized deviate R_i
  double lambda = 0;  // critical value
};

struct EsdResult {
  int n_outliers = 0;
  std::vector<size_t> outlier_indices;   // the first n_outliers removal candidates
  std::vector<EsdIteration> iterations;  // one per tested candidate
};

// Generalized (sequential) extreme studentized deviate test.
// Requires n >= max_outliers + 2 and max_outliers >= 1.
EsdResult esd_test(const std::vector<double>& values, int max_outliers, double alpha = 0.10);

struct OutlierReport {
  std::string outcome;
  int flagged_count = 0;
  std::vector<size_t> confirmed_indices;
  double alpha = 0.10;
  std::vector<EsdIteration> iterations;
};

// IQR pre-flagging followed by ESD confirmation; returns indices to remove.
// max_outliers for the ESD stage is the IQR flag count.
OutlierReport screen_outcome(const std::vector<double>& values, const std::string& outcome_name,
                             double iqr_k = 2.0, double alpha = 0.10);

void write_outlier_report_csv(const std::string& path,
                              const std::vector<OutlierReport>& reports,
                              const std::vector<std::vector<std::string>>& removed_ids);

}  // namespace orepanel
