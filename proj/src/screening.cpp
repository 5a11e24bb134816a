#include "orepanel/screening.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "orepanel/csv.hpp"
#include "orepanel/tquantile.hpp"

namespace orepanel {

double quantile_type7(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  double h = (values.size() - 1) * q;
  size_t lo = static_cast<size_t>(std::floor(h));
  size_t hi = std::min(lo + 1, values.size() - 1);
  double frac = h - lo;
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<size_t> iqr_flag(const std::vector<double>& values, double k) {
  if (values.size() < 4) throw std::invalid_argument("iqr_flag: need at least 4 values");
  double q1 = quantile_type7(values, 0.25);
  double q3 = quantile_type7(values, 0.75);
  double iqr = q3 - q1;
  double lo = q1 - k * iqr, hi = q3 + k * iqr;
  std::vector<size_t> out;
  for (size_t i = 0; i < values.size(); ++i)
    if (values[i] < lo || values[i] > hi) out.push_back(i);
  return out;
}

EsdResult esd_test(const std::vector<double>& values, int max_outliers, double alpha) {
  const int n = static_cast<int>(values.size());
  if (max_outliers < 1) throw std::invalid_argument("esd_test: max_outliers must be >= 1");
  if (n < max_outliers + 2) throw std::invalid_argument("esd_test: sample too small");

  EsdResult res;
  std::vector<double> x = values;
  std::vector<size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);

  for (int i = 1; i <= max_outliers; ++i) {
    int m = static_cast<int>(x.size());
    double mean = std::accumulate(x.begin(), x.end(), 0.0) / m;
    double ss = 0;
    for (double v : x) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / (m - 1));
    if (sd == 0) break;  // degenerate: remaining candidates are not outliers

    size_t argmax = 0;
    double best = -1;
    for (size_t j = 0; j < x.size(); ++j) {
      double dev = std::fabs(x[j] - mean);
      if (dev > best) {
        best = dev;
        argmax = j;
      }
    }
    double r = best / sd;

    double p = 1.0 - alpha / (2.0 * (n - i + 1));
    double t = student_t_quantile(p, n - i - 1);
    double lambda = (n - i) * t /
                    std::sqrt((n - i - 1 + t * t) * static_cast<double>(n - i + 1));

    res.iterations.push_back({idx[argmax], r, lambda});
    if (r > lambda) res.n_outliers = i;

    x.erase(x.begin() + argmax);
    idx.erase(idx.begin() + argmax);
  }
  for (int i = 0; i < res.n_outliers; ++i)
    res.outlier_indices.push_back(res.iterations[i].index);
  return res;
}

OutlierReport screen_outcome(const std::vector<double>& values, const std::string& outcome_name,
                             double iqr_k, double alpha) {
  OutlierReport rep;
  rep.outcome = outcome_name;
  rep.alpha = alpha;
  auto flagged = iqr_flag(values, iqr_k);
  rep.flagged_count = static_cast<int>(flagged.size());
  if (flagged.empty()) return rep;
  if (static_cast<size_t>(rep.flagged_count) + 2 > values.size()) return rep;

  auto esd = esd_test(values, rep.flagged_count, alpha);
  rep.iterations = esd.iterations;
  std::set<size_t> flag_set(flagged.begin(), flagged.end());
  for (size_t i : esd.outlier_indices)
    if (flag_set.count(i)) rep.confirmed_indices.push_back(i);
  return rep;
}

void write_outlier_report_csv(const std::string& path,
                              const std::vector<OutlierReport>& reports,
                              const std::vector<std::vector<std::string>>& removed_ids) {
  csv::Writer w(path);
  w.header({"outcome", "iteration", "R_i", "lambda_i", "removed_id"});
  for (size_t r = 0; r < reports.size(); ++r) {
    const auto& rep = reports[r];
    for (size_t i = 0; i < rep.iterations.size(); ++i) {
      bool confirmed = i < rep.confirmed_indices.size();
      std::string id = confirmed && r < removed_ids.size() && i < removed_ids[r].size()
                           ? removed_ids[r][i]
                           : "";
      w.row({rep.outcome, csv::fmt(static_cast<int>(i + 1)), csv::fmt(rep.iterations[i].r),
             csv::fmt(rep.iterations[i].lambda), id});
    }
  }
}

}  // namespace orepanel
