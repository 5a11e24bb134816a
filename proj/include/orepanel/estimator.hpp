#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orepanel/stacking.hpp"

namespace orepanel {

// Fixed-effect dimensions: per dimension, a dense group id per row.
struct FESpec {
  std::vector<std::vector<int>> dims;
  std::vector<int> n_groups;

  void add_dim(std::vector<int> group_ids);
  // Absorbed degrees of freedom: sum of group counts minus (dims - 1).
  long absorbed_dof() const;
};

// Compresses arbitrary keys to dense 0-based ids (first-seen order).
template <typename K>
std::vector<int> dense_ids(const std::vector<K>& keys) {
  std::vector<int> out(keys.size());
  std::map<K, int> seen;
  for (size_t i = 0; i < keys.size(); ++i) {
    auto [it, inserted] = seen.emplace(keys[i], static_cast<int>(seen.size()));
    out[i] = it->second;
  }
  return out;
}

// Alternating-projection demeaning of all columns; exact in one sweep for a
// single dimension. Throws on non-convergence, reporting the last delta.
void within_transform(Eigen::MatrixXd& m, const FESpec& fe, double tol = 1e-8,
                      int max_iter = 10000);

struct OlsFit {
  Eigen::VectorXd beta;       // for kept columns
  std::vector<int> kept;      // original column indices
  std::vector<int> dropped;   // collinear columns
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtx_inv;    // (Xk' Xk)^-1
};

// Least squares via column-pivoted QR; collinear columns dropped at the
// given pivot tolerance. Throws when no usable column remains.
OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double pivot_tol = 1e-10);

// CR1 cluster-robust sandwich. k_model counts kept regressors plus absorbed
// fixed-effect degrees of freedom. Throws on a single cluster.
Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& xk, const Eigen::VectorXd& residuals,
                             const std::vector<int>& cluster_ids, long k_model,
                             const Eigen::MatrixXd& xtx_inv);

// Two-way clustering by inclusion-exclusion, with a zero eigenvalue floor
// when the difference is indefinite.
Eigen::MatrixXd twoway_vcov(const Eigen::MatrixXd& xk, const Eigen::VectorXd& residuals,
                            const std::vector<int>& ids_a, const std::vector<int>& ids_b,
                            long k_model, const Eigen::MatrixXd& xtx_inv);

struct RegressionResult {
  std::string spec_name;
  std::string outcome;
  std::vector<std::string> terms;
  Eigen::VectorXd beta, se;
  Eigen::MatrixXd vcov;
  std::vector<std::string> dropped_collinear;
  std::vector<std::string> not_estimable;
  long n_obs = 0;
  int n_clusters_mine = 0;
  int n_clusters_tile = 0;  // 0 when clustering is mine-only
  double r2_within = 0;
  double r2_adjusted = 0;
  double ci_t_crit = 0;  // t critical value used for 95% CIs
  double baseline_mean = 0;  // pre-treatment treated-group mean (LPM reporting)

  double ci_low(int j) const { return beta[j] - ci_t_crit * se[j]; }
  double ci_high(int j) const { return beta[j] + ci_t_crit * se[j]; }
};

// Event-study coefficients for t in {T_neg..-1, 1..T_pos} (t = 0 omitted),
// absorbing event x period and event x tile effects, SEs double-clustered by
// mine and tile. Rows restricted to the given band.
RegressionResult event_study(const StackedDataset& stacked, const Window& window,
                             const std::string& outcome, Band band);

enum class DidDesign { Ordinary, Stacked };

// One term of an interacted treatment specification: name plus a dummy
// evaluated per stacked row (multiplied into treat_post).
struct HeterogeneityTerm {
  std::string name;
  std::function<double(const StackedRow&)> dummy;
};

struct HeterogeneitySpec {
  std::vector<HeterogeneityTerm> terms;

  static HeterogeneitySpec none();               // Treat
  static HeterogeneitySpec near_far();           // Treat x Near, Treat x Far
  static HeterogeneitySpec size_democracy();     // Treat, x Large, x Democracy, x Large x Democracy
  static HeterogeneitySpec democracy_autocracy();// Treat x Democracy, Treat x Autocracy
};

struct DidOptions {
  DidDesign design = DidDesign::Stacked;
  HeterogeneitySpec interactions = HeterogeneitySpec::none();
  std::string outcome = "log_urban";
  std::optional<Band> restrict_band;  // restricts the treatment group's band
  // ordinary design only:
  EventKind kind = EventKind::Opening;
  ControlRule control_rule = ControlRule::NotYetOpened;
};

// Stacked design: event x period + event x tile fixed effects, SEs
// double-clustered by mine and tile.
RegressionResult did_stacked(const StackedDataset& dataset, const HeterogeneitySpec& spec,
                             const std::string& outcome, std::optional<Band> band);

// Ordinary design: country x period + tile fixed effects on the unstacked
// panel, all periods, mine-only clustering.
RegressionResult did_ordinary(const Panel& panel, EventKind kind, ControlRule rule,
                              const HeterogeneitySpec& spec, const std::string& outcome,
                              std::optional<Band> band);

// Dispatcher over the two designs; the ordinary design reads `panel`, the
// stacked design reads `stacked`.
RegressionResult did(const Panel& panel, const StackedDataset& stacked,
                     const DidOptions& opts);

// Linear probability model on the any-conflict indicator (periods >= 2 only);
// reports the pre-treatment treated-group mean as baseline.
RegressionResult lpm_conflict(const StackedDataset& stacked, const HeterogeneitySpec& spec,
                              std::optional<Band> band);

void write_results_csv(const std::string& path, const std::vector<RegressionResult>& results);
void write_event_study_csv(const std::string& path, const RegressionResult& es);

}  // namespace orepanel
