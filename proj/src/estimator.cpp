#include "orepanel/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "orepanel/csv.hpp"
#include "orepanel/tquantile.hpp"

namespace orepanel {

void FESpec::add_dim(std::vector<int> group_ids) {
  int ng = group_ids.empty() ? 0 : *std::max_element(group_ids.begin(), group_ids.end()) + 1;
  dims.push_back(std::move(group_ids));
  n_groups.push_back(ng);
}

long FESpec::absorbed_dof() const {
  long k = 0;
  for (int g : n_groups) k += g;
  return k - (static_cast<long>(n_groups.size()) - 1);
}

void within_transform(Eigen::MatrixXd& m, const FESpec& fe, double tol, int max_iter) {
  if (fe.dims.empty()) throw std::invalid_argument("within_transform: no FE dimension");
  const Eigen::Index n = m.rows();
  for (const auto& d : fe.dims)
    if (static_cast<Eigen::Index>(d.size()) != n)
      throw std::invalid_argument("within_transform: FE dimension length mismatch");

  const size_t ndims = fe.dims.size();
  std::vector<double> sum, cnt;
  double delta = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    delta = 0;
    for (size_t d = 0; d < ndims; ++d) {
      const auto& ids = fe.dims[d];
      const int ng = fe.n_groups[d];
      cnt.assign(ng, 0.0);
      for (Eigen::Index i = 0; i < n; ++i) cnt[ids[i]] += 1.0;
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        sum.assign(ng, 0.0);
        double* col = m.col(c).data();
        for (Eigen::Index i = 0; i < n; ++i) sum[ids[i]] += col[i];
        for (int g = 0; g < ng; ++g) {
          sum[g] /= cnt[g];
          delta = std::max(delta, std::fabs(sum[g]));
        }
        for (Eigen::Index i = 0; i < n; ++i) col[i] -= sum[ids[i]];
      }
    }
    if (ndims == 1 || delta < tol) return;
  }
  throw std::runtime_error("within_transform: no convergence, last delta = " +
                           std::to_string(delta));
}

OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double pivot_tol) {
  if (x.cols() == 0) throw std::invalid_argument("ols: no regressors");
  if (x.rows() != y.rows()) throw std::invalid_argument("ols: row mismatch");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(pivot_tol);
  const int rank = static_cast<int>(qr.rank());
  if (rank == 0) throw std::runtime_error("ols: not estimable (zero usable columns)");
  if (x.rows() <= rank) throw std::runtime_error("ols: n must exceed rank(X)");

  const auto& perm = qr.colsPermutation().indices();
  OlsFit fit;
  for (int j = 0; j < rank; ++j) fit.kept.push_back(perm[j]);
  for (int j = rank; j < x.cols(); ++j) fit.dropped.push_back(perm[j]);
  std::sort(fit.kept.begin(), fit.kept.end());
  std::sort(fit.dropped.begin(), fit.dropped.end());

  Eigen::MatrixXd xk(x.rows(), rank);
  for (int j = 0; j < rank; ++j) xk.col(j) = x.col(fit.kept[j]);
  fit.beta = xk.colPivHouseholderQr().solve(y);
  fit.residuals = y - xk * fit.beta;
  fit.xtx_inv = (xk.transpose() * xk)
                    .ldlt()
                    .solve(Eigen::MatrixXd::Identity(rank, rank));
  return fit;
}

namespace {

int count_groups(const std::vector<int>& ids) {
  int g = 0;
  for (int v : ids) g = std::max(g, v + 1);
  return g;
}

}  // namespace

Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& xk, const Eigen::VectorXd& residuals,
                             const std::vector<int>& cluster_ids, long k_model,
                             const Eigen::MatrixXd& xtx_inv) {
  const Eigen::Index n = xk.rows();
  const Eigen::Index k = xk.cols();
  if (static_cast<Eigen::Index>(cluster_ids.size()) != n)
    throw std::invalid_argument("cluster_vcov: cluster id length mismatch");
  const int g = count_groups(cluster_ids);
  if (g < 2) throw std::invalid_argument("cluster_vcov: need at least 2 clusters");

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(g, k);
  for (Eigen::Index i = 0; i < n; ++i)
    scores.row(cluster_ids[i]) += residuals[i] * xk.row(i);
  Eigen::MatrixXd meat = scores.transpose() * scores;

  double df_corr = static_cast<double>(n) - static_cast<double>(k_model);
  if (df_corr < 1) df_corr = 1;
  double scale = (static_cast<double>(g) / (g - 1.0)) * ((n - 1.0) / df_corr);
  return scale * xtx_inv * meat * xtx_inv;
}

Eigen::MatrixXd twoway_vcov(const Eigen::MatrixXd& xk, const Eigen::VectorXd& residuals,
                            const std::vector<int>& ids_a, const std::vector<int>& ids_b,
                            long k_model, const Eigen::MatrixXd& xtx_inv) {
  const int gb = count_groups(ids_b);
  std::vector<long> inter_key(ids_a.size());
  for (size_t i = 0; i < ids_a.size(); ++i)
    inter_key[i] = static_cast<long>(ids_a[i]) * gb + ids_b[i];
  auto ids_ab = dense_ids(inter_key);

  Eigen::MatrixXd va = cluster_vcov(xk, residuals, ids_a, k_model, xtx_inv);
  Eigen::MatrixXd vb = cluster_vcov(xk, residuals, ids_b, k_model, xtx_inv);
  Eigen::MatrixXd vab = cluster_vcov(xk, residuals, ids_ab, k_model, xtx_inv);
  Eigen::MatrixXd v = va + vb - vab;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
  if (es.eigenvalues().minCoeff() < 0) {
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    v = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  }
  return v;
}

namespace {

struct FitInput {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  FESpec fe;
  std::vector<int> cluster_mine;
  std::vector<int> cluster_tile;  // empty = mine-only clustering
  std::vector<std::string> term_names;
  std::vector<std::string> not_estimable;
  std::string spec_name, outcome;
  double baseline_mean = 0;
};

RegressionResult run_fe_regression(FitInput in) {
  RegressionResult res;
  res.spec_name = in.spec_name;
  res.outcome = in.outcome;
  res.not_estimable = in.not_estimable;
  res.baseline_mean = in.baseline_mean;
  res.n_obs = in.y.rows();

  const Eigen::Index n = in.y.rows();
  if (n == 0) throw std::runtime_error("regression: empty sample");
  double y_mean = in.y.mean();
  double sst_raw = (in.y.array() - y_mean).square().sum();

  Eigen::MatrixXd m(n, in.x.cols() + 1);
  m.leftCols(in.x.cols()) = in.x;
  m.col(in.x.cols()) = in.y;
  within_transform(m, in.fe);
  Eigen::MatrixXd xd = m.leftCols(in.x.cols());
  Eigen::VectorXd yd = m.col(in.x.cols());

  OlsFit fit = ols(xd, yd);
  for (int j : fit.dropped) res.dropped_collinear.push_back(in.term_names[j]);
  for (int j : fit.kept) res.terms.push_back(in.term_names[j]);

  Eigen::MatrixXd xk(n, fit.kept.size());
  for (size_t j = 0; j < fit.kept.size(); ++j) xk.col(j) = xd.col(fit.kept[j]);

  long k_model = static_cast<long>(fit.kept.size()) + in.fe.absorbed_dof();
  res.n_clusters_mine = count_groups(in.cluster_mine);
  int df_clusters;
  if (in.cluster_tile.empty()) {
    res.vcov = cluster_vcov(xk, fit.residuals, in.cluster_mine, k_model, fit.xtx_inv);
    df_clusters = res.n_clusters_mine;
  } else {
    res.n_clusters_tile = count_groups(in.cluster_tile);
    res.vcov = twoway_vcov(xk, fit.residuals, in.cluster_mine, in.cluster_tile, k_model,
                           fit.xtx_inv);
    df_clusters = std::min(res.n_clusters_mine, res.n_clusters_tile);
  }
  res.beta = fit.beta;
  res.se.resize(fit.beta.size());
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j)
    res.se[j] = std::sqrt(std::max(0.0, res.vcov(j, j)));
  res.ci_t_crit = df_clusters >= 2 ? student_t_quantile(0.975, df_clusters - 1.0) : 0.0;

  double ssr = fit.residuals.squaredNorm();
  double sst_dm = yd.squaredNorm();
  res.r2_within = sst_dm > 0 ? 1.0 - ssr / sst_dm : 0.0;
  double denom = static_cast<double>(n) - static_cast<double>(k_model);
  if (denom >= 1 && sst_raw > 0 && n > 1)
    res.r2_adjusted = 1.0 - (ssr / denom) / (sst_raw / (n - 1.0));
  return res;
}

}  // namespace

HeterogeneitySpec HeterogeneitySpec::none() {
  HeterogeneitySpec s;
  s.terms.push_back({"treat", [](const StackedRow&) { return 1.0; }});
  return s;
}

HeterogeneitySpec HeterogeneitySpec::near_far() {
  HeterogeneitySpec s;
  s.terms.push_back(
      {"treat_x_near", [](const StackedRow& r) { return r.band == Band::Near ? 1.0 : 0.0; }});
  s.terms.push_back(
      {"treat_x_far", [](const StackedRow& r) { return r.band == Band::Far ? 1.0 : 0.0; }});
  return s;
}

HeterogeneitySpec HeterogeneitySpec::size_democracy() {
  HeterogeneitySpec s;
  s.terms.push_back({"treat", [](const StackedRow&) { return 1.0; }});
  s.terms.push_back({"treat_x_large", [](const StackedRow& r) {
                       return r.size_class == SizeClass::Large ? 1.0 : 0.0;
                     }});
  s.terms.push_back(
      {"treat_x_democracy", [](const StackedRow& r) { return r.democracy ? 1.0 : 0.0; }});
  s.terms.push_back({"treat_x_large_x_democracy", [](const StackedRow& r) {
                       return (r.size_class == SizeClass::Large && r.democracy) ? 1.0 : 0.0;
                     }});
  return s;
}

HeterogeneitySpec HeterogeneitySpec::democracy_autocracy() {
  HeterogeneitySpec s;
  s.terms.push_back(
      {"treat_x_democracy", [](const StackedRow& r) { return r.democracy ? 1.0 : 0.0; }});
  s.terms.push_back(
      {"treat_x_autocracy", [](const StackedRow& r) { return r.democracy ? 0.0 : 1.0; }});
  return s;
}

RegressionResult event_study(const StackedDataset& stacked, const Window& window,
                             const std::string& outcome, Band band) {
  std::vector<const StackedRow*> rows;
  const bool conflict = outcome == "conflict_any";
  for (const auto& r : stacked.rows) {
    if (r.band != band) continue;
    if (conflict && !r.conflict_available) continue;
    rows.push_back(&r);
  }
  if (rows.empty()) throw std::runtime_error("event_study: empty sample");

  std::vector<int> rel_times;
  for (int t = window.t_neg; t <= window.t_pos; ++t)
    if (t != 0) rel_times.push_back(t);

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, rel_times.size());
  Eigen::VectorXd y(n);
  std::vector<long> ep_key(n), mine_key(n);
  std::vector<std::string> tile_key(n);
  bool any_pre = false, any_post = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = *rows[i];
    y[i] = stacked_outcome_value(r, outcome);
    if (r.treat_group) {
      for (size_t j = 0; j < rel_times.size(); ++j)
        if (r.rel_time == rel_times[j]) {
          x(i, j) = 1.0;
          (rel_times[j] < 0 ? any_pre : any_post) = true;
        }
    }
    ep_key[i] = static_cast<long>(r.event_id) * 64 + (r.period + 16);
    mine_key[i] = r.deposit_id;
    tile_key[i] = std::to_string(r.event_id) + "|" + r.tile_id;
  }
  if (!any_pre || !any_post)
    throw std::runtime_error("event_study: no pre or post treated support");

  FitInput in;
  in.x = std::move(x);
  in.y = std::move(y);
  in.fe.add_dim(dense_ids(ep_key));
  in.fe.add_dim(dense_ids(tile_key));  // event x tile
  in.cluster_mine = dense_ids(mine_key);
  std::vector<std::string> plain_tiles(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) plain_tiles[i] = rows[i]->tile_id;
  in.cluster_tile = dense_ids(plain_tiles);
  for (int t : rel_times) in.term_names.push_back("t=" + std::to_string(t));
  in.spec_name = std::string("event_study_") + band_name(band);
  in.outcome = outcome;
  return run_fe_regression(std::move(in));
}

RegressionResult did_stacked(const StackedDataset& dataset, const HeterogeneitySpec& spec,
                             const std::string& outcome, std::optional<Band> band) {
  const bool conflict = outcome == "conflict_any";
  std::vector<const StackedRow*> rows;
  for (const auto& r : dataset.rows) {
    if (conflict && !r.conflict_available) continue;
    if (band && r.treat_group && r.band != *band) continue;
    rows.push_back(&r);
  }
  if (rows.empty()) throw std::runtime_error("did_stacked: empty sample");

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, spec.terms.size());
  Eigen::VectorXd y(n);
  std::vector<long> ep_key(n), mine_key(n);
  std::vector<std::string> etile_key(n), tile_key(n);
  double base_sum = 0;
  long base_n = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = *rows[i];
    y[i] = stacked_outcome_value(r, outcome);
    for (size_t j = 0; j < spec.terms.size(); ++j)
      x(i, j) = r.treat_post ? spec.terms[j].dummy(r) : 0.0;
    ep_key[i] = static_cast<long>(r.event_id) * 64 + (r.period + 16);
    etile_key[i] = std::to_string(r.event_id) + "|" + r.tile_id;
    mine_key[i] = r.deposit_id;
    tile_key[i] = r.tile_id;
    if (r.treat_group && r.rel_time <= 0) {
      base_sum += y[i];
      ++base_n;
    }
  }

  // interaction categories with no treated observations are not estimable
  FitInput in;
  std::vector<Eigen::Index> keep_cols;
  for (size_t j = 0; j < spec.terms.size(); ++j) {
    if (x.col(j).cwiseAbs().sum() == 0.0)
      in.not_estimable.push_back(spec.terms[j].name);
    else {
      keep_cols.push_back(static_cast<Eigen::Index>(j));
      in.term_names.push_back(spec.terms[j].name);
    }
  }
  Eigen::MatrixXd xk(n, keep_cols.size());
  for (size_t j = 0; j < keep_cols.size(); ++j) xk.col(j) = x.col(keep_cols[j]);

  in.x = std::move(xk);
  in.y = std::move(y);
  in.fe.add_dim(dense_ids(ep_key));
  in.fe.add_dim(dense_ids(etile_key));
  in.cluster_mine = dense_ids(mine_key);
  in.cluster_tile = dense_ids(tile_key);
  in.spec_name = "did_stacked";
  in.outcome = outcome;
  in.baseline_mean = base_n > 0 ? base_sum / base_n : 0.0;
  return run_fe_regression(std::move(in));
}

RegressionResult did_ordinary(const Panel& panel, EventKind kind, ControlRule rule,
                              const HeterogeneitySpec& spec, const std::string& outcome,
                              std::optional<Band> band) {
  const MineStatus treated_status =
      kind == EventKind::Opening ? MineStatus::Opening : MineStatus::Closing;
  const bool conflict = outcome == "conflict_any";

  std::vector<const PanelObservation*> rows;
  std::vector<int> treat_post;
  for (const auto& r : panel.rows) {
    if (conflict && !r.conflict_available) continue;
    bool treated = r.status == treated_status && r.event_period > 0;
    bool control = false;
    switch (rule) {
      case ControlRule::NotYetOpened:
        control = r.status == MineStatus::NotYetOpened;
        break;
      case ControlRule::LateTreated:
        control = false;  // staggered treated serve as their own pre-period controls
        break;
      case ControlRule::Continuous:
        control = r.status == MineStatus::Continuous;
        break;
    }
    if (!treated && !control) continue;
    if (band && treated && r.band != *band) continue;
    int post = 0;
    if (treated)
      post = (kind == EventKind::Opening ? r.period >= r.event_period
                                         : r.period > r.event_period)
                 ? 1
                 : 0;
    rows.push_back(&r);
    treat_post.push_back(post);
  }
  if (rows.empty()) throw std::runtime_error("did_ordinary: empty sample");

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, spec.terms.size());
  Eigen::VectorXd y(n);
  std::vector<std::string> cp_key(n), tile_key(n);
  std::vector<long> mine_key(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = *rows[i];
    y[i] = outcome_value(r, outcome);
    StackedRow view;  // dummy-evaluation view of the panel row
    view.band = r.band;
    view.size_class = r.size_class;
    view.democracy = r.democracy;
    for (size_t j = 0; j < spec.terms.size(); ++j)
      x(i, j) = treat_post[i] ? spec.terms[j].dummy(view) : 0.0;
    cp_key[i] = r.country + "|" + std::to_string(r.period);
    tile_key[i] = r.tile_id;
    mine_key[i] = r.deposit_id;
  }

  FitInput in;
  std::vector<Eigen::Index> keep_cols;
  for (size_t j = 0; j < spec.terms.size(); ++j) {
    if (x.col(j).cwiseAbs().sum() == 0.0)
      in.not_estimable.push_back(spec.terms[j].name);
    else {
      keep_cols.push_back(static_cast<Eigen::Index>(j));
      in.term_names.push_back(spec.terms[j].name);
    }
  }
  Eigen::MatrixXd xk(n, keep_cols.size());
  for (size_t j = 0; j < keep_cols.size(); ++j) xk.col(j) = x.col(keep_cols[j]);

  in.x = std::move(xk);
  in.y = std::move(y);
  in.fe.add_dim(dense_ids(cp_key));
  in.fe.add_dim(dense_ids(tile_key));
  in.cluster_mine = dense_ids(mine_key);
  in.spec_name = "did_ordinary";
  in.outcome = outcome;
  return run_fe_regression(std::move(in));
}

RegressionResult did(const Panel& panel, const StackedDataset& stacked,
                     const DidOptions& opts) {
  if (opts.design == DidDesign::Ordinary)
    return did_ordinary(panel, opts.kind, opts.control_rule, opts.interactions, opts.outcome,
                        opts.restrict_band);
  return did_stacked(stacked, opts.interactions, opts.outcome, opts.restrict_band);
}

RegressionResult lpm_conflict(const StackedDataset& stacked, const HeterogeneitySpec& spec,
                              std::optional<Band> band) {
  RegressionResult res = did_stacked(stacked, spec, "conflict_any", band);
  res.spec_name = "lpm_conflict";
  return res;
}

void write_results_csv(const std::string& path, const std::vector<RegressionResult>& results) {
  csv::Writer w(path);
  w.header({"spec", "outcome", "term", "beta", "se", "ci_low", "ci_high", "n",
            "clusters_mine", "clusters_tile", "r2_adj", "baseline_mean"});
  for (const auto& r : results) {
    for (size_t j = 0; j < r.terms.size(); ++j) {
      int jj = static_cast<int>(j);
      w.row({r.spec_name, r.outcome, r.terms[j], csv::fmt(r.beta[jj]), csv::fmt(r.se[jj]),
             csv::fmt(r.ci_low(jj)), csv::fmt(r.ci_high(jj)), csv::fmt(r.n_obs),
             csv::fmt(r.n_clusters_mine), csv::fmt(r.n_clusters_tile),
             csv::fmt(r.r2_adjusted), csv::fmt(r.baseline_mean)});
    }
    for (const auto& t : r.not_estimable)
      w.row({r.spec_name, r.outcome, t, "", "", "", "", csv::fmt(r.n_obs),
             csv::fmt(r.n_clusters_mine), csv::fmt(r.n_clusters_tile),
             csv::fmt(r.r2_adjusted), csv::fmt(r.baseline_mean)});
  }
}

void write_event_study_csv(const std::string& path, const RegressionResult& es) {
  csv::Writer w(path);
  w.header({"rel_time", "beta", "ci_low", "ci_high"});
  for (size_t j = 0; j < es.terms.size(); ++j) {
    int jj = static_cast<int>(j);
    // term names are "t=<rel>"
    w.row({es.terms[j].substr(2), csv::fmt(es.beta[jj]), csv::fmt(es.ci_low(jj)),
           csv::fmt(es.ci_high(jj))});
  }
}

}  // namespace orepanel
