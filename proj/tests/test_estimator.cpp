#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "orepanel/estimator.hpp"

using namespace orepanel;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// residuals from regressing each column on the full dummy matrix
MatrixXd dummy_residuals(const MatrixXd& m, const FESpec& fe) {
  long n = m.rows();
  int total = 0;
  for (int g : fe.n_groups) total += g;
  MatrixXd d = MatrixXd::Zero(n, total);
  int off = 0;
  for (size_t k = 0; k < fe.dims.size(); ++k) {
    for (long i = 0; i < n; ++i) d(i, off + fe.dims[k][i]) = 1.0;
    off += fe.n_groups[k];
  }
  // COD handles the rank deficiency of the stacked dummy blocks
  auto cod = d.completeOrthogonalDecomposition();
  MatrixXd out = m;
  for (int j = 0; j < m.cols(); ++j)
    out.col(j) = m.col(j) - d * cod.solve(m.col(j));
  return out;
}

// independent CR1 sandwich with an explicit double loop over the meat
MatrixXd brute_cr1(const MatrixXd& xk, const VectorXd& e, const std::vector<int>& ids,
                   long k_model, const MatrixXd& xtx_inv) {
  long n = xk.rows();
  int k = static_cast<int>(xk.cols());
  int g_count = 0;
  for (int id : ids) g_count = std::max(g_count, id + 1);
  MatrixXd meat = MatrixXd::Zero(k, k);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      if (ids[i] == ids[j]) meat += xk.row(i).transpose() * xk.row(j) * e[i] * e[j];
  double df = static_cast<double>(g_count) / (g_count - 1) *
              static_cast<double>(n - 1) / std::max<long>(1, n - k_model);
  return df * xtx_inv * meat * xtx_inv;
}

}  // namespace

TEST_CASE("dense_ids and absorbed_dof") {
  auto ids = dense_ids<std::string>({"b", "a", "b", "c", "a"});
  CHECK(ids == std::vector<int>({0, 1, 0, 2, 1}));

  FESpec fe;
  fe.add_dim({0, 0, 1, 1, 2});
  fe.add_dim({0, 1, 0, 1, 1});
  CHECK(fe.absorbed_dof() == 3 + 2 - 1);
}

TEST_CASE("within_transform: single dimension exact") {
  MatrixXd m(6, 2);
  m << 1, 10, 3, 20, 5, 30, 2, 1, 4, 2, 6, 3;
  FESpec fe;
  fe.add_dim({0, 0, 0, 1, 1, 1});
  within_transform(m, fe);
  CHECK(m(0, 0) == doctest::Approx(-2.0));
  CHECK(m(1, 0) == doctest::Approx(0.0));
  CHECK(m(2, 0) == doctest::Approx(2.0));
  CHECK(m(3, 1) == doctest::Approx(-1.0));
  // group means are zero
  CHECK(m.block(0, 0, 3, 2).colwise().sum().norm() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(m.block(3, 0, 3, 2).colwise().sum().norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("within_transform matches dummy-variable projection on crossed dims") {
  std::mt19937_64 gen(33);
  std::normal_distribution<double> nd(0, 1);
  std::uniform_int_distribution<int> g1(0, 11), g2(0, 7);
  long n = 300;
  MatrixXd m(n, 3);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = nd(gen);
  FESpec fe;
  std::vector<int> a(n), b(n);
  for (long i = 0; i < n; ++i) {
    a[i] = g1(gen);
    b[i] = g2(gen);
  }
  fe.add_dim(a);
  fe.add_dim(b);

  MatrixXd ref = dummy_residuals(m, fe);
  MatrixXd got = m;
  within_transform(got, fe);
  CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("within_transform: demeaning is idempotent") {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd(0, 1);
  MatrixXd m(100, 2);
  for (long i = 0; i < 100; ++i) {
    m(i, 0) = nd(gen);
    m(i, 1) = nd(gen);
  }
  FESpec fe;
  std::vector<int> a(100), b(100);
  for (long i = 0; i < 100; ++i) {
    a[i] = static_cast<int>(i % 10);
    b[i] = static_cast<int>(i / 20);
  }
  fe.add_dim(a);
  fe.add_dim(b);
  within_transform(m, fe);
  MatrixXd again = m;
  within_transform(again, fe);
  CHECK((again - m).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ols: exact fit and collinear column drop") {
  MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  VectorXd y(4);
  y << 2, 4, 6, 8;
  auto fit = ols(x, y);
  CHECK(fit.beta[0] == doctest::Approx(2.0));
  CHECK(fit.residuals.norm() == doctest::Approx(0.0).epsilon(1e-12));

  // duplicated column: exactly one survives, fitted values unchanged
  MatrixXd x2(6, 3);
  VectorXd y2(6);
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd(0, 1);
  for (int i = 0; i < 6; ++i) {
    x2(i, 0) = nd(gen);
    x2(i, 1) = x2(i, 0);
    x2(i, 2) = nd(gen);
    y2[i] = nd(gen);
  }
  auto fit2 = ols(x2, y2);
  CHECK(fit2.kept.size() == 2);
  CHECK(fit2.dropped.size() == 1);
  // columns 0 and 1 are interchangeable; 2 must be kept
  CHECK((fit2.dropped[0] == 0 || fit2.dropped[0] == 1));

  MatrixXd just2(6, 2);
  just2.col(0) = x2.col(0);
  just2.col(1) = x2.col(2);
  auto ref = ols(just2, y2);
  CHECK((fit2.residuals - ref.residuals).norm() < 1e-10);
}

TEST_CASE("ols matches normal equations on random data") {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> nd(0, 1);
  MatrixXd x(80, 4);
  VectorXd y(80);
  for (int i = 0; i < 80; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = nd(gen);
    y[i] = nd(gen);
  }
  auto fit = ols(x, y);
  VectorXd ref = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  CHECK((fit.beta - ref).cwiseAbs().maxCoeff() < 1e-9);
  // xtx_inv really is the inverse
  MatrixXd eye = fit.xtx_inv * (x.transpose() * x);
  CHECK((eye - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("ols throws when everything is collinear with nothing") {
  MatrixXd x = MatrixXd::Zero(5, 2);
  VectorXd y = VectorXd::Ones(5);
  CHECK_THROWS(ols(x, y));
}

TEST_CASE("cluster_vcov: one observation per cluster equals HC1") {
  std::mt19937_64 gen(25);
  std::normal_distribution<double> nd(0, 1);
  long n = 60;
  MatrixXd x(n, 2);
  VectorXd y(n);
  for (long i = 0; i < n; ++i) {
    x(i, 0) = nd(gen);
    x(i, 1) = nd(gen);
    y[i] = x(i, 0) + nd(gen);
  }
  auto fit = ols(x, y);
  std::vector<int> ids(n);
  for (long i = 0; i < n; ++i) ids[i] = static_cast<int>(i);
  MatrixXd v = cluster_vcov(x, fit.residuals, ids, 2, fit.xtx_inv);

  MatrixXd meat = MatrixXd::Zero(2, 2);
  for (long i = 0; i < n; ++i)
    meat += x.row(i).transpose() * x.row(i) * fit.residuals[i] * fit.residuals[i];
  double hc1 = static_cast<double>(n) / (n - 2);
  MatrixXd ref = hc1 * fit.xtx_inv * meat * fit.xtx_inv;
  CHECK((v - ref).cwiseAbs().maxCoeff() < 1e-14 * ref.norm());
}

TEST_CASE("cluster_vcov: scale equivariance and brute-force agreement") {
  std::mt19937_64 gen(26);
  std::normal_distribution<double> nd(0, 1);
  std::uniform_int_distribution<int> cl(0, 9);
  long n = 120;
  MatrixXd x(n, 2);
  VectorXd y(n);
  std::vector<int> ids(n);
  for (long i = 0; i < n; ++i) {
    x(i, 0) = nd(gen);
    x(i, 1) = nd(gen);
    ids[i] = cl(gen);
    y[i] = 0.5 * x(i, 0) + 0.3 * ids[i] + nd(gen);
  }
  auto fit = ols(x, y);
  MatrixXd v = cluster_vcov(x, fit.residuals, ids, 2, fit.xtx_inv);
  MatrixXd ref = brute_cr1(x, fit.residuals, ids, 2, fit.xtx_inv);
  CHECK((v - ref).cwiseAbs().maxCoeff() < 1e-10 * (1 + ref.norm()));

  // scaling y by 10 scales the vcov by 100
  auto fit10 = ols(x, VectorXd(10 * y));
  MatrixXd v10 = cluster_vcov(x, fit10.residuals, ids, 2, fit10.xtx_inv);
  CHECK((v10 - 100 * v).cwiseAbs().maxCoeff() < 1e-8 * v10.norm());

  // single cluster is an error
  std::vector<int> one(n, 0);
  CHECK_THROWS(cluster_vcov(x, fit.residuals, one, 2, fit.xtx_inv));
}

TEST_CASE("twoway_vcov identities") {
  std::mt19937_64 gen(27);
  std::normal_distribution<double> nd(0, 1);
  std::uniform_int_distribution<int> ca(0, 7), cb(0, 5);
  long n = 150;
  MatrixXd x(n, 2);
  VectorXd y(n);
  std::vector<int> a(n), b(n), singleton(n);
  for (long i = 0; i < n; ++i) {
    x(i, 0) = nd(gen);
    x(i, 1) = nd(gen);
    a[i] = ca(gen);
    b[i] = cb(gen);
    singleton[i] = static_cast<int>(i);
    y[i] = x(i, 0) - 0.4 * x(i, 1) + 0.2 * a[i] + nd(gen);
  }
  auto fit = ols(x, y);

  // V(A, A) == V(A) bitwise
  MatrixXd va = cluster_vcov(x, fit.residuals, a, 2, fit.xtx_inv);
  MatrixXd vaa = twoway_vcov(x, fit.residuals, a, a, 2, fit.xtx_inv);
  CHECK((vaa - va).cwiseAbs().maxCoeff() == 0.0);

  // singleton second dimension reduces to one-way
  MatrixXd vsing = twoway_vcov(x, fit.residuals, a, singleton, 2, fit.xtx_inv);
  CHECK((vsing - va).cwiseAbs().maxCoeff() < 1e-12 * (1 + va.norm()));

  // inclusion-exclusion against independently computed pieces
  MatrixXd vb = brute_cr1(x, fit.residuals, b, 2, fit.xtx_inv);
  std::vector<int> inter(n);
  for (long i = 0; i < n; ++i) inter[i] = a[i] * 6 + b[i];
  inter = dense_ids(inter);
  MatrixXd vab = brute_cr1(x, fit.residuals, inter, 2, fit.xtx_inv);
  MatrixXd ref = brute_cr1(x, fit.residuals, a, 2, fit.xtx_inv) + vb - vab;
  MatrixXd v2 = twoway_vcov(x, fit.residuals, a, b, 2, fit.xtx_inv);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(ref);
  if (es.eigenvalues().minCoeff() >= 0)
    CHECK((v2 - ref).cwiseAbs().maxCoeff() < 1e-10 * (1 + ref.norm()));
  // always symmetric PSD
  Eigen::SelfAdjointEigenSolver<MatrixXd> es2(v2);
  CHECK(es2.eigenvalues().minCoeff() >= -1e-12);
}

namespace {

StackedRow srow(int event_id, const std::string& tile, long dep, int period, int rel,
                int treated, double y, Band band = Band::Near) {
  StackedRow r;
  r.event_id = event_id;
  r.tile_id = tile;
  r.deposit_id = dep;
  r.period = period;
  r.rel_time = rel;
  r.treat_group = treated;
  r.treat_post = treated && rel >= 1;
  r.band = band;
  r.log_urban = y;
  r.conflict_any = y > 0.5 ? 1 : 0;
  r.conflict_available = period >= 2;
  return r;
}

}  // namespace

TEST_CASE("did_stacked: saturated two-by-two equals the difference in differences") {
  StackedDataset ds;
  // treated: 1.0 -> 3.5 ; control: 0.5 -> 1.0  => DiD = 2.5 - 0.5 = 2.0
  // two tiles per cell so mine/tile clustering has >1 cluster
  for (int rep = 0; rep < 2; ++rep) {
    std::string t = "tt" + std::to_string(rep), c = "tc" + std::to_string(rep);
    ds.rows.push_back(srow(0, t, 1 + rep, 5, 0, 1, 1.0));
    ds.rows.push_back(srow(0, t, 1 + rep, 6, 1, 1, 3.5));
    ds.rows.push_back(srow(0, c, 10 + rep, 5, 0, 0, 0.5));
    ds.rows.push_back(srow(0, c, 10 + rep, 6, 1, 0, 1.0));
  }
  auto res = did_stacked(ds, HeterogeneitySpec::none(), "log_urban", std::nullopt);
  REQUIRE(res.terms.size() == 1);
  CHECK(res.beta[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(res.n_obs == 8);
  CHECK(res.n_clusters_mine == 4);
  CHECK(res.n_clusters_tile == 4);
  CHECK(res.se[0] == doctest::Approx(0.0).epsilon(1e-8));

  // constant shift leaves the coefficient unchanged
  StackedDataset shifted = ds;
  for (auto& r : shifted.rows) r.log_urban += 7.0;
  auto res2 = did_stacked(shifted, HeterogeneitySpec::none(), "log_urban", std::nullopt);
  CHECK(res2.beta[0] == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("did_stacked: near/far heterogeneity recovered exactly") {
  StackedDataset ds;
  int dep = 0;
  for (int rep = 0; rep < 2; ++rep) {
    auto add = [&](Band band, double effect) {
      std::string t = "t" + std::to_string(dep);
      ds.rows.push_back(srow(0, t, dep, 5, 0, 1, 0.0, band));
      ds.rows.push_back(srow(0, t, dep, 6, 1, 1, effect, band));
      ++dep;
    };
    add(Band::Near, 1.0);
    add(Band::Far, 0.5);
    std::string c = "c" + std::to_string(rep);
    ds.rows.push_back(srow(0, c, 100 + rep, 5, 0, 0, 0.0, rep ? Band::Far : Band::Near));
    ds.rows.push_back(srow(0, c, 100 + rep, 6, 1, 0, 0.0, rep ? Band::Far : Band::Near));
  }
  auto res = did_stacked(ds, HeterogeneitySpec::near_far(), "log_urban", std::nullopt);
  REQUIRE(res.terms.size() == 2);
  CHECK(res.beta[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.beta[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("did_stacked: all-zero interaction is reported not estimable") {
  StackedDataset ds;
  for (int rep = 0; rep < 2; ++rep) {
    std::string t = "t" + std::to_string(rep), c = "c" + std::to_string(rep);
    // every deposit Small, every country autocratic
    ds.rows.push_back(srow(0, t, 1 + rep, 5, 0, 1, 1.0));
    ds.rows.push_back(srow(0, t, 1 + rep, 6, 1, 1, 2.0));
    ds.rows.push_back(srow(0, c, 10 + rep, 5, 0, 0, 0.0));
    ds.rows.push_back(srow(0, c, 10 + rep, 6, 1, 0, 0.0));
  }
  auto res = did_stacked(ds, HeterogeneitySpec::democracy_autocracy(), "log_urban",
                         std::nullopt);
  CHECK(res.not_estimable == std::vector<std::string>{"treat_x_democracy"});
  REQUIRE(res.terms.size() == 1);
  CHECK(res.terms[0] == "treat_x_autocracy");
  CHECK(res.beta[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("did_stacked: band restriction applies to treated rows only") {
  StackedDataset ds;
  int dep = 0;
  for (int rep = 0; rep < 2; ++rep) {
    auto add_t = [&](Band band, double effect) {
      std::string t = "t" + std::to_string(dep);
      ds.rows.push_back(srow(0, t, dep, 5, 0, 1, 0.0, band));
      ds.rows.push_back(srow(0, t, dep, 6, 1, 1, effect, band));
      ++dep;
    };
    add_t(Band::Near, 1.0);
    add_t(Band::Far, 0.25);
    // far-band control tiles must stay in sample under a Near restriction
    std::string c = "c" + std::to_string(rep);
    ds.rows.push_back(srow(0, c, 100 + rep, 5, 0, 0, 0.0, Band::Far));
    ds.rows.push_back(srow(0, c, 100 + rep, 6, 1, 0, 0.0, Band::Far));
  }
  auto res = did_stacked(ds, HeterogeneitySpec::none(), "log_urban", Band::Near);
  CHECK(res.beta[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.n_obs == 2 * 2 + 4);  // near treated + all controls
}

TEST_CASE("event_study: zero-noise dynamic profile recovered exactly") {
  // profile relative to t = 0; beta_t should equal profile[t]
  std::map<int, double> profile{{-2, 0.1}, {-1, -0.05}, {0, 0.0}, {1, 0.8}, {2, 1.2}};
  StackedDataset ds;
  ds.window = {-2, 2};
  for (int k = 0; k < 3; ++k) {
    double tile_eff = 0.3 * k;
    for (int t = -2; t <= 2; ++t) {
      double period_eff = 0.05 * t * t;
      ds.rows.push_back(srow(0, "t" + std::to_string(k), k, 6 + t, t, 1,
                             tile_eff + period_eff + profile[t]));
      ds.rows.push_back(srow(0, "c" + std::to_string(k), 100 + k, 6 + t, t, 0,
                             0.7 * k + period_eff));
    }
  }
  auto res = event_study(ds, {-2, 2}, "log_urban", Band::Near);
  REQUIRE(res.terms.size() == 4);  // -2, -1, 1, 2 (0 omitted)
  std::map<std::string, double> got;
  for (size_t j = 0; j < res.terms.size(); ++j) got[res.terms[j]] = res.beta[j];
  CHECK(got.at("t=-2") == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(got.at("t=-1") == doctest::Approx(-0.05).epsilon(1e-9));
  CHECK(got.at("t=1") == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(got.at("t=2") == doctest::Approx(1.2).epsilon(1e-9));
}

TEST_CASE("event_study: requires both pre and post support") {
  StackedDataset ds;
  for (int k = 0; k < 2; ++k) {
    ds.rows.push_back(srow(0, "t" + std::to_string(k), k, 5, 0, 1, 1.0));
    ds.rows.push_back(srow(0, "t" + std::to_string(k), k, 6, 1, 1, 2.0));
    ds.rows.push_back(srow(0, "c" + std::to_string(k), 100 + k, 5, 0, 0, 0.0));
    ds.rows.push_back(srow(0, "c" + std::to_string(k), 100 + k, 6, 1, 0, 0.0));
  }
  CHECK_THROWS(event_study(ds, {-5, 5}, "log_urban", Band::Near));
}

TEST_CASE("lpm_conflict: constant zero outcome gives zero effect and baseline") {
  StackedDataset ds;
  for (int rep = 0; rep < 2; ++rep) {
    std::string t = "t" + std::to_string(rep), c = "c" + std::to_string(rep);
    ds.rows.push_back(srow(0, t, 1 + rep, 5, 0, 1, 0.0));
    ds.rows.push_back(srow(0, t, 1 + rep, 6, 1, 1, 0.0));
    ds.rows.push_back(srow(0, c, 10 + rep, 5, 0, 0, 0.0));
    ds.rows.push_back(srow(0, c, 10 + rep, 6, 1, 0, 0.0));
  }
  for (auto& r : ds.rows) r.conflict_any = 0;
  auto res = lpm_conflict(ds, HeterogeneitySpec::none(), std::nullopt);
  CHECK(res.beta[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(res.baseline_mean == doctest::Approx(0.0));
  CHECK(res.spec_name == "lpm_conflict");
}

TEST_CASE("lpm_conflict: period-1 rows are excluded") {
  StackedDataset ds;
  for (int rep = 0; rep < 2; ++rep) {
    std::string t = "t" + std::to_string(rep), c = "c" + std::to_string(rep);
    ds.rows.push_back(srow(0, t, 1 + rep, 1, -1, 1, 0.0));  // period 1: no coverage
    ds.rows.push_back(srow(0, t, 1 + rep, 2, 0, 1, 0.0));
    ds.rows.push_back(srow(0, t, 1 + rep, 3, 1, 1, 0.0));
    ds.rows.push_back(srow(0, c, 10 + rep, 1, -1, 0, 0.0));
    ds.rows.push_back(srow(0, c, 10 + rep, 2, 0, 0, 0.0));
    ds.rows.push_back(srow(0, c, 10 + rep, 3, 1, 0, 0.0));
  }
  auto res = lpm_conflict(ds, HeterogeneitySpec::none(), std::nullopt);
  CHECK(res.n_obs == 8);  // 12 rows minus 4 period-1 rows
}
