#include "orepanel/panel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "orepanel/csv.hpp"
#include "orepanel/estimator.hpp"
#include "orepanel/screening.hpp"
#include "orepanel/tquantile.hpp"

namespace orepanel {

std::vector<CountryMeta> read_country_csv(const std::string& path) {
  auto t = csv::read_file(path);
  int c_c = t.require_col("country"), c_p = t.require_col("polity2_mean");
  std::vector<CountryMeta> out;
  for (const auto& r : t.rows) {
    CountryMeta m;
    m.country = r[c_c];
    m.polity2_mean = std::stod(r[c_p]);
    for (size_t i = 0; i < t.header.size(); ++i) {
      if (static_cast<int>(i) == c_c || static_cast<int>(i) == c_p) continue;
      if (!r[i].empty()) m.covariates[t.header[i]] = std::stod(r[i]);
    }
    out.push_back(std::move(m));
  }
  return out;
}

void write_country_csv(const std::string& path, const std::vector<CountryMeta>& rows) {
  std::set<std::string> extra;
  for (const auto& m : rows)
    for (const auto& [k, v] : m.covariates) extra.insert(k);
  std::vector<std::string> hdr = {"country", "polity2_mean"};
  hdr.insert(hdr.end(), extra.begin(), extra.end());
  csv::Writer w(path);
  w.header(hdr);
  for (const auto& m : rows) {
    std::vector<std::string> f = {m.country, csv::fmt(m.polity2_mean)};
    for (const auto& k : extra) {
      auto it = m.covariates.find(k);
      f.push_back(it == m.covariates.end() ? "" : csv::fmt(it->second));
    }
    w.row(f);
  }
}

Panel assemble(const std::vector<Assignment>& assignments, const StatusMap& statuses,
               const std::vector<OutcomeRow>& outcomes,
               const std::vector<Deposit>& deposits,
               const std::vector<CountryMeta>& country_meta, const PeriodCalendar& cal) {
  std::map<std::pair<std::string, int>, const OutcomeRow*> outcome_idx;
  for (const auto& o : outcomes) {
    auto [it, inserted] = outcome_idx.emplace(std::make_pair(o.tile_id, o.period), &o);
    if (!inserted)
      throw std::runtime_error("duplicate outcome row for (" + o.tile_id + ", " +
                               std::to_string(o.period) + ")");
  }
  std::map<long, const Deposit*> dep_idx;
  for (const auto& d : deposits) dep_idx[d.deposit_id] = &d;
  std::map<std::string, bool> democ;
  for (const auto& m : country_meta) democ[m.country] = m.polity2_mean > 0;

  Panel panel;
  std::set<std::pair<std::string, int>> seen;
  for (const auto& a : assignments) {
    if (a.dropped_confounded) {
      ++panel.report.dropped_confounded;
      continue;
    }
    if (!seen.insert({a.tile_id, a.period}).second)
      throw std::runtime_error("duplicate (tile, period) assignment: " + a.tile_id + ", " +
                               std::to_string(a.period));
    auto st = statuses.find(a.deposit_id);
    if (st == statuses.end()) {
      ++panel.report.missing_status;
      continue;
    }
    auto oc = outcome_idx.find({a.tile_id, a.period});
    if (oc == outcome_idx.end()) {
      ++panel.report.missing_outcome;
      continue;
    }
    auto dep = dep_idx.find(a.deposit_id);
    if (dep == dep_idx.end()) {
      ++panel.report.missing_status;
      continue;
    }
    auto dm = democ.find(dep->second->country);
    if (dm == democ.end()) {
      ++panel.report.missing_country;
      continue;
    }
    PanelObservation r;
    r.tile_id = a.tile_id;
    r.deposit_id = a.deposit_id;
    r.country = dep->second->country;
    r.period = a.period;
    r.status = st->second.status;
    r.event_period = st->second.event_period;
    r.event_kind = st->second.event_kind;
    r.band = a.band;
    r.distance_m = a.distance_m;
    r.log_urban = oc->second->log_urban;
    r.log_crop = oc->second->log_crop;
    r.wealth_z = oc->second->wealth_raw;  // standardized below
    r.conflict_count = oc->second->conflict_count;
    r.conflict_any = oc->second->conflict_count >= 1 ? 1 : 0;
    r.conflict_available = a.period >= 2;
    r.size_class = dep->second->size_class;
    r.democracy = dm->second;
    panel.rows.push_back(std::move(r));
  }
  panel.report.rows = static_cast<long>(panel.rows.size());

  // z-score wealth over the full estimation sample
  if (panel.rows.size() >= 2) {
    std::vector<double> w(panel.rows.size());
    for (size_t i = 0; i < panel.rows.size(); ++i) w[i] = panel.rows[i].wealth_z;
    double mean = std::accumulate(w.begin(), w.end(), 0.0) / w.size();
    double ss = 0;
    for (double v : w) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / (w.size() - 1));
    if (sd > 0)
      for (auto& r : panel.rows) r.wealth_z = (r.wealth_z - mean) / sd;
  }
  return panel;
}

double outcome_value(const PanelObservation& r, const std::string& outcome) {
  if (outcome == "log_urban") return r.log_urban;
  if (outcome == "log_crop") return r.log_crop;
  if (outcome == "wealth_z") return r.wealth_z;
  if (outcome == "conflict_any") return r.conflict_any;
  throw std::invalid_argument("unknown outcome: " + outcome);
}

std::vector<BinMean> distance_bin_means(const Panel& panel, const std::string& outcome,
                                        double bin_width_m,
                                        const std::vector<int>& periods) {
  if (panel.rows.empty()) throw std::invalid_argument("distance_bin_means: empty panel");
  const int n_bins = static_cast<int>(std::ceil(40000.0 / bin_width_m));

  struct Cell {
    std::vector<double> values;
    std::vector<long> mines;
  };
  std::map<std::tuple<int, int, int>, Cell> cells;  // (status, bin, period)
  std::set<int> statuses_seen;
  for (const auto& r : panel.rows) {
    if (std::find(periods.begin(), periods.end(), r.period) == periods.end()) continue;
    int bin = static_cast<int>(r.distance_m / bin_width_m);
    if (bin >= n_bins) bin = n_bins - 1;  // 40 km boundary falls in the last bin
    auto& c = cells[{static_cast<int>(r.status), bin, r.period}];
    c.values.push_back(outcome_value(r, outcome));
    c.mines.push_back(r.deposit_id);
    statuses_seen.insert(static_cast<int>(r.status));
  }

  std::vector<BinMean> out;
  for (int s : statuses_seen)
    for (int p : periods)
      for (int b = 0; b < n_bins; ++b) {
        BinMean bm;
        bm.status = static_cast<MineStatus>(s);
        bm.bin = b;
        bm.period = p;
        auto it = cells.find({s, b, p});
        if (it == cells.end() || it->second.values.empty()) {
          bm.empty = true;
          out.push_back(bm);
          continue;
        }
        const auto& c = it->second;
        bm.n = static_cast<long>(c.values.size());
        double mean = std::accumulate(c.values.begin(), c.values.end(), 0.0) / bm.n;
        bm.mean = mean;
        // mine-clustered variance of the mean
        std::map<long, double> cluster_sum;
        for (size_t i = 0; i < c.values.size(); ++i)
          cluster_sum[c.mines[i]] += c.values[i] - mean;
        size_t g = cluster_sum.size();
        if (g >= 2) {
          double meat = 0;
          for (const auto& [id, e] : cluster_sum) meat += e * e;
          double var = meat / (static_cast<double>(bm.n) * bm.n) * g / (g - 1.0);
          double t = student_t_quantile(0.975, static_cast<double>(g - 1));
          bm.ci_low = mean - t * std::sqrt(var);
          bm.ci_high = mean + t * std::sqrt(var);
        } else {
          bm.ci_low = bm.ci_high = mean;
        }
        out.push_back(bm);
      }
  return out;
}

DemeanResult demean_relative(const Panel& panel, const std::string& outcome,
                             MineStatus reference) {
  DemeanResult res;
  std::map<std::pair<std::string, int>, std::pair<double, long>> acc;
  for (const auto& r : panel.rows)
    if (r.status == reference) {
      auto& a = acc[{r.country, r.period}];
      a.first += outcome_value(r, outcome);
      a.second += 1;
    }
  for (const auto& [k, a] : acc) res.cell_means[k] = a.first / a.second;

  for (const auto& r : panel.rows) {
    auto it = res.cell_means.find({r.country, r.period});
    if (it == res.cell_means.end()) {
      ++res.dropped_no_reference;
      continue;
    }
    res.rows.push_back({r.tile_id, r.period, outcome_value(r, outcome) - it->second});
  }
  return res;
}

std::vector<BalanceResult> balance_test(const std::vector<BalanceRow>& cross_section,
                                        const std::vector<std::string>& covariates) {
  std::vector<BalanceResult> out;
  if (cross_section.empty()) return out;

  std::vector<std::string> countries(cross_section.size());
  std::vector<long> mines(cross_section.size());
  for (size_t i = 0; i < cross_section.size(); ++i) {
    countries[i] = cross_section[i].country;
    mines[i] = cross_section[i].deposit_id;
  }
  FESpec fe;
  fe.add_dim(dense_ids(countries));
  auto mine_ids = dense_ids(mines);

  for (const auto& cov : covariates) {
    BalanceResult br;
    br.covariate = cov;
    Eigen::MatrixXd m(cross_section.size(), 2);  // [regressor, covariate]
    long n = 0;
    std::vector<int> rows_fe;
    std::vector<int> rows_mine;
    for (size_t i = 0; i < cross_section.size(); ++i) {
      auto it = cross_section[i].covariates.find(cov);
      if (it == cross_section[i].covariates.end()) continue;
      m(n, 0) = cross_section[i].regressor;
      m(n, 1) = it->second;
      rows_fe.push_back(fe.dims[0][i]);
      rows_mine.push_back(mine_ids[i]);
      ++n;
    }
    br.n = n;
    if (n < 3) {
      br.estimable = false;
      out.push_back(br);
      continue;
    }
    Eigen::MatrixXd sub = m.topRows(n);
    FESpec fe_sub;
    fe_sub.add_dim(rows_fe);
    within_transform(sub, fe_sub);
    try {
      OlsFit fit = ols(sub.col(0), sub.col(1));
      if (fit.kept.empty()) throw std::runtime_error("regressor absorbed");
      auto v = cluster_vcov(sub.col(0), fit.residuals, dense_ids(rows_mine),
                            1 + fe_sub.n_groups[0], fit.xtx_inv);
      br.beta = fit.beta[0];
      br.se_mine_clustered = std::sqrt(v(0, 0));
    } catch (const std::exception&) {
      br.estimable = false;
    }
    out.push_back(br);
  }
  return out;
}

CleanResult clean_outcome(std::vector<OutcomeRow>& outcomes, const std::string& outcome_name,
                          double iqr_k, double alpha) {
  std::vector<double> v(outcomes.size());
  for (size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (outcome_name == "log_urban")
      v[i] = o.log_urban;
    else if (outcome_name == "log_crop")
      v[i] = o.log_crop;
    else if (outcome_name == "wealth")
      v[i] = o.wealth_raw;
    else
      throw std::invalid_argument("clean_outcome: unknown outcome " + outcome_name);
  }
  CleanResult res;
  if (v.size() < 4) return res;
  auto rep = screen_outcome(v, outcome_name, iqr_k, alpha);
  res.flagged = rep.flagged_count;
  std::set<size_t> remove(rep.confirmed_indices.begin(), rep.confirmed_indices.end());
  if (remove.empty()) return res;
  std::vector<OutcomeRow> kept;
  kept.reserve(outcomes.size() - remove.size());
  for (size_t i = 0; i < outcomes.size(); ++i) {
    if (remove.count(i)) {
      res.removed_keys.push_back(outcomes[i].tile_id + ":" +
                                 std::to_string(outcomes[i].period));
      ++res.removed;
    } else {
      kept.push_back(std::move(outcomes[i]));
    }
  }
  outcomes = std::move(kept);
  return res;
}

void write_panel_csv(const std::string& path, const Panel& panel) {
  csv::Writer w(path);
  w.header({"tile_id", "deposit_id", "country", "period", "status", "event_period",
            "event_kind", "band", "distance_m", "log_urban", "log_crop", "wealth_z",
            "conflict_count", "conflict_any", "conflict_available", "size_class",
            "democracy"});
  for (const auto& r : panel.rows) {
    const char* kind = r.event_kind == EventKind::Opening   ? "opening"
                       : r.event_kind == EventKind::Closing ? "closing"
                                                            : "";
    w.row({r.tile_id, csv::fmt(r.deposit_id), r.country, csv::fmt(r.period),
           status_name(r.status), csv::fmt(r.event_period), kind, band_name(r.band),
           csv::fmt(r.distance_m), csv::fmt(r.log_urban), csv::fmt(r.log_crop),
           csv::fmt(r.wealth_z), csv::fmt(r.conflict_count), csv::fmt(r.conflict_any),
           r.conflict_available ? "1" : "0",
           r.size_class == SizeClass::Large ? "Large" : "Small", r.democracy ? "1" : "0"});
  }
}

Panel read_panel_csv(const std::string& path) {
  auto t = csv::read_file(path);
  Panel p;
  int c_tile = t.require_col("tile_id"), c_dep = t.require_col("deposit_id"),
      c_ctry = t.require_col("country"), c_per = t.require_col("period"),
      c_st = t.require_col("status"), c_ep = t.require_col("event_period"),
      c_ek = t.require_col("event_kind"), c_b = t.require_col("band"),
      c_d = t.require_col("distance_m"), c_u = t.require_col("log_urban"),
      c_cr = t.require_col("log_crop"), c_w = t.require_col("wealth_z"),
      c_cc = t.require_col("conflict_count"), c_ca = t.require_col("conflict_any"),
      c_cav = t.require_col("conflict_available"), c_sz = t.require_col("size_class"),
      c_dem = t.require_col("democracy");
  for (const auto& r : t.rows) {
    PanelObservation o;
    o.tile_id = r[c_tile];
    o.deposit_id = std::stol(r[c_dep]);
    o.country = r[c_ctry];
    o.period = std::stoi(r[c_per]);
    auto s = status_from_name(r[c_st]);
    if (!s) throw std::runtime_error("bad status in panel CSV: " + r[c_st]);
    o.status = *s;
    o.event_period = std::stoi(r[c_ep]);
    o.event_kind = r[c_ek] == "opening"   ? EventKind::Opening
                   : r[c_ek] == "closing" ? EventKind::Closing
                                          : EventKind::None;
    o.band = r[c_b] == "near" ? Band::Near : Band::Far;
    o.distance_m = std::stod(r[c_d]);
    o.log_urban = std::stod(r[c_u]);
    o.log_crop = std::stod(r[c_cr]);
    o.wealth_z = std::stod(r[c_w]);
    o.conflict_count = std::stoi(r[c_cc]);
    o.conflict_any = std::stoi(r[c_ca]);
    o.conflict_available = r[c_cav] == "1";
    o.size_class = r[c_sz] == "Large" ? SizeClass::Large : SizeClass::Small;
    o.democracy = r[c_dem] == "1";
    p.rows.push_back(std::move(o));
  }
  p.report.rows = static_cast<long>(p.rows.size());
  return p;
}

void write_bin_means_csv(const std::string& path, const std::vector<BinMean>& bins,
                         double bin_width_m) {
  csv::Writer w(path);
  w.header({"status", "bin_km", "period", "n", "mean", "ci_low", "ci_high"});
  for (const auto& b : bins) {
    std::string lo = csv::fmt(b.bin * bin_width_m / 1000.0);
    if (b.empty) {
      w.row({status_name(b.status), lo, csv::fmt(b.period), "0", "", "", ""});
    } else {
      w.row({status_name(b.status), lo, csv::fmt(b.period), csv::fmt(b.n), csv::fmt(b.mean),
             csv::fmt(b.ci_low), csv::fmt(b.ci_high)});
    }
  }
}

}  // namespace orepanel
