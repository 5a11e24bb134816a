#include "orepanel/stacking.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "orepanel/csv.hpp"

namespace orepanel {

const char* control_rule_name(ControlRule r) {
  switch (r) {
    case ControlRule::NotYetOpened: return "not_yet_opened";
    case ControlRule::LateTreated: return "late_treated";
    case ControlRule::Continuous: return "continuous";
  }
  return "?";
}

void center_closing(std::vector<Event>& events) {
  for (auto& e : events)
    if (e.kind == EventKind::Closing) e.baseline_period = e.event_period;
}

std::vector<Event> build_events(const Panel& panel, EventKind kind, ControlRule rule,
                                const Window& window) {
  struct DepositInfo {
    std::string country;
    MineStatus status;
    int event_period = 0;
    EventKind event_kind = EventKind::None;
    std::set<std::string> tiles;
  };
  std::map<long, DepositInfo> deps;
  for (const auto& r : panel.rows) {
    auto& d = deps[r.deposit_id];
    d.country = r.country;
    d.status = r.status;
    d.event_period = r.event_period;
    d.event_kind = r.event_kind;
    d.tiles.insert(r.tile_id);
  }

  const MineStatus treated_status =
      kind == EventKind::Opening ? MineStatus::Opening : MineStatus::Closing;

  std::map<std::pair<std::string, int>, Event> by_key;
  for (const auto& [id, d] : deps) {
    if (d.status != treated_status || d.event_period == 0) continue;
    auto& e = by_key[{d.country, d.event_period}];
    e.country = d.country;
    e.event_period = d.event_period;
    e.kind = kind;
    e.control_rule = rule;
    e.treated_deposits.push_back(id);
    e.treated_tiles.insert(e.treated_tiles.end(), d.tiles.begin(), d.tiles.end());
  }

  std::vector<Event> events;
  int next_id = 1;
  for (auto& [key, e] : by_key) {
    std::set<std::string> ctrl_tiles;
    std::set<long> ctrl_deps;
    for (const auto& [id, d] : deps) {
      if (d.country != e.country) continue;
      bool eligible = false;
      switch (rule) {
        case ControlRule::NotYetOpened:
          eligible = d.status == MineStatus::NotYetOpened;
          break;
        case ControlRule::LateTreated:
          eligible = d.status == MineStatus::Opening &&
                     d.event_period > e.event_period + window.t_pos;
          break;
        case ControlRule::Continuous:
          eligible = d.status == MineStatus::Continuous;
          break;
      }
      if (!eligible) continue;
      ctrl_tiles.insert(d.tiles.begin(), d.tiles.end());
      ctrl_deps.insert(id);
    }
    if (ctrl_tiles.empty()) continue;  // event without controls is dropped
    e.event_id = next_id++;
    e.baseline_period = e.event_period - 1;
    e.control_tiles.assign(ctrl_tiles.begin(), ctrl_tiles.end());
    e.control_deposits.assign(ctrl_deps.begin(), ctrl_deps.end());
    std::sort(e.treated_tiles.begin(), e.treated_tiles.end());
    events.push_back(std::move(e));
  }
  center_closing(events);
  return events;
}

StackedDataset stack(const std::vector<Event>& events, const Panel& panel,
                     const Window& window, bool balanced) {
  if (window.t_neg >= 0 || window.t_pos <= 0)
    throw std::invalid_argument("stack: window must satisfy T_neg < 0 < T_pos");
  StackedDataset ds;
  ds.window = window;

  std::map<std::pair<std::string, int>, const PanelObservation*> idx;
  int max_period = 0;
  for (const auto& r : panel.rows) {
    idx[{r.tile_id, r.period}] = &r;
    max_period = std::max(max_period, r.period);
  }

  for (const auto& e : events) {
    int p_lo = e.baseline_period + window.t_neg;
    int p_hi = e.baseline_period + window.t_pos;
    if (balanced && (p_lo < 1 || p_hi > max_period)) {
      ++ds.dropped_events_unbalanced;
      continue;
    }
    int lo = std::max(p_lo, 1), hi = std::min(p_hi, max_period);

    auto emit = [&](const std::string& tile, bool treated) {
      if (balanced) {
        for (int p = lo; p <= hi; ++p)
          if (!idx.count({tile, p})) return;  // tile not fully observed
      }
      for (int p = lo; p <= hi; ++p) {
        auto it = idx.find({tile, p});
        if (it == idx.end()) continue;
        const auto& src = *it->second;
        StackedRow r;
        r.event_id = e.event_id;
        r.tile_id = tile;
        r.deposit_id = src.deposit_id;
        r.period = p;
        r.rel_time = p - e.baseline_period;
        r.treat_group = treated ? 1 : 0;
        r.treat_post = (treated && r.rel_time >= 1) ? 1 : 0;
        r.band = src.band;
        r.size_class = src.size_class;
        r.democracy = src.democracy;
        r.log_urban = src.log_urban;
        r.log_crop = src.log_crop;
        r.wealth_z = src.wealth_z;
        r.conflict_any = src.conflict_any;
        r.conflict_available = src.conflict_available;
        ds.rows.push_back(std::move(r));
      }
    };
    for (const auto& t : e.treated_tiles) emit(t, true);
    for (const auto& t : e.control_tiles) emit(t, false);
  }
  return ds;
}

double stacked_outcome_value(const StackedRow& r, const std::string& outcome) {
  if (outcome == "log_urban") return r.log_urban;
  if (outcome == "log_crop") return r.log_crop;
  if (outcome == "wealth_z") return r.wealth_z;
  if (outcome == "conflict_any") return r.conflict_any;
  throw std::invalid_argument("unknown outcome: " + outcome);
}

void write_stacked_csv(const std::string& path, const StackedDataset& ds) {
  csv::Writer w(path);
  w.header({"event_id", "tile_id", "deposit_id", "period", "rel_time", "treat_group",
            "treat_post", "band", "size_class", "democracy", "log_urban", "log_crop",
            "wealth_z", "conflict_any"});
  for (const auto& r : ds.rows)
    w.row({csv::fmt(r.event_id), r.tile_id, csv::fmt(r.deposit_id), csv::fmt(r.period),
           csv::fmt(r.rel_time), csv::fmt(r.treat_group), csv::fmt(r.treat_post),
           band_name(r.band), r.size_class == SizeClass::Large ? "Large" : "Small",
           r.democracy ? "1" : "0", csv::fmt(r.log_urban), csv::fmt(r.log_crop),
           csv::fmt(r.wealth_z), csv::fmt(r.conflict_any)});
}

}  // namespace orepanel
