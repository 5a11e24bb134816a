#include "orepanel/lifecycle.hpp"

#include <algorithm>
#include <stdexcept>

#include "orepanel/csv.hpp"

namespace orepanel {

int period_of(int year, const PeriodCalendar& cal) {
  if (year < cal.start_year || year > cal.last_year()) return 0;
  return (year - cal.start_year) / cal.period_length + 1;
}

const char* status_name(MineStatus s) {
  switch (s) {
    case MineStatus::Continuous: return "Continuous";
    case MineStatus::Opening: return "Opening";
    case MineStatus::Closing: return "Closing";
    case MineStatus::OpeningClosing: return "OpeningClosing";
    case MineStatus::NoLongerActive: return "NoLongerActive";
    case MineStatus::NotYetOpened: return "NotYetOpened";
  }
  return "?";
}

std::optional<MineStatus> status_from_name(const std::string& name) {
  for (MineStatus s : {MineStatus::Continuous, MineStatus::Opening, MineStatus::Closing,
                       MineStatus::OpeningClosing, MineStatus::NoLongerActive,
                       MineStatus::NotYetOpened})
    if (name == status_name(s)) return s;
  return std::nullopt;
}

static void check_intervals(const std::vector<ActivityInterval>& activity) {
  for (size_t i = 0; i < activity.size(); ++i) {
    if (activity[i].end_year < activity[i].start_year)
      throw std::invalid_argument("activity interval ends before it starts");
    if (i > 0 && activity[i].start_year <= activity[i - 1].end_year)
      throw std::invalid_argument("activity intervals overlap or are unsorted");
  }
}

bool active_in_period(const std::vector<ActivityInterval>& activity, int period,
                      const PeriodCalendar& cal) {
  int lo = cal.first_year(period), hi = cal.last_year(period);
  for (const auto& iv : activity)
    if (iv.start_year <= hi && iv.end_year >= lo) return true;
  return false;
}

StatusInfo classify_status(const std::vector<ActivityInterval>& activity,
                           const PeriodCalendar& cal) {
  check_intervals(activity);
  const int P = cal.n_periods;
  std::vector<bool> act(P + 1, false);
  int first = 0, last = 0, n_active = 0;
  for (int p = 1; p <= P; ++p) {
    act[p] = active_in_period(activity, p, cal);
    if (act[p]) {
      if (!first) first = p;
      last = p;
      ++n_active;
    }
  }

  StatusInfo info;
  if (n_active == 0) {
    bool any_before = false;
    for (const auto& iv : activity)
      if (iv.end_year < cal.start_year) any_before = true;
    info.status = any_before ? MineStatus::NoLongerActive : MineStatus::NotYetOpened;
    return info;
  }

  bool contiguous = (last - first + 1 == n_active);
  if (n_active == P) {
    info.status = MineStatus::Continuous;
  } else if (contiguous && first >= 2 && last == P) {
    info.status = MineStatus::Opening;
    info.event_period = first;
    info.event_kind = EventKind::Opening;
  } else if (contiguous && first == 1 && last <= P - 1) {
    // Not resuming after the last active period is implied by contiguity.
    info.status = MineStatus::Closing;
    info.event_period = last;
    info.event_kind = EventKind::Closing;
  } else {
    info.status = MineStatus::OpeningClosing;
  }
  return info;
}

RecentDiscoveryResult restrict_recent_discoveries(const std::vector<Deposit>& deposits,
                                                  const PeriodCalendar& cal) {
  RecentDiscoveryResult r;
  for (const auto& d : deposits) {
    if (d.discovery_year < 0) {
      ++r.dropped_missing_year;
    } else if (d.discovery_year >= cal.start_year) {
      r.kept.push_back(d);
    } else {
      ++r.dropped_old;
    }
  }
  return r;
}

StatusMap classify_all(const std::vector<Deposit>& deposits, const PeriodCalendar& cal) {
  StatusMap m;
  for (const auto& d : deposits) m[d.deposit_id] = classify_status(d.activity, cal);
  return m;
}

static std::vector<ActivityInterval> parse_intervals(const std::string& s) {
  std::vector<ActivityInterval> out;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t semi = s.find(';', pos);
    std::string part = s.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos);
    if (!part.empty()) {
      size_t dash = part.find('-');
      if (dash == std::string::npos)
        throw std::runtime_error("bad activity interval: " + part);
      out.push_back({std::stoi(part.substr(0, dash)), std::stoi(part.substr(dash + 1))});
    }
    if (semi == std::string::npos) break;
    pos = semi + 1;
  }
  return out;
}

static std::string intervals_to_string(const std::vector<ActivityInterval>& iv) {
  std::string s;
  for (size_t i = 0; i < iv.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(iv[i].start_year) + "-" + std::to_string(iv[i].end_year);
  }
  return s;
}

std::vector<Deposit> read_deposits_csv(const std::string& path) {
  auto t = csv::read_file(path);
  int c_id = t.require_col("deposit_id"), c_lat = t.require_col("lat"),
      c_lon = t.require_col("lon"), c_country = t.require_col("country"),
      c_disc = t.require_col("discovery_year"), c_size = t.require_col("size_class"),
      c_act = t.require_col("activity_intervals");
  std::vector<Deposit> out;
  for (const auto& r : t.rows) {
    Deposit d;
    d.deposit_id = std::stol(r[c_id]);
    d.lat = std::stod(r[c_lat]);
    d.lon = std::stod(r[c_lon]);
    d.country = r[c_country];
    d.discovery_year = r[c_disc].empty() ? -1 : std::stoi(r[c_disc]);
    d.size_class = (r[c_size] == "Large") ? SizeClass::Large : SizeClass::Small;
    d.activity = parse_intervals(r[c_act]);
    out.push_back(std::move(d));
  }
  return out;
}

void write_deposits_csv(const std::string& path, const std::vector<Deposit>& deposits) {
  csv::Writer w(path);
  w.header({"deposit_id", "lat", "lon", "country", "discovery_year", "size_class",
            "activity_intervals"});
  for (const auto& d : deposits) {
    w.row({csv::fmt(d.deposit_id), csv::fmt(d.lat), csv::fmt(d.lon), d.country,
           d.discovery_year < 0 ? "" : csv::fmt(d.discovery_year),
           d.size_class == SizeClass::Large ? "Large" : "Small",
           intervals_to_string(d.activity)});
  }
}

void write_status_csv(const std::string& path, const StatusMap& statuses) {
  csv::Writer w(path);
  w.header({"deposit_id", "status", "event_period", "event_kind"});
  for (const auto& [id, info] : statuses) {
    const char* kind = info.event_kind == EventKind::Opening   ? "opening"
                       : info.event_kind == EventKind::Closing ? "closing"
                                                               : "";
    w.row({csv::fmt(id), status_name(info.status), csv::fmt(info.event_period), kind});
  }
}

StatusMap read_status_csv(const std::string& path) {
  auto t = csv::read_file(path);
  int c_id = t.require_col("deposit_id"), c_st = t.require_col("status"),
      c_ep = t.require_col("event_period"), c_k = t.require_col("event_kind");
  StatusMap m;
  for (const auto& r : t.rows) {
    StatusInfo info;
    auto s = status_from_name(r[c_st]);
    if (!s) throw std::runtime_error("unknown status: " + r[c_st]);
    info.status = *s;
    info.event_period = std::stoi(r[c_ep]);
    info.event_kind = r[c_k] == "opening"   ? EventKind::Opening
                      : r[c_k] == "closing" ? EventKind::Closing
                                            : EventKind::None;
    m[std::stol(r[c_id])] = info;
  }
  return m;
}

}  // namespace orepanel
