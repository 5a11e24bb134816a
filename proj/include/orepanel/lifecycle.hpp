#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace orepanel {

// 12 three-year periods, Period 1 = 1984-1986 ... Period 12 = 2017-2019.
struct PeriodCalendar {
  int start_year = 1984;
  int period_length = 3;
  int n_periods = 12;

  int first_year(int period) const { return start_year + period_length * (period - 1); }
  int last_year(int period) const { return first_year(period) + period_length - 1; }
  int last_year() const { return last_year(n_periods); }
};

// Returns the 1-based period index, or 0 when the year falls outside the study window.
int period_of(int year, const PeriodCalendar& cal = {});

struct ActivityInterval {
  int start_year;
  int end_year;  // inclusive
};

enum class SizeClass { Small, Large };

struct Deposit {
  long deposit_id = 0;
  double lat = 0, lon = 0;
  std::string country;
  int discovery_year = -1;  // -1 = unknown
  SizeClass size_class = SizeClass::Small;
  std::vector<ActivityInterval> activity;  // disjoint, sorted
};

enum class MineStatus {
  Continuous,
  Opening,
  Closing,
  OpeningClosing,
  NoLongerActive,
  NotYetOpened,
};

inline bool is_active_status(MineStatus s) {
  return s == MineStatus::Continuous || s == MineStatus::Opening ||
         s == MineStatus::Closing || s == MineStatus::OpeningClosing;
}

const char* status_name(MineStatus s);
std::optional<MineStatus> status_from_name(const std::string& name);

enum class EventKind { None, Opening, Closing };

struct StatusInfo {
  MineStatus status = MineStatus::NotYetOpened;
  int event_period = 0;  // 0 = none; Opening: first active period, Closing: last active period
  EventKind event_kind = EventKind::None;
};

// Classifies a deposit's activity history into the six-way status taxonomy.
// Throws std::invalid_argument on overlapping or unordered intervals.
StatusInfo classify_status(const std::vector<ActivityInterval>& activity,
                           const PeriodCalendar& cal = {});

bool active_in_period(const std::vector<ActivityInterval>& activity, int period,
                      const PeriodCalendar& cal = {});

struct RecentDiscoveryResult {
  std::vector<Deposit> kept;
  int dropped_missing_year = 0;
  int dropped_old = 0;
};

// Keeps deposits discovered during or after the calendar start year.
RecentDiscoveryResult restrict_recent_discoveries(const std::vector<Deposit>& deposits,
                                                  const PeriodCalendar& cal = {});

using StatusMap = std::map<long, StatusInfo>;

StatusMap classify_all(const std::vector<Deposit>& deposits,
                       const PeriodCalendar& cal = {});

// Deposits CSV: deposit_id,lat,lon,country,discovery_year,size_class,activity_intervals
// activity_intervals is "start1-end1;start2-end2" (empty = never active).
std::vector<Deposit> read_deposits_csv(const std::string& path);
void write_deposits_csv(const std::string& path, const std::vector<Deposit>& deposits);

// Status CSV: deposit_id,status,event_period,event_kind
void write_status_csv(const std::string& path, const StatusMap& statuses);
StatusMap read_status_csv(const std::string& path);

}  // namespace orepanel
