#pragma once

#include <string>
#include <vector>

#include "orepanel/panel.hpp"

namespace orepanel {

enum class ControlRule { NotYetOpened, LateTreated, Continuous };

const char* control_rule_name(ControlRule r);

struct Window {
  int t_neg = -5;
  int t_pos = 5;
};

struct Event {
  int event_id = 0;
  std::string country;
  int event_period = 0;  // lifecycle event period: first active (opening) / last active (closing)
  int baseline_period = 0;  // calendar period at relative time 0
  EventKind kind = EventKind::None;
  ControlRule control_rule = ControlRule::NotYetOpened;
  std::vector<long> treated_deposits;
  std::vector<std::string> treated_tiles;
  std::vector<std::string> control_tiles;
  std::vector<long> control_deposits;
};

struct StackedRow {
  int event_id = 0;
  std::string tile_id;
  long deposit_id = 0;
  int period = 0;
  int rel_time = 0;  // t = period - baseline_period; t = 1 is the first treated period
  int treat_group = 0;
  int treat_post = 0;  // treat_group * 1[t >= 1]
  Band band = Band::Near;
  SizeClass size_class = SizeClass::Small;
  bool democracy = false;
  double log_urban = 0, log_crop = 0, wealth_z = 0;
  int conflict_any = 0;
  bool conflict_available = false;
};

struct StackedDataset {
  std::vector<StackedRow> rows;
  Window window;
  int dropped_events_no_controls = 0;
  int dropped_events_unbalanced = 0;
};

// One event per (country, event period) of the given kind, with its own
// control tiles. For opening events with NotYetOpened controls the caller
// restricts the deposit sample to recent discoveries first.
std::vector<Event> build_events(const Panel& panel, EventKind kind, ControlRule rule,
                                const Window& window = {});

// Sets relative time 0 at the last active period for closing events, so
// t = 1 is the first fully inactive period. build_events applies this.
void center_closing(std::vector<Event>& events);

// Replicates treated and control tiles of each event over the relative-time
// window; with balanced = true only events fully observed over the window
// are kept. Control tiles may appear under several events.
StackedDataset stack(const std::vector<Event>& events, const Panel& panel,
                     const Window& window = {}, bool balanced = true);

double stacked_outcome_value(const StackedRow& r, const std::string& outcome);

void write_stacked_csv(const std::string& path, const StackedDataset& ds);

}  // namespace orepanel
