#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orepanel/geo.hpp"
#include "orepanel/lifecycle.hpp"
#include "orepanel/raster.hpp"

namespace orepanel {

struct CountryMeta {
  std::string country;
  double polity2_mean = 0;
  // optional geocovariates for balancing, keyed by name
  std::map<std::string, double> covariates;
};

std::vector<CountryMeta> read_country_csv(const std::string& path);
void write_country_csv(const std::string& path, const std::vector<CountryMeta>& rows);

struct PanelObservation {
  std::string tile_id;
  long deposit_id = 0;
  std::string country;
  int period = 0;
  MineStatus status = MineStatus::NotYetOpened;
  int event_period = 0;
  EventKind event_kind = EventKind::None;
  Band band = Band::Near;
  double distance_m = 0;
  double log_urban = 0, log_crop = 0, wealth_z = 0;
  int conflict_count = 0;
  int conflict_any = 0;
  bool conflict_available = false;  // UCDP coverage starts in period 2
  SizeClass size_class = SizeClass::Small;
  bool democracy = false;
};

struct AssembleReport {
  long rows = 0;
  long dropped_confounded = 0;
  long missing_outcome = 0;
  long missing_status = 0;
  long missing_country = 0;
};

struct Panel {
  std::vector<PanelObservation> rows;
  AssembleReport report;
};

// Inner join of assignments, statuses, outcomes and country metadata.
// Confounded tiles are dropped; duplicate (tile, period) keys are a hard error.
// Polity2 study-period mean > 0 classifies a country democratic.
Panel assemble(const std::vector<Assignment>& assignments, const StatusMap& statuses,
               const std::vector<OutcomeRow>& outcomes,
               const std::vector<Deposit>& deposits,
               const std::vector<CountryMeta>& country_meta,
               const PeriodCalendar& cal = {});

double outcome_value(const PanelObservation& r, const std::string& outcome);

struct BinMean {
  MineStatus status;
  int bin = 0;  // 0-based: [bin*width, (bin+1)*width)
  int period = 0;
  long n = 0;
  double mean = 0, ci_low = 0, ci_high = 0;
  bool empty = false;
};

// Mean and mine-clustered 95% CI by status x distance bin x period.
std::vector<BinMean> distance_bin_means(const Panel& panel, const std::string& outcome,
                                        double bin_width_m = 5000.0,
                                        const std::vector<int>& periods = {1, 12});

struct DemeanedRow {
  std::string tile_id;
  int period = 0;
  double value = 0;  // outcome minus the (country, period) reference-group mean
};

struct DemeanResult {
  std::vector<DemeanedRow> rows;
  std::map<std::pair<std::string, int>, double> cell_means;
  long dropped_no_reference = 0;
};

DemeanResult demean_relative(const Panel& panel, const std::string& outcome,
                             MineStatus reference = MineStatus::NotYetOpened);

struct BalanceResult {
  std::string covariate;
  double beta = 0;
  double se_mine_clustered = 0;
  long n = 0;
  bool estimable = true;
};

enum class BalanceRegressor { GroupDummy, LogOpeningYear };

struct BalanceRow {
  long deposit_id = 0;
  std::string country;
  double regressor = 0;  // group dummy or log opening year
  std::map<std::string, double> covariates;
};

// Per covariate: OLS of covariate on regressor with country fixed effects,
// SE clustered by mine.
std::vector<BalanceResult> balance_test(const std::vector<BalanceRow>& cross_section,
                                        const std::vector<std::string>& covariates);

// Removes ESD-confirmed outliers of the named outcome from the outcome rows.
struct CleanResult {
  long removed = 0;
  int flagged = 0;
  std::vector<std::string> removed_keys;  // "tile_id:period"
};
CleanResult clean_outcome(std::vector<OutcomeRow>& outcomes, const std::string& outcome_name,
                          double iqr_k = 2.0, double alpha = 0.10);

void write_panel_csv(const std::string& path, const Panel& panel);
Panel read_panel_csv(const std::string& path);
void write_bin_means_csv(const std::string& path, const std::vector<BinMean>& bins,
                         double bin_width_m = 5000.0);

}  // namespace orepanel
