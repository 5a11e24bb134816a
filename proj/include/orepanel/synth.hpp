#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orepanel/geo.hpp"
#include "orepanel/lifecycle.hpp"
#include "orepanel/panel.hpp"
#include "orepanel/raster.hpp"
#include "orepanel/stacking.hpp"

namespace orepanel {

struct SynthConfig {
  uint64_t seed = 1;
  int n_countries = 5;
  int deposits_per_country = 40;
  double share_opening = 0.4;
  double share_closing = 0.1;
  double share_continuous = 0.1;
  double share_not_yet = 0.4;  // remainder goes to NoLongerActive
  int opening_g_min = 7;       // opening event-period range; 7..8 keeps +/-5 windows balanced
  int opening_g_max = 8;
  double att_urban = 0.25;     // log-points, step effect from t >= 1
  std::vector<double> dynamic_profile;  // per-relative-period effect for t >= 1; empty = flat att
  double pre_trend = 0.0;      // log-points per relative period, treated group, t < 0
  double noise_sd = 0.5;
  double conflict_base_p = 0.003;
  double conflict_treat_uplift_autocracy = 0.006;
  double democracy_share = 0.5;
  double tile_effect_sd = 1.0;
  double country_period_shock_sd = 0.2;
  double grid_radius_m = 40000.0;
  double tile_size_m = 6720.0;
  bool emit_masks = false;  // PGM masks alongside outcome rows
  int masks_max_tiles = 16; // cap on tiles that get mask files

  void validate() const;  // throws std::invalid_argument on bad shares/probabilities
};

struct GroundTruth {
  std::map<long, int> event_period;     // per opening deposit
  double att_urban = 0;
  std::vector<double> dynamic_profile;  // effect at t = 1, 2, ...
  double conflict_base_p = 0;
  double conflict_treat_uplift_autocracy = 0;
};

struct SynthOutput {
  std::vector<Deposit> deposits;
  std::vector<CountryMeta> countries;
  std::vector<OutcomeRow> outcomes;
  GroundTruth truth;
};

// Deterministic per seed: identical seed, identical output (and bytes when
// written). Random streams are split per feature so toggling one leaves the
// draws of the others unchanged.
SynthOutput generate(const SynthConfig& config);

// Writes deposits.csv, countries.csv, outcomes.csv, ground_truth.csv (and
// masks when configured) into out_dir.
void write_synth_output(const std::string& out_dir, const SynthOutput& out,
                        const SynthConfig& config);

// Independent difference-of-group-mean-differences oracle.
// Throws std::invalid_argument when any cell is empty.
double oracle_did(const std::vector<double>& treat_pre, const std::vector<double>& treat_post,
                  const std::vector<double>& ctrl_pre, const std::vector<double>& ctrl_post);

}  // namespace orepanel
