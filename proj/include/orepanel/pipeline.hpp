#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "orepanel/estimator.hpp"
#include "orepanel/synth.hpp"

namespace orepanel {

// Configuration or input problem; maps to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Estimation-level failure; maps to exit code 1.
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SpecRequest {
  std::string outcome = "log_urban";
  std::string design = "stacked";  // ordinary | stacked | event_study | lpm
  std::string band = "near";       // near | far | all
  std::string interactions = "none";  // none | near_far | size_democracy | democracy_autocracy
  std::string kind = "opening";       // opening | closing
  std::string control_rule = "not_yet_opened";  // not_yet_opened | late_treated | continuous
  bool balanced = false;  // event_study always uses balanced stacking
};

struct RunConfig {
  std::string deposits_path;
  std::string countries_path;
  std::string outcomes_path;  // either this or masks_dir
  std::string masks_dir;
  std::string aux_path;  // optional tile_id,period,wealth,conflict_count rows for mask route
  std::string output_dir = "out";
  ProjectionParams projection;
  GridParams grid;
  Window window;
  bool screening_enabled = true;
  double screening_iqr_k = 2.0;
  double screening_alpha = 0.10;
  std::vector<SpecRequest> specs;
  SynthConfig synth;
  std::string config_path;  // where this config was loaded from

  static RunConfig from_json_file(const std::string& path);
};

// OREPANEL_THREADS caps worker threads; defaults to hardware concurrency.
int worker_threads();

// FNV-1a 64 over a file's bytes, hex-encoded. Throws ConfigError when missing.
std::string file_hash(const std::string& path);

// Runs one subcommand (grid, classify, ingest, screen, panel, stack,
// estimate, describe, synth, all), writing artifacts and a run manifest into
// config.output_dir. Returns the process exit code.
int run(const std::string& subcommand, const RunConfig& config);

}  // namespace orepanel
