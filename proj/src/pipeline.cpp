#include "orepanel/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "orepanel/csv.hpp"
#include "orepanel/screening.hpp"

namespace orepanel {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int worker_threads() {
  if (const char* env = std::getenv("OREPANEL_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file for hashing: " + path);
  uint64_t h = 14695981039346656037ULL;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error in ") + path + ": " + e.what());
  }

  RunConfig cfg;
  cfg.config_path = path;
  try {
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      cfg.deposits_path = p.value("deposits", "");
      cfg.countries_path = p.value("countries", "");
      cfg.outcomes_path = p.value("outcomes", "");
      cfg.masks_dir = p.value("masks_dir", "");
      cfg.aux_path = p.value("aux", "");
      cfg.output_dir = p.value("output_dir", "out");
    }
    if (j.contains("projection")) {
      cfg.projection.central_meridian_deg = j["projection"].value("central_meridian_deg", 15.0);
      cfg.projection.sphere_radius_m = j["projection"].value("sphere_radius_m", 6371007.181);
    }
    if (j.contains("grid")) {
      cfg.grid.tile_size_m = j["grid"].value("tile_size_m", 6720.0);
      cfg.grid.radius_m = j["grid"].value("radius_m", 40000.0);
    }
    if (j.contains("window")) {
      cfg.window.t_neg = j["window"].value("t_neg", -5);
      cfg.window.t_pos = j["window"].value("t_pos", 5);
    }
    if (cfg.window.t_neg >= 0 || cfg.window.t_pos <= 0)
      throw ConfigError("config: window must satisfy t_neg < 0 < t_pos");
    if (j.contains("screening")) {
      cfg.screening_enabled = j["screening"].value("enabled", true);
      cfg.screening_iqr_k = j["screening"].value("iqr_k", 2.0);
      cfg.screening_alpha = j["screening"].value("alpha", 0.10);
    }
    for (const auto& s : j.value("specs", json::array())) {
      SpecRequest r;
      r.outcome = s.value("outcome", "log_urban");
      r.design = s.value("design", "stacked");
      r.band = s.value("band", "near");
      r.interactions = s.value("interactions", "none");
      r.kind = s.value("kind", "opening");
      r.control_rule = s.value("control_rule", "not_yet_opened");
      r.balanced = s.value("balanced", r.design == "event_study");
      cfg.specs.push_back(std::move(r));
    }
    if (j.contains("synth")) {
      const auto& s = j["synth"];
      auto& c = cfg.synth;
      c.seed = s.value("seed", c.seed);
      c.n_countries = s.value("n_countries", c.n_countries);
      c.deposits_per_country = s.value("deposits_per_country", c.deposits_per_country);
      c.share_opening = s.value("share_opening", c.share_opening);
      c.share_closing = s.value("share_closing", c.share_closing);
      c.share_continuous = s.value("share_continuous", c.share_continuous);
      c.share_not_yet = s.value("share_not_yet", c.share_not_yet);
      c.opening_g_min = s.value("opening_g_min", c.opening_g_min);
      c.opening_g_max = s.value("opening_g_max", c.opening_g_max);
      c.att_urban = s.value("att_urban", c.att_urban);
      if (s.contains("dynamic_profile"))
        c.dynamic_profile = s["dynamic_profile"].get<std::vector<double>>();
      c.pre_trend = s.value("pre_trend", c.pre_trend);
      c.noise_sd = s.value("noise_sd", c.noise_sd);
      c.conflict_base_p = s.value("conflict_base_p", c.conflict_base_p);
      c.conflict_treat_uplift_autocracy =
          s.value("conflict_treat_uplift_autocracy", c.conflict_treat_uplift_autocracy);
      c.democracy_share = s.value("democracy_share", c.democracy_share);
      c.tile_effect_sd = s.value("tile_effect_sd", c.tile_effect_sd);
      c.country_period_shock_sd = s.value("country_period_shock_sd", c.country_period_shock_sd);
      c.grid_radius_m = s.value("grid_radius_m", c.grid_radius_m);
      c.tile_size_m = s.value("tile_size_m", c.tile_size_m);
      c.emit_masks = s.value("emit_masks", c.emit_masks);
      c.masks_max_tiles = s.value("masks_max_tiles", c.masks_max_tiles);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config error in ") + path + ": " + e.what());
  }
  return cfg;
}

namespace {

long csv_row_count(const std::string& path) {
  std::ifstream in(path);
  long n = -1;  // header
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return std::max(n, 0L);
}

struct Manifest {
  json doc;
  std::string path;

  Manifest(const RunConfig& cfg, const std::string& subcommand) {
    path = cfg.output_dir + "/manifest.json";
    doc["subcommand"] = subcommand;
    if (!cfg.config_path.empty()) doc["config_hash"] = file_hash(cfg.config_path);
    doc["inputs"] = json::object();
    for (const std::string& p :
         {cfg.deposits_path, cfg.countries_path, cfg.outcomes_path, cfg.aux_path})
      if (!p.empty() && fs::exists(p)) doc["inputs"][p] = file_hash(p);
    doc["stages"] = json::array();
  }

  void stage_done(const std::string& name, const std::vector<std::string>& outputs) {
    json st;
    st["name"] = name;
    st["outputs"] = json::array();
    for (const auto& p : outputs) {
      json o;
      o["path"] = p;
      o["rows"] = csv_row_count(p);
      o["hash"] = file_hash(p);
      st["outputs"].push_back(o);
    }
    doc["stages"].push_back(st);
  }

  void write() const {
    std::ofstream out(path, std::ios::binary);
    out << doc.dump(2) << "\n";
  }
};

struct Ctx {
  const RunConfig& cfg;
  std::string out;  // output dir

  std::string tiles_csv() const { return out + "/tiles.csv"; }
  std::string assignments_csv() const { return out + "/assignments.csv"; }
  std::string status_csv() const { return out + "/status.csv"; }
  std::string ingested_csv() const { return out + "/outcomes_ingested.csv"; }
  std::string clean_csv() const { return out + "/outcomes_clean.csv"; }
  std::string panel_csv() const { return out + "/panel.csv"; }
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError("config: no path configured for " + what);
  if (!fs::exists(path)) throw ConfigError(what + " file not found: " + path);
}

std::vector<Deposit> load_deposits(const Ctx& ctx) {
  require_file(ctx.cfg.deposits_path, "deposits");
  return read_deposits_csv(ctx.cfg.deposits_path);
}

std::vector<std::string> stage_synth(const Ctx& ctx) {
  SynthOutput s = generate(ctx.cfg.synth);
  std::string dir = ctx.out + "/synth";
  write_synth_output(dir, s, ctx.cfg.synth);
  return {dir + "/deposits.csv", dir + "/countries.csv", dir + "/outcomes.csv",
          dir + "/ground_truth.csv"};
}

std::vector<std::string> stage_classify(const Ctx& ctx) {
  auto deposits = load_deposits(ctx);
  write_status_csv(ctx.status_csv(), classify_all(deposits));
  return {ctx.status_csv()};
}

std::vector<std::string> stage_grid(const Ctx& ctx) {
  auto deposits = load_deposits(ctx);
  auto tiles = generate_grid(deposits, ctx.cfg.projection, ctx.cfg.grid);
  write_tiles_csv(ctx.tiles_csv(), tiles);
  auto statuses = classify_all(deposits);
  PeriodCalendar cal;
  std::vector<Assignment> all;
  for (int p = 1; p <= cal.n_periods; ++p) {
    auto a = assign_tiles(tiles, deposits, statuses, p, ctx.cfg.projection, ctx.cfg.grid);
    all.insert(all.end(), a.begin(), a.end());
  }
  write_assignments_csv(ctx.assignments_csv(), all);
  return {ctx.tiles_csv(), ctx.assignments_csv()};
}

std::vector<std::string> stage_ingest(const Ctx& ctx) {
  std::vector<OutcomeRow> rows;
  if (!ctx.cfg.outcomes_path.empty()) {
    require_file(ctx.cfg.outcomes_path, "outcomes");
    rows = read_outcomes_csv(ctx.cfg.outcomes_path);
  } else if (!ctx.cfg.masks_dir.empty()) {
    if (!fs::exists(ctx.cfg.masks_dir))
      throw ConfigError("masks directory not found: " + ctx.cfg.masks_dir);
    // optional wealth/conflict columns joined by (tile_id, period)
    std::map<std::pair<std::string, int>, std::pair<double, int>> aux;
    if (!ctx.cfg.aux_path.empty()) {
      require_file(ctx.cfg.aux_path, "aux outcomes");
      auto t = csv::read_file(ctx.cfg.aux_path);
      int c_t = t.require_col("tile_id"), c_p = t.require_col("period"),
          c_w = t.require_col("wealth"), c_c = t.require_col("conflict_count");
      for (const auto& r : t.rows)
        aux[{r[c_t], std::stoi(r[c_p])}] = {std::stod(r[c_w]), std::stoi(r[c_c])};
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(ctx.cfg.masks_dir))
      if (e.path().string().ends_with("_landuse.pgm")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::string stem = f.filename().string();
      stem.resize(stem.size() - std::string("_landuse.pgm").size());
      size_t us = stem.rfind('_');
      if (us == std::string::npos) continue;
      std::string tile_id = stem.substr(0, us);
      int period = std::stoi(stem.substr(us + 1));
      Mask landuse = read_mask(f.string());
      Mask mine = read_mask((f.parent_path() / (stem + "_mine.pgm")).string(), 1);
      auto s = class_shares(landuse, mine);
      OutcomeRow o;
      o.tile_id = tile_id;
      o.period = period;
      o.log_urban = log_share(s.urban_pixels, s.valid_pixels);
      o.log_crop = log_share(s.crop_pixels, s.valid_pixels);
      o.log_water = log_share(s.water_pixels, s.valid_pixels);
      auto it = aux.find({tile_id, period});
      if (it != aux.end()) {
        o.wealth_raw = it->second.first;
        o.conflict_count = it->second.second;
      }
      rows.push_back(std::move(o));
    }
  } else {
    throw ConfigError("config: either paths.outcomes or paths.masks_dir is required");
  }
  write_outcomes_csv(ctx.ingested_csv(), rows);
  return {ctx.ingested_csv()};
}

std::vector<std::string> stage_screen(const Ctx& ctx) {
  require_file(ctx.ingested_csv(), "ingested outcomes");
  auto rows = read_outcomes_csv(ctx.ingested_csv());
  std::vector<OutlierReport> reports;
  std::vector<std::vector<std::string>> removed_ids;
  if (ctx.cfg.screening_enabled) {
    // screened before z-scoring; wealth enters raw here
    for (const std::string& oc : {"log_urban", "log_crop", "wealth"}) {
      auto res = clean_outcome(rows, oc, ctx.cfg.screening_iqr_k, ctx.cfg.screening_alpha);
      OutlierReport rep;
      rep.outcome = oc;
      rep.flagged_count = res.flagged;
      reports.push_back(rep);
      removed_ids.push_back(res.removed_keys);
    }
  }
  write_outcomes_csv(ctx.clean_csv(), rows);
  csv::Writer w(ctx.out + "/outlier_report.csv");
  w.header({"outcome", "flagged", "removed", "removed_id"});
  for (size_t i = 0; i < reports.size(); ++i) {
    if (removed_ids[i].empty())
      w.row({reports[i].outcome, csv::fmt(reports[i].flagged_count), "0", ""});
    for (const auto& id : removed_ids[i])
      w.row({reports[i].outcome, csv::fmt(reports[i].flagged_count),
             csv::fmt(static_cast<long>(removed_ids[i].size())), id});
  }
  w.close();
  return {ctx.clean_csv(), ctx.out + "/outlier_report.csv"};
}

std::vector<std::string> stage_panel(const Ctx& ctx) {
  auto deposits = load_deposits(ctx);
  require_file(ctx.cfg.countries_path, "countries");
  require_file(ctx.assignments_csv(), "assignments (run grid first)");
  require_file(ctx.clean_csv(), "screened outcomes (run screen first)");
  auto assignments = read_assignments_csv(ctx.assignments_csv());
  auto statuses = classify_all(deposits);
  auto outcomes = read_outcomes_csv(ctx.clean_csv());
  auto countries = read_country_csv(ctx.cfg.countries_path);
  Panel panel = assemble(assignments, statuses, outcomes, deposits, countries);
  write_panel_csv(ctx.panel_csv(), panel);
  return {ctx.panel_csv()};
}

EventKind parse_kind(const std::string& s) {
  if (s == "opening") return EventKind::Opening;
  if (s == "closing") return EventKind::Closing;
  throw ConfigError("config: unknown event kind: " + s);
}

ControlRule parse_rule(const std::string& s) {
  if (s == "not_yet_opened") return ControlRule::NotYetOpened;
  if (s == "late_treated") return ControlRule::LateTreated;
  if (s == "continuous") return ControlRule::Continuous;
  throw ConfigError("config: unknown control rule: " + s);
}

// Opening vs NotYetOpened comparisons restrict to recent discoveries.
Panel restricted_panel(const Panel& panel, const std::vector<Deposit>& deposits,
                       EventKind kind, ControlRule rule) {
  if (!(kind == EventKind::Opening && rule == ControlRule::NotYetOpened)) return panel;
  auto recent = restrict_recent_discoveries(deposits);
  std::set<long> keep;
  for (const auto& d : recent.kept) keep.insert(d.deposit_id);
  Panel out;
  for (const auto& r : panel.rows)
    if (keep.count(r.deposit_id)) out.rows.push_back(r);
  out.report.rows = static_cast<long>(out.rows.size());
  return out;
}

struct StackKey {
  EventKind kind;
  ControlRule rule;
  bool balanced;
  bool operator<(const StackKey& o) const {
    return std::tie(kind, rule, balanced) < std::tie(o.kind, o.rule, o.balanced);
  }
};

std::map<StackKey, StackedDataset> build_stacks(const Ctx& ctx, const Panel& panel,
                                                const std::vector<Deposit>& deposits) {
  std::map<StackKey, StackedDataset> stacks;
  for (const auto& s : ctx.cfg.specs) {
    if (s.design == "ordinary") continue;
    StackKey key{parse_kind(s.kind), parse_rule(s.control_rule),
                 s.design == "event_study" ? true : s.balanced};
    if (stacks.count(key)) continue;
    Panel sub = restricted_panel(panel, deposits, key.kind, key.rule);
    auto events = build_events(sub, key.kind, key.rule, ctx.cfg.window);
    stacks.emplace(key, stack(events, sub, ctx.cfg.window, key.balanced));
  }
  return stacks;
}

std::vector<std::string> stage_stack(const Ctx& ctx) {
  require_file(ctx.panel_csv(), "panel (run panel first)");
  Panel panel = read_panel_csv(ctx.panel_csv());
  auto deposits = load_deposits(ctx);
  auto stacks = build_stacks(ctx, panel, deposits);
  std::vector<std::string> outputs;
  for (const auto& [key, ds] : stacks) {
    std::string path = ctx.out + "/stacked_" +
                       (key.kind == EventKind::Opening ? "opening" : "closing") + "_" +
                       control_rule_name(key.rule) + (key.balanced ? "_balanced" : "") +
                       ".csv";
    write_stacked_csv(path, ds);
    outputs.push_back(path);
  }
  return outputs;
}

std::optional<Band> parse_band(const std::string& s) {
  if (s == "near") return Band::Near;
  if (s == "far") return Band::Far;
  if (s == "all") return std::nullopt;
  throw ConfigError("config: unknown band: " + s);
}

HeterogeneitySpec parse_interactions(const std::string& s) {
  if (s == "none") return HeterogeneitySpec::none();
  if (s == "near_far") return HeterogeneitySpec::near_far();
  if (s == "size_democracy") return HeterogeneitySpec::size_democracy();
  if (s == "democracy_autocracy") return HeterogeneitySpec::democracy_autocracy();
  throw ConfigError("config: unknown interactions: " + s);
}

std::vector<std::string> stage_estimate(const Ctx& ctx) {
  require_file(ctx.panel_csv(), "panel (run panel first)");
  Panel panel = read_panel_csv(ctx.panel_csv());
  auto deposits = load_deposits(ctx);
  auto stacks = build_stacks(ctx, panel, deposits);

  std::vector<RegressionResult> results;
  std::vector<std::string> outputs;
  for (const auto& s : ctx.cfg.specs) {
    EventKind kind = parse_kind(s.kind);
    ControlRule rule = parse_rule(s.control_rule);
    auto band = parse_band(s.band);
    try {
      if (s.design == "ordinary") {
        Panel sub = restricted_panel(panel, deposits, kind, rule);
        results.push_back(did_ordinary(sub, kind, rule, parse_interactions(s.interactions),
                                       s.outcome, band));
      } else if (s.design == "event_study") {
        const auto& ds = stacks.at({kind, rule, true});
        if (!band) throw EstimationError("event_study spec requires band near or far");
        auto res = event_study(ds, ctx.cfg.window, s.outcome, *band);
        std::string path = ctx.out + "/event_study_" + s.outcome + "_" + s.band + ".csv";
        write_event_study_csv(path, res);
        outputs.push_back(path);
        results.push_back(std::move(res));
      } else if (s.design == "lpm") {
        const auto& ds = stacks.at({kind, rule, s.balanced});
        results.push_back(lpm_conflict(ds, parse_interactions(s.interactions), band));
      } else if (s.design == "stacked") {
        const auto& ds = stacks.at({kind, rule, s.balanced});
        results.push_back(
            did_stacked(ds, parse_interactions(s.interactions), s.outcome, band));
      } else {
        throw ConfigError("config: unknown design: " + s.design);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw EstimationError(std::string("estimation failed for spec '") + s.design + "/" +
                            s.outcome + "': " + e.what());
    }
  }
  std::string results_path = ctx.out + "/results.csv";
  write_results_csv(results_path, results);
  outputs.insert(outputs.begin(), results_path);
  return outputs;
}

std::vector<std::string> stage_describe(const Ctx& ctx) {
  require_file(ctx.panel_csv(), "panel (run panel first)");
  Panel panel = read_panel_csv(ctx.panel_csv());
  std::vector<std::string> outputs;
  for (const std::string& oc : {"log_urban", "log_crop", "wealth_z"}) {
    auto bins = distance_bin_means(panel, oc);
    std::string path = ctx.out + "/bins_" + oc + ".csv";
    write_bin_means_csv(path, bins);
    outputs.push_back(path);

    auto dm = demean_relative(panel, oc);
    std::string dpath = ctx.out + "/demeaned_" + oc + ".csv";
    csv::Writer w(dpath);
    w.header({"tile_id", "period", "relative_value"});
    for (const auto& r : dm.rows)
      w.row({r.tile_id, csv::fmt(r.period), csv::fmt(r.value)});
    w.close();
    outputs.push_back(dpath);
  }
  return outputs;
}

}  // namespace

int run(const std::string& subcommand, const RunConfig& config) {
  static const std::set<std::string> known = {"grid",  "classify", "ingest",   "screen",
                                             "panel", "stack",    "estimate", "describe",
                                             "synth", "all"};
  if (!known.count(subcommand)) throw ConfigError("unknown subcommand: " + subcommand);

  fs::create_directories(config.output_dir);
  Ctx ctx{config, config.output_dir};
  Manifest manifest(config, subcommand);

  std::vector<std::pair<std::string, std::vector<std::string> (*)(const Ctx&)>> stages;
  auto add = [&](const std::string& name, std::vector<std::string> (*fn)(const Ctx&)) {
    stages.emplace_back(name, fn);
  };
  if (subcommand == "all") {
    add("classify", stage_classify);
    add("grid", stage_grid);
    add("ingest", stage_ingest);
    add("screen", stage_screen);
    add("panel", stage_panel);
    add("stack", stage_stack);
    add("estimate", stage_estimate);
    add("describe", stage_describe);
  } else if (subcommand == "synth") {
    add("synth", stage_synth);
  } else if (subcommand == "classify") {
    add("classify", stage_classify);
  } else if (subcommand == "grid") {
    add("grid", stage_grid);
  } else if (subcommand == "ingest") {
    add("ingest", stage_ingest);
  } else if (subcommand == "screen") {
    add("screen", stage_screen);
  } else if (subcommand == "panel") {
    add("panel", stage_panel);
  } else if (subcommand == "stack") {
    add("stack", stage_stack);
  } else if (subcommand == "estimate") {
    add("estimate", stage_estimate);
  } else if (subcommand == "describe") {
    add("describe", stage_describe);
  }

  try {
    for (const auto& [name, fn] : stages) {
      auto outputs = fn(ctx);
      manifest.stage_done(name, outputs);
    }
  } catch (...) {
    manifest.write();  // record completed stages before propagating
    throw;
  }
  manifest.write();
  return 0;
}

}  // namespace orepanel
