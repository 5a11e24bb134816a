#include "orepanel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "orepanel/csv.hpp"

namespace orepanel {

namespace {

// Deterministic stream RNG; normals via Box-Muller so output does not depend
// on the standard library's distribution implementation.
struct Rng {
  std::mt19937_64 gen;

  explicit Rng(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    gen.seed(z ^ (z >> 31));
  }

  double uniform() {
    return (gen() >> 11) * (1.0 / 9007199254740992.0);  // [0, 1)
  }

  double normal() {
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(uniform() * (hi - lo + 1));
  }
};

enum Stream : uint64_t { kPlacement = 1, kShocks = 2, kConflict = 3 };

}  // namespace

void SynthConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(share_opening) || !prob(share_closing) || !prob(share_continuous) ||
      !prob(share_not_yet))
    throw std::invalid_argument("synth config: shares must be in [0, 1]");
  if (share_opening + share_closing + share_continuous + share_not_yet > 1.0 + 1e-12)
    throw std::invalid_argument("synth config: shares sum to more than 1");
  if (!prob(conflict_base_p) || !prob(conflict_treat_uplift_autocracy) ||
      !prob(democracy_share))
    throw std::invalid_argument("synth config: probabilities must be in [0, 1]");
  if (n_countries < 1 || deposits_per_country < 1)
    throw std::invalid_argument("synth config: need at least one country and deposit");
  if (noise_sd < 0) throw std::invalid_argument("synth config: noise_sd < 0");
  if (opening_g_min < 2 || opening_g_max > 12 || opening_g_min > opening_g_max)
    throw std::invalid_argument("synth config: opening event periods must lie in 2..12");
}

SynthOutput generate(const SynthConfig& config) {
  config.validate();
  SynthOutput out;
  PeriodCalendar cal;
  Rng place(config.seed, kPlacement);
  Rng shocks(config.seed, kShocks);
  Rng conflict_rng(config.seed, kConflict);

  const int n_democ = static_cast<int>(std::lround(config.democracy_share * config.n_countries));
  for (int c = 0; c < config.n_countries; ++c) {
    CountryMeta m;
    m.country = "C" + std::to_string(c);
    m.polity2_mean = c < n_democ ? 5.0 : -5.0;
    out.countries.push_back(m);
  }

  // Deposits on a sparse lattice: >90 km apart so grids never overlap and no
  // tile can sit within 40 km of two deposits.
  const int total = config.n_countries * config.deposits_per_country;
  long next_id = 1;
  for (int k = 0; k < total; ++k) {
    Deposit d;
    d.deposit_id = next_id++;
    int row = k / 40, col = k % 40;
    d.lat = row * 1.0;
    d.lon = 16.0 + col * 1.3;
    d.country = out.countries[k % config.n_countries].country;
    d.size_class = place.uniform() < 0.4 ? SizeClass::Large : SizeClass::Small;

    double u = place.uniform();
    if (u < config.share_opening) {
      int g = place.uniform_int(config.opening_g_min, config.opening_g_max);
      d.activity.push_back({cal.first_year(g), cal.last_year()});
      d.discovery_year = 1984 + place.uniform_int(0, 5);
      out.truth.event_period[d.deposit_id] = g;
    } else if (u < config.share_opening + config.share_closing) {
      int l = place.uniform_int(3, 6);
      d.activity.push_back({1970, cal.last_year(l)});
      d.discovery_year = 1950 + place.uniform_int(0, 20);
    } else if (u < config.share_opening + config.share_closing + config.share_continuous) {
      d.activity.push_back({1980, cal.last_year()});
      d.discovery_year = 1950 + place.uniform_int(0, 20);
    } else if (u < config.share_opening + config.share_closing + config.share_continuous +
                       config.share_not_yet) {
      d.discovery_year = 1984 + place.uniform_int(0, 10);
    } else {
      d.activity.push_back({1960, 1975});
      d.discovery_year = 1950 + place.uniform_int(0, 10);
    }
    out.deposits.push_back(std::move(d));
  }

  out.truth.att_urban = config.att_urban;
  out.truth.dynamic_profile = config.dynamic_profile;
  out.truth.conflict_base_p = config.conflict_base_p;
  out.truth.conflict_treat_uplift_autocracy = config.conflict_treat_uplift_autocracy;

  ProjectionParams proj;
  GridParams grid{config.tile_size_m, config.grid_radius_m};
  auto tiles = generate_grid(out.deposits, proj, grid);
  auto statuses = classify_all(out.deposits, cal);
  auto assignments = assign_tiles(tiles, out.deposits, statuses, 1, proj, grid);

  std::map<std::string, int> country_idx;
  for (size_t c = 0; c < out.countries.size(); ++c)
    country_idx[out.countries[c].country] = static_cast<int>(c);
  std::map<long, const Deposit*> dep_by_id;
  for (const auto& d : out.deposits) dep_by_id[d.deposit_id] = &d;

  // country x period shocks, drawn first so tile draws are unaffected by counts
  std::vector<std::vector<double>> cp_shock(out.countries.size(),
                                            std::vector<double>(cal.n_periods + 1, 0.0));
  for (size_t c = 0; c < out.countries.size(); ++c)
    for (int p = 1; p <= cal.n_periods; ++p)
      cp_shock[c][p] = config.country_period_shock_sd * shocks.normal();

  for (const auto& a : assignments) {
    const Deposit& dep = *dep_by_id.at(a.deposit_id);
    const StatusInfo& st = statuses.at(a.deposit_id);
    int ci = country_idx.at(dep.country);
    bool democ = out.countries[ci].polity2_mean > 0;
    bool opening = st.status == MineStatus::Opening;
    int baseline = opening ? st.event_period - 1 : 0;

    double tile_urban = -4.0 + config.tile_effect_sd * shocks.normal();
    double tile_crop = -2.0 + config.tile_effect_sd * shocks.normal();
    double tile_wealth = config.tile_effect_sd * shocks.normal();

    for (int p = 1; p <= cal.n_periods; ++p) {
      OutcomeRow o;
      o.tile_id = a.tile_id;
      o.period = p;
      double effect = 0.0;
      if (opening) {
        int t = p - baseline;
        if (t >= 1) {
          effect = config.dynamic_profile.empty()
                       ? config.att_urban
                       : config.dynamic_profile[std::min<size_t>(
                             t - 1, config.dynamic_profile.size() - 1)];
        } else if (t < 0) {
          effect = config.pre_trend * t;
        }
      }
      o.log_urban = tile_urban + cp_shock[ci][p] + effect + config.noise_sd * shocks.normal();
      o.log_crop = tile_crop + cp_shock[ci][p] + config.noise_sd * shocks.normal();
      o.log_water = -6.0;
      o.wealth_raw = tile_wealth + cp_shock[ci][p] + config.noise_sd * shocks.normal();
      if (p >= 2) {
        double pc = config.conflict_base_p;
        if (opening && !democ && p - baseline >= 1)
          pc += config.conflict_treat_uplift_autocracy;
        o.conflict_count = conflict_rng.uniform() < pc ? 1 : 0;
      }
      out.outcomes.push_back(std::move(o));
    }
  }
  return out;
}

static Mask shares_to_mask(long urban_px, long crop_px, long water_px) {
  Mask m;
  m.pixels.assign(224 * 224, kClassOther);
  long i = 0;
  for (long k = 0; k < urban_px; ++k) m.pixels[i++] = kClassUrban;
  for (long k = 0; k < crop_px; ++k) m.pixels[i++] = kClassCrop;
  for (long k = 0; k < water_px; ++k) m.pixels[i++] = kClassWater;
  return m;
}

void write_synth_output(const std::string& out_dir, const SynthOutput& out,
                        const SynthConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_deposits_csv(out_dir + "/deposits.csv", out.deposits);
  write_country_csv(out_dir + "/countries.csv", out.countries);
  write_outcomes_csv(out_dir + "/outcomes.csv", out.outcomes);

  csv::Writer gt(out_dir + "/ground_truth.csv");
  gt.header({"kind", "key", "value"});
  gt.row({"att_urban", "", csv::fmt(out.truth.att_urban)});
  gt.row({"conflict_base_p", "", csv::fmt(out.truth.conflict_base_p)});
  gt.row({"conflict_treat_uplift_autocracy", "",
          csv::fmt(out.truth.conflict_treat_uplift_autocracy)});
  for (size_t t = 0; t < out.truth.dynamic_profile.size(); ++t)
    gt.row({"profile", csv::fmt(static_cast<int>(t + 1)),
            csv::fmt(out.truth.dynamic_profile[t])});
  for (const auto& [id, g] : out.truth.event_period)
    gt.row({"event_period", csv::fmt(id), csv::fmt(g)});

  if (!config.emit_masks) return;
  fs::create_directories(out_dir + "/masks");
  const long n_px = 224L * 224L;
  std::set<std::string> chosen;
  for (const auto& o : out.outcomes) {
    if (chosen.size() >= static_cast<size_t>(config.masks_max_tiles) &&
        !chosen.count(o.tile_id))
      continue;
    chosen.insert(o.tile_id);
    auto px_of = [&](double log_share_v, long remaining) {
      long px = std::lround(std::exp(log_share_v) * (n_px + 0.5) - 0.5);
      return std::clamp(px, 0L, remaining);
    };
    long u = px_of(o.log_urban, n_px);
    long c = px_of(o.log_crop, n_px - u);
    long w = px_of(o.log_water, n_px - u - c);
    Mask landuse = shares_to_mask(u, c, w);
    Mask mine;
    mine.pixels.assign(224 * 224, 0);
    std::string base = out_dir + "/masks/" + o.tile_id + "_" + std::to_string(o.period);
    write_mask(base + "_landuse.pgm", landuse);
    write_mask(base + "_mine.pgm", mine);
  }
}

double oracle_did(const std::vector<double>& treat_pre, const std::vector<double>& treat_post,
                  const std::vector<double>& ctrl_pre, const std::vector<double>& ctrl_post) {
  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("oracle_did: empty cell");
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  };
  return (mean(treat_post) - mean(treat_pre)) - (mean(ctrl_post) - mean(ctrl_pre));
}

}  // namespace orepanel
