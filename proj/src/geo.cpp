#include "orepanel/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "orepanel/csv.hpp"

namespace orepanel {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

ProjectedPoint project(double lat_deg, double lon_deg, const ProjectionParams& params) {
  if (!std::isfinite(lat_deg) || !std::isfinite(lon_deg))
    throw std::invalid_argument("non-finite coordinate");
  if (lat_deg < -90.0 || lat_deg > 90.0 || lon_deg < -180.0 || lon_deg > 180.0)
    throw std::invalid_argument("coordinate out of range");
  double phi = lat_deg * kDegToRad;
  double dlam = (lon_deg - params.central_meridian_deg) * kDegToRad;
  return {params.sphere_radius_m * dlam * std::cos(phi), params.sphere_radius_m * phi};
}

void unproject(const ProjectedPoint& p, const ProjectionParams& params, double& lat_deg,
               double& lon_deg) {
  double phi = p.y_m / params.sphere_radius_m;
  lat_deg = phi / kDegToRad;
  lon_deg = params.central_meridian_deg + p.x_m / (params.sphere_radius_m * std::cos(phi)) / kDegToRad;
}

double distance(const ProjectedPoint& a, const ProjectedPoint& b) {
  return std::hypot(a.x_m - b.x_m, a.y_m - b.y_m);
}

static std::string tile_id_for(long ix, long iy) {
  return "t" + std::to_string(ix) + "_" + std::to_string(iy);
}

std::vector<Tile> generate_grid(const std::vector<Deposit>& deposits,
                                const ProjectionParams& proj, const GridParams& grid) {
  if (deposits.empty()) throw std::invalid_argument("generate_grid: no deposits");
  if (grid.tile_size_m <= 0) throw std::invalid_argument("generate_grid: tile_size_m <= 0");

  const double S = grid.tile_size_m;
  const double R = grid.radius_m;
  std::set<std::pair<long, long>> cells;
  for (const auto& d : deposits) {
    ProjectedPoint c = project(d.lat, d.lon, proj);
    long ix_lo = static_cast<long>(std::floor((c.x_m - R) / S)) - 1;
    long ix_hi = static_cast<long>(std::floor((c.x_m + R) / S)) + 1;
    long iy_lo = static_cast<long>(std::floor((c.y_m - R) / S)) - 1;
    long iy_hi = static_cast<long>(std::floor((c.y_m + R) / S)) + 1;
    for (long ix = ix_lo; ix <= ix_hi; ++ix)
      for (long iy = iy_lo; iy <= iy_hi; ++iy) {
        ProjectedPoint cen{(ix + 0.5) * S, (iy + 0.5) * S};
        if (distance(cen, c) <= R) cells.insert({ix, iy});
      }
  }
  std::vector<Tile> out;
  out.reserve(cells.size());
  for (const auto& [ix, iy] : cells)
    out.push_back({tile_id_for(ix, iy), ix, iy, {(ix + 0.5) * S, (iy + 0.5) * S}});
  return out;
}

std::vector<Assignment> assign_tiles(const std::vector<Tile>& tiles,
                                     const std::vector<Deposit>& deposits,
                                     const StatusMap& statuses, int period,
                                     const ProjectionParams& proj, const GridParams& grid) {
  struct ProjDeposit {
    long id;
    ProjectedPoint p;
    MineStatus status;
  };
  std::vector<ProjDeposit> pd;
  pd.reserve(deposits.size());
  for (const auto& d : deposits) {
    auto it = statuses.find(d.deposit_id);
    if (it == statuses.end())
      throw std::invalid_argument("assign_tiles: no status for deposit " +
                                  std::to_string(d.deposit_id));
    pd.push_back({d.deposit_id, project(d.lat, d.lon, proj), it->second.status});
  }
  // Ties broken by smallest deposit_id.
  std::sort(pd.begin(), pd.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  std::vector<Assignment> out;
  for (const auto& t : tiles) {
    long best_active = -1, best_inactive = -1;
    double d_active = std::numeric_limits<double>::infinity();
    double d_inactive = std::numeric_limits<double>::infinity();
    std::set<MineStatus> active_cats_in_range;
    for (const auto& d : pd) {
      double dist = distance(t.centroid, d.p);
      if (dist > grid.radius_m) continue;
      if (is_active_status(d.status)) {
        active_cats_in_range.insert(d.status);
        if (dist < d_active) {
          d_active = dist;
          best_active = d.id;
        }
      } else if (dist < d_inactive) {
        d_inactive = dist;
        best_inactive = d.id;
      }
    }
    long chosen = best_active >= 0 ? best_active : best_inactive;
    if (chosen < 0) continue;  // farther than 40 km from every deposit
    double dist = best_active >= 0 ? d_active : d_inactive;
    Assignment a;
    a.tile_id = t.tile_id;
    a.period = period;
    a.deposit_id = chosen;
    a.distance_m = dist;
    a.band = dist < kNearThresholdM ? Band::Near : Band::Far;
    a.dropped_confounded = active_cats_in_range.size() > 1;
    out.push_back(std::move(a));
  }
  return out;
}

void write_tiles_csv(const std::string& path, const std::vector<Tile>& tiles) {
  csv::Writer w(path);
  w.header({"tile_id", "ix", "iy", "centroid_x_m", "centroid_y_m"});
  for (const auto& t : tiles)
    w.row({t.tile_id, csv::fmt(t.ix), csv::fmt(t.iy), csv::fmt(t.centroid.x_m),
           csv::fmt(t.centroid.y_m)});
}

std::vector<Tile> read_tiles_csv(const std::string& path) {
  auto t = csv::read_file(path);
  int c_id = t.require_col("tile_id"), c_ix = t.require_col("ix"), c_iy = t.require_col("iy"),
      c_x = t.require_col("centroid_x_m"), c_y = t.require_col("centroid_y_m");
  std::vector<Tile> out;
  for (const auto& r : t.rows)
    out.push_back({r[c_id], std::stol(r[c_ix]), std::stol(r[c_iy]),
                   {std::stod(r[c_x]), std::stod(r[c_y])}});
  return out;
}

void write_assignments_csv(const std::string& path, const std::vector<Assignment>& a) {
  csv::Writer w(path);
  w.header({"tile_id", "period", "deposit_id", "distance_m", "band", "dropped_confounded"});
  for (const auto& x : a)
    w.row({x.tile_id, csv::fmt(x.period), csv::fmt(x.deposit_id), csv::fmt(x.distance_m),
           band_name(x.band), x.dropped_confounded ? "1" : "0"});
}

std::vector<Assignment> read_assignments_csv(const std::string& path) {
  auto t = csv::read_file(path);
  int c_id = t.require_col("tile_id"), c_p = t.require_col("period"),
      c_d = t.require_col("deposit_id"), c_dist = t.require_col("distance_m"),
      c_b = t.require_col("band"), c_conf = t.require_col("dropped_confounded");
  std::vector<Assignment> out;
  for (const auto& r : t.rows) {
    Assignment a;
    a.tile_id = r[c_id];
    a.period = std::stoi(r[c_p]);
    a.deposit_id = std::stol(r[c_d]);
    a.distance_m = std::stod(r[c_dist]);
    a.band = r[c_b] == "near" ? Band::Near : Band::Far;
    a.dropped_confounded = r[c_conf] == "1";
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace orepanel
