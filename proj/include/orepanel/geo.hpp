#pragma once

#include <string>
#include <vector>

#include "orepanel/lifecycle.hpp"

namespace orepanel {

struct ProjectionParams {
  double central_meridian_deg = 15.0;
  double sphere_radius_m = 6371007.181;
};

struct ProjectedPoint {
  double x_m = 0;
  double y_m = 0;
};

// Sinusoidal (equal-area) projection on a sphere.
ProjectedPoint project(double lat_deg, double lon_deg, const ProjectionParams& params = {});
void unproject(const ProjectedPoint& p, const ProjectionParams& params, double& lat_deg,
               double& lon_deg);
double distance(const ProjectedPoint& a, const ProjectedPoint& b);

struct Tile {
  std::string tile_id;
  long ix = 0, iy = 0;  // signed grid indices, grid anchored at projected origin
  ProjectedPoint centroid;
};

struct GridParams {
  double tile_size_m = 6720.0;  // 224 px at 30 m
  double radius_m = 40000.0;
};

// All tiles whose centroid lies within radius_m of at least one deposit,
// deduplicated across deposits. Throws std::invalid_argument on empty input.
std::vector<Tile> generate_grid(const std::vector<Deposit>& deposits,
                                const ProjectionParams& proj = {},
                                const GridParams& grid = {});

enum class Band { Near, Far };

inline const char* band_name(Band b) { return b == Band::Near ? "near" : "far"; }

struct Assignment {
  std::string tile_id;
  int period = 0;
  long deposit_id = 0;
  double distance_m = 0;
  Band band = Band::Near;
  bool dropped_confounded = false;
};

constexpr double kNearThresholdM = 20000.0;

// Assigns each tile within 40 km of any deposit to the closest Active-status
// deposit if one is within range, else the closest Inactive one. Tiles within
// range of deposits in two different Active categories are flagged confounded.
std::vector<Assignment> assign_tiles(const std::vector<Tile>& tiles,
                                     const std::vector<Deposit>& deposits,
                                     const StatusMap& statuses, int period,
                                     const ProjectionParams& proj = {},
                                     const GridParams& grid = {});

void write_tiles_csv(const std::string& path, const std::vector<Tile>& tiles);
std::vector<Tile> read_tiles_csv(const std::string& path);
void write_assignments_csv(const std::string& path, const std::vector<Assignment>& a);
std::vector<Assignment> read_assignments_csv(const std::string& path);

}  // namespace orepanel
