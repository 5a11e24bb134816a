#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace orepanel {

// Land-use class labels inside a mask.
enum : uint8_t { kClassOther = 0, kClassUrban = 1, kClassCrop = 2, kClassWater = 3 };

struct Mask {
  int width = 224;
  int height = 224;
  std::vector<uint8_t> pixels;  // row-major, width*height

  uint8_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
};

// Plain binary PGM (P5), maxval 255. Dimensions must be exactly 224x224 and
// labels within the given alphabet; violations raise a format error naming
// the offending pixel.
Mask read_mask(const std::string& path, uint8_t max_label = 3);
void write_mask(const std::string& path, const Mask& mask);

struct ClassShares {
  double other = 0, urban = 0, crop = 0, water = 0;
  long valid_pixels = 0;  // non-mine pixel count
  long urban_pixels = 0, crop_pixels = 0, water_pixels = 0, other_pixels = 0;
};

// Shares of each land-use class over non-mine pixels.
// Throws std::domain_error when the mine mask covers every pixel.
ClassShares class_shares(const Mask& landuse, const Mask& mine);

// ln((class_pixels + 0.5) / (valid_pixels + 0.5)); the half-pixel smoothing
// keeps zero-share tiles in sample.
double log_share(long class_pixels, long valid_pixels);

// Standardizes with the sample sd (divisor n-1).
// Throws std::domain_error on <2 values or zero variance.
std::vector<double> zscore(const std::vector<double>& values);

struct OutcomeRow {
  std::string tile_id;
  int period = 0;
  double log_urban = 0, log_crop = 0, log_water = 0;
  double wealth_raw = 0;   // as ingested
  double wealth_z = 0;     // filled after z-scoring over the estimation sample
  int conflict_count = 0;
};

// Outcomes CSV: tile_id,period,log_urban,log_crop,log_water,wealth,conflict_count
std::vector<OutcomeRow> read_outcomes_csv(const std::string& path);
void write_outcomes_csv(const std::string& path, const std::vector<OutcomeRow>& rows);

}  // namespace orepanel
