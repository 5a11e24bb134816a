#include "orepanel/raster.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "orepanel/csv.hpp"

namespace orepanel {

Mask read_mask(const std::string& path, uint8_t max_label) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open mask: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw std::runtime_error("not a P5 PGM: " + path);
  int w, h, maxval;
  in >> w >> h >> maxval;
  if (!in || maxval != 255) throw std::runtime_error("bad PGM header: " + path);
  if (w != 224 || h != 224)
    throw std::runtime_error("mask dimensions must be 224x224, got " + std::to_string(w) +
                             "x" + std::to_string(h) + ": " + path);
  in.get();  // single whitespace after maxval
  Mask m;
  m.width = w;
  m.height = h;
  m.pixels.resize(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(m.pixels.data()), static_cast<std::streamsize>(m.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(m.pixels.size()))
    throw std::runtime_error("truncated mask: " + path);
  for (size_t i = 0; i < m.pixels.size(); ++i)
    if (m.pixels[i] > max_label)
      throw std::runtime_error("unknown label " + std::to_string(m.pixels[i]) + " at pixel (" +
                               std::to_string(i % w) + "," + std::to_string(i / w) +
                               ") in " + path);
  return m;
}

void write_mask(const std::string& path, const Mask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write mask: " + path);
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(mask.pixels.data()),
            static_cast<std::streamsize>(mask.pixels.size()));
}

ClassShares class_shares(const Mask& landuse, const Mask& mine) {
  if (landuse.width != mine.width || landuse.height != mine.height)
    throw std::invalid_argument("mask dimension mismatch");
  ClassShares s;
  long counts[4] = {0, 0, 0, 0};
  for (size_t i = 0; i < landuse.pixels.size(); ++i) {
    if (mine.pixels[i] != 0) continue;
    ++counts[landuse.pixels[i]];
    ++s.valid_pixels;
  }
  if (s.valid_pixels == 0) throw std::domain_error("mine mask covers all pixels");
  s.other_pixels = counts[kClassOther];
  s.urban_pixels = counts[kClassUrban];
  s.crop_pixels = counts[kClassCrop];
  s.water_pixels = counts[kClassWater];
  double n = static_cast<double>(s.valid_pixels);
  s.other = counts[kClassOther] / n;
  s.urban = counts[kClassUrban] / n;
  s.crop = counts[kClassCrop] / n;
  s.water = counts[kClassWater] / n;
  return s;
}

double log_share(long class_pixels, long valid_pixels) {
  if (valid_pixels < 1 || class_pixels < 0 || class_pixels > valid_pixels)
    throw std::invalid_argument("log_share: bad pixel counts");
  return std::log((class_pixels + 0.5) / (valid_pixels + 0.5));
}

std::vector<double> zscore(const std::vector<double>& values) {
  if (values.size() < 2) throw std::domain_error("zscore: need at least 2 values");
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / (values.size() - 1));
  if (sd == 0) throw std::domain_error("zscore: zero variance");
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
  return out;
}

std::vector<OutcomeRow> read_outcomes_csv(const std::string& path) {
  auto t = csv::read_file(path);
  int c_id = t.require_col("tile_id"), c_p = t.require_col("period"),
      c_u = t.require_col("log_urban"), c_c = t.require_col("log_crop"),
      c_w = t.col("log_water"), c_wealth = t.require_col("wealth"),
      c_conf = t.require_col("conflict_count");
  std::vector<OutcomeRow> out;
  for (const auto& r : t.rows) {
    OutcomeRow o;
    o.tile_id = r[c_id];
    o.period = std::stoi(r[c_p]);
    o.log_urban = std::stod(r[c_u]);
    o.log_crop = std::stod(r[c_c]);
    o.log_water = c_w >= 0 ? std::stod(r[c_w]) : 0.0;
    o.wealth_raw = std::stod(r[c_wealth]);
    o.conflict_count = std::stoi(r[c_conf]);
    out.push_back(std::move(o));
  }
  return out;
}

void write_outcomes_csv(const std::string& path, const std::vector<OutcomeRow>& rows) {
  csv::Writer w(path);
  w.header({"tile_id", "period", "log_urban", "log_crop", "log_water", "wealth",
            "conflict_count"});
  for (const auto& o : rows)
    w.row({o.tile_id, csv::fmt(o.period), csv::fmt(o.log_urban), csv::fmt(o.log_crop),
           csv::fmt(o.log_water), csv::fmt(o.wealth_raw), csv::fmt(o.conflict_count)});
}

}  // namespace orepanel
