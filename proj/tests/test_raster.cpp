#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "orepanel/raster.hpp"

using namespace orepanel;

namespace {

Mask uniform_mask(uint8_t v) {
  Mask m;
  m.pixels.assign(224 * 224, v);
  return m;
}

}  // namespace

TEST_CASE("PGM round trip and validation") {
  Mask m = uniform_mask(0);
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> lab(0, 3);
  for (auto& p : m.pixels) p = static_cast<uint8_t>(lab(gen));

  std::string path = "test_mask_tmp.pgm";
  write_mask(path, m);
  auto back = read_mask(path);
  CHECK(back.pixels == m.pixels);

  // bad label is rejected with the pixel named
  m.pixels[224 * 5 + 7] = 9;
  write_mask(path, m);
  try {
    read_mask(path);
    FAIL("expected a format error");
  } catch (const std::exception& e) {
    std::string msg = e.what();
    CHECK(msg.find("7") != std::string::npos);
    CHECK(msg.find("5") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("read_mask rejects wrong dimensions") {
  std::string path = "test_mask_dim_tmp.pgm";
  FILE* f = fopen(path.c_str(), "wb");
  fprintf(f, "P5\n100 100\n255\n");
  std::vector<uint8_t> buf(100 * 100, 0);
  fwrite(buf.data(), 1, buf.size(), f);
  fclose(f);
  CHECK_THROWS(read_mask(path));
  std::remove(path.c_str());
}

TEST_CASE("class_shares excludes mine pixels") {
  Mask land = uniform_mask(kClassOther);
  // paint a 10x10 urban block and a 4x4 crop block
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) land.pixels[y * 224 + x] = kClassUrban;
  for (int y = 20; y < 24; ++y)
    for (int x = 0; x < 4; ++x) land.pixels[y * 224 + x] = kClassCrop;

  Mask mine = uniform_mask(0);
  // mine covers half of the urban block
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 5; ++x) mine.pixels[y * 224 + x] = 1;

  auto s = class_shares(land, mine);
  long total = 224L * 224 - 50;
  CHECK(s.valid_pixels == total);
  CHECK(s.urban_pixels == 50);
  CHECK(s.crop_pixels == 16);
  CHECK(s.water_pixels == 0);
  CHECK(s.urban == doctest::Approx(50.0 / total));
  CHECK(s.other + s.urban + s.crop + s.water == doctest::Approx(1.0));

  Mask all_mine = uniform_mask(1);
  CHECK_THROWS_AS(class_shares(land, all_mine), std::domain_error);
}

TEST_CASE("log_share half-pixel smoothing") {
  long n = 224L * 224;
  CHECK(log_share(0, n) == doctest::Approx(std::log(0.5 / (n + 0.5))));
  CHECK(log_share(100, n) == doctest::Approx(std::log(100.5 / (n + 0.5))));
  // monotone in the count
  double prev = log_share(0, n);
  for (long c = 1; c <= 50; ++c) {
    double cur = log_share(c, n);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("zscore") {
  auto z = zscore({-1.0, 1.0});
  CHECK(z[0] == doctest::Approx(-1.0 / std::sqrt(2.0)));
  CHECK(z[1] == doctest::Approx(1.0 / std::sqrt(2.0)));

  auto z2 = zscore({1, 2, 3, 4});
  double m = std::accumulate(z2.begin(), z2.end(), 0.0);
  CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
  double ss = 0;
  for (double v : z2) ss += v * v;
  CHECK(ss / (z2.size() - 1) == doctest::Approx(1.0));

  // shift and scale invariance
  auto z3 = zscore({11, 12, 13, 14});
  for (size_t i = 0; i < z2.size(); ++i) CHECK(z2[i] == doctest::Approx(z3[i]));
  auto z4 = zscore({3, 6, 9, 12});
  for (size_t i = 0; i < z2.size(); ++i) CHECK(z2[i] == doctest::Approx(z4[i]));

  CHECK_THROWS_AS(zscore({1.0}), std::domain_error);
  CHECK_THROWS_AS(zscore({2.0, 2.0, 2.0}), std::domain_error);
}

TEST_CASE("outcomes CSV round trip") {
  OutcomeRow r;
  r.tile_id = "t3_-2";
  r.period = 5;
  r.log_urban = -7.25;
  r.log_crop = -2.5;
  r.log_water = -10.819778284410283;
  r.wealth_raw = 0.125;
  r.conflict_count = 2;

  std::string path = "test_outcomes_tmp.csv";
  write_outcomes_csv(path, {r});
  auto back = read_outcomes_csv(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].tile_id == r.tile_id);
  CHECK(back[0].period == 5);
  // %.10g serialization keeps ~10 significant digits
  CHECK(back[0].log_urban == doctest::Approx(r.log_urban).epsilon(1e-9));
  CHECK(back[0].log_water == doctest::Approx(r.log_water).epsilon(1e-9));
  CHECK(back[0].wealth_raw == doctest::Approx(0.125));
  CHECK(back[0].conflict_count == 2);
  std::remove(path.c_str());
}
