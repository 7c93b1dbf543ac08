#include <doctest.h>

#include <cmath>
#include <random>

#include "urbanmap/tilemath.hpp"

using namespace urbanmap;

namespace {

// Independent projection used as an oracle: long double, textbook form.
std::pair<long double, long double> oracle_pixel(long double lat, long double lon, int zoom) {
  const long double pi = 3.141592653589793238462643383279502884L;
  const long double size = 256.0L * std::pow(2.0L, zoom);
  const long double s = std::sin(lat * pi / 180.0L);
  return {(lon + 180.0L) / 360.0L * size, (0.5L - std::log((1 + s) / (1 - s)) / (4 * pi)) * size};
}

// Bit-interleave quadkey written independently of the library routine.
std::string oracle_quadkey(std::int64_t x, std::int64_t y, int zoom) {
  std::string key;
  for (int bit = zoom - 1; bit >= 0; --bit) {
    key += static_cast<char>('0' + 2 * ((y >> bit) & 1) + ((x >> bit) & 1));
  }
  return key;
}

}  // namespace

TEST_CASE("ground resolution") {
  CHECK(std::abs(ground_resolution(0.0, 0) - 156543.034) <= 1e-3);
  CHECK(ground_resolution(0.0, 1) == ground_resolution(0.0, 0) / 2);
  // Dhaka's latitude at zoom 17, evaluated with the same formula in Python.
  CHECK(std::abs(ground_resolution(23.81, 17) - 1.0926783334030215) < 1e-9);
  CHECK(std::abs(ground_resolution(23.81, 16) - 2.185356666806043) < 1e-9);
  CHECK_THROWS_AS(ground_resolution(0.0, 24), RangeError);
  CHECK_THROWS_AS(ground_resolution(0.0, -1), RangeError);

  for (double lat : {-80.0, -33.3, 0.0, 12.5, 23.81, 60.0}) {
    for (int z = 0; z < kMaxZoom; ++z) CHECK(ground_resolution(lat, z + 1) == ground_resolution(lat, z) / 2);
  }
  CHECK(ground_resolution(23.81f, 17) == doctest::Approx(1.0926783f).epsilon(1e-5));
}

TEST_CASE("latlon to global pixel") {
  const Eigen::Vector2d center = latlon_to_global_pixel({0, 0}, 1);
  CHECK(center.x() == 256.0);
  CHECK(center.y() == 256.0);

  const Eigen::Vector2d left = latlon_to_global_pixel({0, -180}, 0);
  CHECK(left.x() == 0.0);
  CHECK(left.y() == doctest::Approx(128.0).epsilon(1e-12));

  const Eigen::Vector2d corner = latlon_to_global_pixel({kMaxLatitude, -180}, 2);
  CHECK(corner.x() == 0.0);
  CHECK(corner.y() == 0.0);

  // Far corner clamps to the last pixel.
  const Eigen::Vector2d far = latlon_to_global_pixel({-89.0, 180.0}, 3);
  CHECK(far.x() == 2047.0);
  CHECK(far.y() == 2047.0);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(-85.0, 85.0), lon(-180.0, 179.999);
  for (int i = 0; i < 500; ++i) {
    const GeoPoint p{lat(rng), lon(rng)};
    const int zoom = 1 + static_cast<int>(rng() % 20);
    const Eigen::Vector2d px = latlon_to_global_pixel(p, zoom);
    const auto [ox, oy] = oracle_pixel(p.lat, p.lon, zoom);
    CHECK(std::abs(px.x() - static_cast<double>(ox)) <= 1e-6);
    CHECK(std::abs(px.y() - static_cast<double>(oy)) <= 1e-6);

    const GeoPoint back = global_pixel_to_latlon(px, zoom);
    CHECK(std::abs(back.lat - p.lat) < 1e-9);
    CHECK(std::abs(back.lon - p.lon) < 1e-9);
  }
}

TEST_CASE("quadkeys") {
  CHECK(tile_to_quadkey({0, 0, 1}) == "0");
  CHECK(tile_to_quadkey({3, 5, 3}) == oracle_quadkey(3, 5, 3));
  CHECK(tile_to_quadkey({3, 5, 3}) == "213");
  CHECK(quadkey_to_tile("213") == TileCoord{3, 5, 3});
  CHECK(quadkey_to_tile("0") == TileCoord{0, 0, 1});
  CHECK_THROWS_AS(quadkey_to_tile("4"), ParseError);
  CHECK_THROWS_AS(quadkey_to_tile(""), ParseError);
  CHECK_THROWS_AS(quadkey_to_tile("01x"), ParseError);
  CHECK_THROWS_AS(tile_to_quadkey({2, 0, 1}), RangeError);
  CHECK_THROWS_AS(tile_to_quadkey({0, 0, 0}), RangeError);

  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const int zoom = 2 + static_cast<int>(rng() % 22);
    const std::int64_t n = std::int64_t{1} << zoom;
    const TileCoord t{static_cast<std::int64_t>(rng() % n), static_cast<std::int64_t>(rng() % n), zoom};
    const std::string key = tile_to_quadkey(t);
    CHECK(key == oracle_quadkey(t.x, t.y, zoom));
    CHECK(quadkey_to_tile(key) == t);
    // The parent tile's key is the child's key minus its last digit.
    CHECK(tile_to_quadkey({t.x / 2, t.y / 2, zoom - 1}) == key.substr(0, key.size() - 1));
  }
}

TEST_CASE("pixel to tile consistency") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lat(-85.0, 85.0), lon(-180.0, 179.999);
  for (int i = 0; i < 200; ++i) {
    const GeoPoint p{lat(rng), lon(rng)};
    const int zoom = 1 + static_cast<int>(rng() % 22);
    const Eigen::Vector2d px = latlon_to_global_pixel(p, zoom);
    const TileCoord t{static_cast<std::int64_t>(px.x()) / kTileSize, static_cast<std::int64_t>(px.y()) / kTileSize,
                      zoom};
    validate(t);
    CHECK(px.x() >= static_cast<double>(t.x * kTileSize));
    CHECK(px.x() < static_cast<double>((t.x + 1) * kTileSize));
    CHECK(px.y() >= static_cast<double>(t.y * kTileSize));
    CHECK(px.y() < static_cast<double>((t.y + 1) * kTileSize));
  }
}

TEST_CASE("bounding box tile ranges") {
  const TileRange world = bbox_to_tile_range({kMaxLatitude, -180}, {kMinLatitude, 180}, 1);
  CHECK(world.x_min == 0);
  CHECK(world.x_max == 1);
  CHECK(world.y_min == 0);
  CHECK(world.y_max == 1);

  // Inside tile (x=0, y=0) at zoom 1 (north-west quadrant).
  const TileRange one = bbox_to_tile_range({40, -100}, {30, -90}, 1);
  CHECK(one.count() == 1);
  CHECK(one.x_min == 0);
  CHECK(one.y_min == 0);

  // Dhaka-sized box at zoom 17. Tile counts from the independent pixel formulas.
  const GeoPoint nw{24.05, 90.20}, se{23.60, 90.65};
  const TileRange dhaka = bbox_to_tile_range(nw, se, 17);
  const auto [ax, ay] = oracle_pixel(nw.lat, nw.lon, 17);
  const auto [bx, by] = oracle_pixel(se.lat, se.lon, 17);
  const auto cols = static_cast<std::int64_t>(std::floor(bx / 256) - std::floor(ax / 256) + 1);
  const auto rows = static_cast<std::int64_t>(std::floor(by / 256) - std::floor(ay / 256) + 1);
  CHECK(dhaka.columns() == cols);
  CHECK(dhaka.rows() == rows);
  CHECK(dhaka.columns() == 165);
  CHECK(dhaka.rows() == 180);
  const auto span_cols = static_cast<std::int64_t>(std::ceil((bx - ax) / 256));
  const auto span_rows = static_cast<std::int64_t>(std::ceil((by - ay) / 256));
  CHECK(dhaka.columns() >= span_cols);
  CHECK(dhaka.columns() <= span_cols + 1);
  CHECK(dhaka.rows() >= span_rows);
  CHECK(dhaka.rows() <= span_rows + 1);

  // Corner order does not matter.
  const TileRange swapped = bbox_to_tile_range(se, nw, 17);
  CHECK(swapped.x_min == dhaka.x_min);
  CHECK(swapped.y_max == dhaka.y_max);

  CHECK_THROWS_AS(bbox_to_tile_range({10, 10}, {10, 20}, 5), RangeError);
  CHECK_THROWS_AS(bbox_to_tile_range({10, 10}, {20, 10}, 5), RangeError);
}

TEST_CASE("pixel box spans whole tiles exactly") {
  // Corners just inside tiles x in [2, 3], y in [1, 2] at zoom 3.
  const int zoom = 3;
  const GeoPoint a = global_pixel_to_latlon<double>(Eigen::Vector2d(512.25, 256.25), zoom);
  const GeoPoint b = global_pixel_to_latlon<double>(Eigen::Vector2d(1023.75, 767.75), zoom);
  const PixelBox box = bbox_to_pixel_box(a, b, zoom);
  CHECK(box.x0 == 512);
  CHECK(box.x1 == 1024);
  CHECK(box.y0 == 256);
  CHECK(box.y1 == 768);
  const TileRange r = tiles_covering(box);
  CHECK(r.columns() == 2);
  CHECK(r.rows() == 2);
}
