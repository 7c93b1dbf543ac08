#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "urbanmap/errors.hpp"

// Spherical Web-Mercator arithmetic: ground resolution, global pixel coordinates,
// quadkeys and bounding-box tile ranges. Tiles are 256 px squares.

namespace urbanmap {

inline constexpr double kEarthRadiusM = 6378137.0;
inline constexpr double kMaxLatitude = 85.05112878;
inline constexpr double kMinLatitude = -85.05112878;
inline constexpr int kTileSize = 256;
inline constexpr int kMaxZoom = 23;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  /// Latitude clamped to the Mercator limits, longitude to [-180, 180].
  GeoPoint clamped() const noexcept {
    return {std::clamp(lat, kMinLatitude, kMaxLatitude), std::clamp(lon, -180.0, 180.0)};
  }
};

struct TileCoord {
  std::int64_t x = 0;
  std::int64_t y = 0;
  int zoom = 1;

  bool operator==(const TileCoord&) const = default;
};

/// Throws RangeError for zoom outside [1, 23] or x, y outside [0, 2^zoom).
void validate(const TileCoord& t);

inline void check_zoom(int zoom) {
  if (zoom < 0 || zoom > kMaxZoom) {
    throw RangeError("zoom " + std::to_string(zoom) + " outside [0, 23]");
  }
}

/// Width of the world in pixels at `zoom`.
inline std::int64_t map_size(int zoom) { return std::int64_t{kTileSize} << zoom; }

/// Meters of ground covered by one pixel at `lat` (degrees).
template <typename Scalar>
Scalar ground_resolution(Scalar lat, int zoom) {
  check_zoom(zoom);
  using std::cos;
  const Scalar clamped = std::clamp(lat, Scalar(kMinLatitude), Scalar(kMaxLatitude));
  const Scalar rad = clamped * std::numbers::pi_v<Scalar> / Scalar(180);
  return Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(kEarthRadiusM) * cos(rad) /
         static_cast<Scalar>(map_size(zoom));
}

/// Global pixel coordinates without the final clamp to the last pixel; x, y in [0, map_size].
template <typename Scalar = double>
Eigen::Matrix<Scalar, 2, 1> project_unclamped(const GeoPoint& p, int zoom) {
  check_zoom(zoom);
  const GeoPoint c = p.clamped();
  const Scalar size = static_cast<Scalar>(map_size(zoom));
  const Scalar s = std::sin(Scalar(c.lat) * std::numbers::pi_v<Scalar> / Scalar(180));
  const Scalar x = (Scalar(c.lon) + Scalar(180)) / Scalar(360);
  const Scalar y =
      Scalar(0.5) - std::log((Scalar(1) + s) / (Scalar(1) - s)) / (Scalar(4) * std::numbers::pi_v<Scalar>);
  return {std::clamp(x * size, Scalar(0), size), std::clamp(y * size, Scalar(0), size)};
}

/// Global pixel coordinates of a point, clamped to [0, map_size - 1].
template <typename Scalar = double>
Eigen::Matrix<Scalar, 2, 1> latlon_to_global_pixel(const GeoPoint& p, int zoom) {
  const Scalar last = static_cast<Scalar>(map_size(zoom) - 1);
  return project_unclamped<Scalar>(p, zoom).cwiseMin(last);
}

/// Inverse projection of a global pixel position.
template <typename Scalar = double>
GeoPoint global_pixel_to_latlon(const Eigen::Matrix<Scalar, 2, 1>& px, int zoom) {
  check_zoom(zoom);
  const Scalar size = static_cast<Scalar>(map_size(zoom));
  const Scalar x = px.x() / size - Scalar(0.5);
  const Scalar y = Scalar(0.5) - px.y() / size;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar lat = Scalar(90) - Scalar(360) * std::atan(std::exp(-y * Scalar(2) * pi)) / pi;
  return {static_cast<double>(lat), static_cast<double>(Scalar(360) * x)};
}

std::string tile_to_quadkey(const TileCoord& t);
TileCoord quadkey_to_tile(std::string_view quadkey);

/// Half-open rectangle of global pixels [x0, x1) x [y0, y1).
struct PixelBox {
  std::int64_t x0 = 0;
  std::int64_t y0 = 0;
  std::int64_t x1 = 0;
  std::int64_t y1 = 0;
  int zoom = 0;

  std::int64_t width() const noexcept { return x1 - x0; }
  std::int64_t height() const noexcept { return y1 - y0; }
};

/// Inclusive rectangle of tiles.
struct TileRange {
  std::int64_t x_min = 0;
  std::int64_t x_max = 0;
  std::int64_t y_min = 0;
  std::int64_t y_max = 0;
  int zoom = 1;

  std::int64_t columns() const noexcept { return x_max - x_min + 1; }
  std::int64_t rows() const noexcept { return y_max - y_min + 1; }
  std::int64_t count() const noexcept { return columns() * rows(); }
};

/// Smallest whole-pixel box enclosing the bounding box given by two opposite corners.
/// Throws RangeError when the box has zero area after projection.
PixelBox bbox_to_pixel_box(const GeoPoint& a, const GeoPoint& b, int zoom);

/// Minimal set of tiles covering a pixel box.
TileRange tiles_covering(const PixelBox& box);

/// Minimal tile rectangle covering the bounding box.
TileRange bbox_to_tile_range(const GeoPoint& a, const GeoPoint& b, int zoom);

}  // namespace urbanmap
