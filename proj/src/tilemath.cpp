#include "urbanmap/tilemath.hpp"

namespace urbanmap {

void validate(const TileCoord& t) {
  if (t.zoom < 1 || t.zoom > kMaxZoom) {
    throw RangeError("tile zoom " + std::to_string(t.zoom) + " outside [1, 23]");
  }
  const std::int64_t n = std::int64_t{1} << t.zoom;
  if (t.x < 0 || t.y < 0 || t.x >= n || t.y >= n) {
    throw RangeError("tile (" + std::to_string(t.x) + ", " + std::to_string(t.y) +
                     ") outside zoom " + std::to_string(t.zoom));
  }
}

std::string tile_to_quadkey(const TileCoord& t) {
  validate(t);
  std::string key;
  key.reserve(static_cast<std::size_t>(t.zoom));
  for (int i = t.zoom; i > 0; --i) {
    const std::int64_t mask = std::int64_t{1} << (i - 1);
    char digit = '0';
    if (t.x & mask) digit += 1;
    if (t.y & mask) digit += 2;
    key.push_back(digit);
  }
  return key;
}

TileCoord quadkey_to_tile(std::string_view quadkey) {
  if (quadkey.empty()) throw ParseError("empty quadkey");
  if (quadkey.size() > static_cast<std::size_t>(kMaxZoom)) {
    throw ParseError("quadkey '" + std::string(quadkey) + "' deeper than zoom 23");
  }
  TileCoord t{0, 0, static_cast<int>(quadkey.size())};
  for (std::size_t i = 0; i < quadkey.size(); ++i) {
    const std::int64_t mask = std::int64_t{1} << (quadkey.size() - 1 - i);
    switch (quadkey[i]) {
      case '0': break;
      case '1': t.x |= mask; break;
      case '2': t.y |= mask; break;
      case '3': t.x |= mask; t.y |= mask; break;
      default:
        throw ParseError("invalid quadkey digit '" + std::string(1, quadkey[i]) + "' in '" +
                         std::string(quadkey) + "'");
    }
  }
  return t;
}

PixelBox bbox_to_pixel_box(const GeoPoint& a, const GeoPoint& b, int zoom) {
  const Eigen::Vector2d pa = project_unclamped(a, zoom);
  const Eigen::Vector2d pb = project_unclamped(b, zoom);
  const Eigen::Vector2d lo = pa.cwiseMin(pb);
  const Eigen::Vector2d hi = pa.cwiseMax(pb);
  if (!(hi.x() > lo.x()) || !(hi.y() > lo.y())) {
    throw RangeError("degenerate bounding box: zero area at zoom " + std::to_string(zoom));
  }
  PixelBox box;
  box.zoom = zoom;
  box.x0 = static_cast<std::int64_t>(std::floor(lo.x()));
  box.y0 = static_cast<std::int64_t>(std::floor(lo.y()));
  box.x1 = static_cast<std::int64_t>(std::ceil(hi.x()));
  box.y1 = static_cast<std::int64_t>(std::ceil(hi.y()));
  return box;
}

TileRange tiles_covering(const PixelBox& box) {
  return {box.x0 / kTileSize, (box.x1 - 1) / kTileSize, box.y0 / kTileSize, (box.y1 - 1) / kTileSize,
          box.zoom};
}

TileRange bbox_to_tile_range(const GeoPoint& a, const GeoPoint& b, int zoom) {
  return tiles_covering(bbox_to_pixel_box(a, b, zoom));
}

}  // namespace urbanmap
