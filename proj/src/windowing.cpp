#include "urbanmap/windowing.hpp"

#include <cmath>

namespace urbanmap {

Index WindowSpec::stride() const {
  validate();
  return std::max<Index>(1, static_cast<Index>(std::lround(static_cast<double>(size) * (1.0 - overlap))));
}

void WindowSpec::validate() const {
  if (size < 1) throw ConfigError("window size must be at least 1");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("window overlap must lie in [0, 1)");
}

std::vector<Index> window_origins(Index dimension, const WindowSpec& spec) {
  const Index stride = spec.stride();
  if (dimension < spec.size) {
    throw DimensionError("dimension " + std::to_string(dimension) + " is smaller than the window (" +
                         std::to_string(spec.size) + "); pad the mosaic before gridding");
  }
  std::vector<Index> origins;
  for (Index o = 0; o + spec.size <= dimension; o += stride) origins.push_back(o);
  if (origins.back() != dimension - spec.size) origins.push_back(dimension - spec.size);
  return origins;
}

WindowGrid grid_windows(Index width, Index height, const WindowSpec& spec) {
  return {window_origins(width, spec), window_origins(height, spec), width, height, spec.size};
}

SplitRows split_rows(Index height, const SplitSpec& spec) {
  if (height < 2) throw RangeError("raster needs at least two rows to split");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw RangeError("train fraction must lie in (0, 1)");
  }
  const Index train = static_cast<Index>(std::lround(static_cast<double>(height) * spec.train_fraction));
  if (train < 1) throw RangeError("split leaves the training region empty");
  if (train >= height) throw RangeError("split leaves the test region empty");
  return {train, height - train};
}

std::string_view role_name(TileRole role) noexcept { return role == TileRole::Train ? "train" : "test"; }

TileRole parse_role(std::string_view name) {
  if (name == "train") return TileRole::Train;
  if (name == "test") return TileRole::Test;
  throw ParseError("unknown tile role '" + std::string(name) + "'");
}

std::vector<TileRecord> extract_tiles(const GeoRaster& image, const std::optional<LabelRaster>& labels,
                                      const WindowGrid& grid, TileRole role) {
  if (image.width() != grid.width || image.height() != grid.height) {
    throw DimensionError("image dimensions differ from the grid's source");
  }
  if (labels && (labels->width() != grid.width || labels->height() != grid.height)) {
    throw DimensionError("label dimensions differ from the grid's source");
  }
  const GeoRaster source = labels ? apply_unrecognized_mask(image, *labels) : image;
  std::vector<TileRecord> tiles;
  tiles.reserve(grid.count());
  for (const Index oy : grid.origins_y) {
    for (const Index ox : grid.origins_x) {
      const PixelRect rect{ox, oy, grid.size, grid.size};
      TileRecord rec{ox, oy, grid.size, role, source.crop(rect), std::nullopt};
      if (labels) rec.label = labels->crop(rect);
      tiles.push_back(std::move(rec));
    }
  }
  return tiles;
}

std::vector<std::pair<PixelRect, LabelRaster>> extract_label_tiles(const LabelRaster& labels,
                                                                   const WindowGrid& grid) {
  if (labels.width() != grid.width || labels.height() != grid.height) {
    throw DimensionError("label dimensions differ from the grid's source");
  }
  std::vector<std::pair<PixelRect, LabelRaster>> tiles;
  tiles.reserve(grid.count());
  for (const Index oy : grid.origins_y) {
    for (const Index ox : grid.origins_x) {
      const PixelRect rect{ox, oy, grid.size, grid.size};
      tiles.emplace_back(rect, labels.crop(rect));
    }
  }
  return tiles;
}

LabelRaster stitch(const std::vector<PlacedTile>& tiles, Index width, Index height, MergePolicy policy,
                   const ColorMap& palette) {
  if (width <= 0 || height <= 0) throw DimensionError("stitch target must have positive size");
  for (const PlacedTile& t : tiles) {
    if (t.x < 0 || t.y < 0 || t.x + t.labels.width() > width || t.y + t.labels.height() > height) {
      throw RangeError("tile at (" + std::to_string(t.x) + ", " + std::to_string(t.y) +
                       ") leaves the " + std::to_string(width) + "x" + std::to_string(height) +
                       " target");
    }
  }

  // Per-pixel vote counts, one row of kNumLabels counters per pixel.
  using Votes = Eigen::Array<std::uint32_t, Eigen::Dynamic, kNumLabels, Eigen::RowMajor>;
  Eigen::Array<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> coverage =
      decltype(coverage)::Zero(height, width);
  LabelRaster::Storage out = LabelRaster::Storage::Zero(height, width);
  Votes votes;
  if (policy == MergePolicy::MajorityVote) votes = Votes::Zero(width * height, kNumLabels);

  for (const PlacedTile& t : tiles) {
    const auto& cls = t.labels.classes();
    for (Index y = 0; y < cls.rows(); ++y) {
      for (Index x = 0; x < cls.cols(); ++x) {
        const Index gx = t.x + x, gy = t.y + y;
        const std::uint8_t c = cls(y, x);
        if (policy == MergePolicy::MajorityVote) {
          ++votes(gy * width + gx, c);
        } else if (coverage(gy, gx) == 0) {
          out(gy, gx) = c;
        }
        ++coverage(gy, gx);
      }
    }
  }

  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      if (coverage(y, x) == 0) {
        throw CoverageError("pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                                ") is not covered by any tile",
                            static_cast<long>(x), static_cast<long>(y));
      }
    }
  }

  if (policy == MergePolicy::MajorityVote) {
    for (Index p = 0; p < width * height; ++p) {
      int best = 0;
      for (int c = 1; c < kNumLabels; ++c) {
        if (votes(p, c) > votes(p, best)) best = c;  // strict: ties keep the lower index
      }
      out(p / width, p % width) = static_cast<std::uint8_t>(best);
    }
  }
  return LabelRaster(std::move(out), palette);
}

}  // namespace urbanmap
