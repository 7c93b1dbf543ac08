#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "urbanmap/raster.hpp"

// Train/test split, overlap gridding into fixed-size windows, tile extraction and
// stitching of per-tile predictions.

namespace urbanmap {

struct WindowSpec {
  Index size = 513;
  /// Fraction of a window shared with its predecessor, in [0, 1).
  double overlap = 0.70;

  /// max(1, round(size * (1 - overlap)))
  Index stride() const;
  void validate() const;
};

struct WindowGrid {
  std::vector<Index> origins_x;
  std::vector<Index> origins_y;
  Index width = 0;
  Index height = 0;
  Index size = 0;

  std::size_t count() const noexcept { return origins_x.size() * origins_y.size(); }
};

/// Window origins along one axis: 0, stride, 2*stride, ... plus a final window clamped
/// to end at `dimension`. Throws DimensionError when dimension < size.
std::vector<Index> window_origins(Index dimension, const WindowSpec& spec);

WindowGrid grid_windows(Index width, Index height, const WindowSpec& spec);

struct SplitSpec {
  /// Fraction of rows, counted from the top, assigned to training.
  double train_fraction = 0.70;
};

/// Rows [0, train_rows) train; the rest test.
struct SplitRows {
  Index train_rows = 0;
  Index test_rows = 0;
};

/// Throws RangeError for rasters shorter than two rows or splits leaving either side empty.
SplitRows split_rows(Index height, const SplitSpec& spec);

template <typename R>
std::pair<R, R> split_train_test(const R& raster, const SplitSpec& spec) {
  const SplitRows rows = split_rows(raster.height(), spec);
  return {raster.crop({0, 0, raster.width(), rows.train_rows}),
          raster.crop({0, rows.train_rows, raster.width(), rows.test_rows})};
}

enum class TileRole { Train, Test };

std::string_view role_name(TileRole role) noexcept;
TileRole parse_role(std::string_view name);

struct TileRecord {
  Index x = 0;
  Index y = 0;
  Index size = 0;
  TileRole role = TileRole::Train;
  GeoRaster image;
  std::optional<LabelRaster> label;
};

/// One record per grid origin pair, ordered row-major (y outer, x inner). When labels are
/// given, image tiles are blackened wherever the label is Unrecognized.
std::vector<TileRecord> extract_tiles(const GeoRaster& image, const std::optional<LabelRaster>& labels,
                                      const WindowGrid& grid, TileRole role);

/// Label-only extraction, for building ground-truth tiles without imagery.
std::vector<std::pair<PixelRect, LabelRaster>> extract_label_tiles(const LabelRaster& labels,
                                                                   const WindowGrid& grid);

struct PlacedTile {
  Index x = 0;
  Index y = 0;
  LabelRaster labels;
};

enum class MergePolicy {
  /// Most frequent class among covering tiles; ties go to the lowest class index.
  MajorityVote,
  /// First tile in input order wins.
  FirstWins,
};

/// Reassembles tiles into a width x height raster. Throws RangeError for tiles that
/// leave the bounds and CoverageError (with a witness pixel) for uncovered pixels.
LabelRaster stitch(const std::vector<PlacedTile>& tiles, Index width, Index height,
                   MergePolicy policy = MergePolicy::MajorityVote,
                   const ColorMap& palette = ColorMap::standard());

}  // namespace urbanmap
