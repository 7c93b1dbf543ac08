#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>

#include <nlohmann/json_fwd.hpp>

#include "urbanmap/raster.hpp"
#include "urbanmap/tilefetch.hpp"

namespace urbanmap {

inline constexpr double kCellSizeM = 400.0;

/// Square annotation cells of a fixed ground size laid over a mosaic. Cell (i, j) is row i,
/// column j; edge cells are clipped to the raster.
struct CellGrid {
  Index width = 0;
  Index height = 0;
  GeoTransform transform;
  double cell_size_m = kCellSizeM;
  double cell_px = 0.0;
  Index rows = 0;
  Index cols = 0;

  bool contains(Index i, Index j) const noexcept { return i >= 0 && j >= 0 && i < rows && j < cols; }
  PixelRect cell_rect(Index i, Index j) const;
  nlohmann::json to_json() const;
};

/// Cell size in pixels is cell_size_m over the transform's meters per pixel.
CellGrid make_cell_grid(Index width, Index height, const GeoTransform& transform, double cell_size_m = kCellSizeM);

struct CellAnnotation {
  Index i = 0;
  Index j = 0;
  TypologyCode code;
  std::int64_t timestamp_ms = 0;
  std::string annotator;

  ClassLabel label() const noexcept { return classify_code(code); }
};

nlohmann::json annotation_to_json(const CellAnnotation& a, const ColorMap& palette);

/// Append-only JSON-lines log of cell-label events, replayed into the current state on open.
/// One writer at a time; readers take a snapshot. Per cell, the event with the latest
/// timestamp wins (file order breaks ties). A torn final line is skipped on replay.
class AnnotationJournal {
public:
  explicit AnnotationJournal(std::filesystem::path path);

  const std::filesystem::path& path() const noexcept { return path_; }

  /// Appends the event and applies it. A zero timestamp is replaced with the current time.
  /// Returns the annotation now current for that cell.
  CellAnnotation record(CellAnnotation event);

  std::optional<CellAnnotation> get(Index i, Index j) const;
  std::map<std::pair<Index, Index>, CellAnnotation> snapshot() const;
  std::size_t events() const;

private:
  void apply(const CellAnnotation& a);

  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::ofstream out_;
  std::map<std::pair<Index, Index>, CellAnnotation> state_;
  std::size_t events_ = 0;
};

/// Paints each annotated cell with its collapsed class; everything else stays Unrecognized.
LabelRaster rasterize(const CellGrid& grid, const std::map<std::pair<Index, Index>, CellAnnotation>& cells,
                      const ColorMap& palette = ColorMap::standard());

struct ServerConfig {
  CellGrid grid;
  std::filesystem::path journal;
  ColorMap palette = ColorMap::standard();
  /// Mosaic image served at /imagery.png.
  std::optional<std::filesystem::path> imagery;
  /// Cache consulted by /tiles/{z}/{x}/{y}.png.
  std::optional<TileCache> tile_cache;
  std::string tile_source_id = "default";
  std::string tile_extension = "jpg";
  /// Directory of static assets mounted at /.
  std::optional<std::filesystem::path> static_dir;
};

/// HTTP API over an AnnotationJournal:
///   GET  /api/typology              matrix and palette
///   GET  /api/grid                  cell geometry
///   GET  /api/cell/{i}/{j}          current code, or null
///   PUT  /api/cell/{i}/{j}          {"diversity":1..4,"pattern":"A".."D"}
///   GET  /api/export/labelraster    class-index PNG (?format=rgb for colors)
///   GET  /api/export/meta           raster sidecar JSON
///   GET  /tiles/{z}/{x}/{y}.png     cached imagery tiles
class AnnotationServer {
public:
  explicit AnnotationServer(ServerConfig config);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds to the port (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  /// bind() and serve on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

  AnnotationJournal& journal();
  const ServerConfig& config() const noexcept;

  struct Impl;

private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace urbanmap
