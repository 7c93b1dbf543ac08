#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "urbanmap/raster.hpp"
#include "urbanmap/windowing.hpp"

namespace urbanmap {

inline constexpr int kManifestSchemaVersion = 1;

/// Training settings handed to the external trainer.
struct HyperparameterRecord {
  std::string optimizer = "SGD";
  double learning_rate = 0.007;
  int epochs = 26;
  int num_classes = kNumLabels;
  int crop = 513;
  std::string backbone = "resnet";
  int output_stride = 16;

  /// Throws ConfigError for non-positive values or an unknown backbone.
  void validate() const;
  bool operator==(const HyperparameterRecord&) const = default;
};

struct TileEntry {
  TileRole role = TileRole::Train;
  /// Window origin inside the role's region.
  Index x = 0;
  Index y = 0;
  Index size = 0;
  /// Paths relative to the dataset directory.
  std::string image;
  std::string label;

  bool operator==(const TileEntry&) const = default;
};

struct RegionInfo {
  Index row_offset = 0;
  Index width = 0;
  Index height = 0;
  /// Full-region ground truth, relative to the dataset directory.
  std::string label;
  ClassHistogram histogram;
};

/// What `grid` leaves in a dataset directory (layout.json): the raster description, split,
/// window specs and tiles. The manifest adds class weights and hyperparameters.
struct DatasetLayout {
  Index width = 0;
  Index height = 0;
  GeoTransform transform;
  SplitSpec split;
  SplitRows rows;
  WindowSpec train_window{513, 0.70};
  WindowSpec test_window{513, 0.0};
  ColorMap palette = ColorMap::standard();
  RegionInfo train;
  RegionInfo test;
  std::vector<TileEntry> tiles;

  const RegionInfo& region(TileRole role) const { return role == TileRole::Train ? train : test; }
  std::vector<TileEntry> tiles_for(TileRole role) const;
};

struct DatasetManifest {
  int schema_version = kManifestSchemaVersion;
  DatasetLayout layout;
  ClassWeights weights;
  HyperparameterRecord hyperparameters;
};

struct DatasetOptions {
  SplitSpec split;
  WindowSpec train_window{513, 0.70};
  WindowSpec test_window{513, 0.0};
};

inline constexpr const char* kLayoutFile = "layout.json";
inline constexpr const char* kManifestFile = "manifest.json";

/// Splits image and labels, grids both regions, writes masked image tiles, class-index label
/// tiles, full-region ground truth and layout.json into `out_dir`.
DatasetLayout write_dataset(const GeoRaster& image, const LabelRaster& labels, const DatasetOptions& options,
                            const std::filesystem::path& out_dir);

nlohmann::json layout_to_json(const DatasetLayout& layout);
DatasetLayout layout_from_json(const nlohmann::json& doc);

nlohmann::json hyperparameters_to_json(const HyperparameterRecord& h);
HyperparameterRecord hyperparameters_from_json(const nlohmann::json& doc);

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
/// Throws ConfigError naming the first structural problem.
DatasetManifest manifest_from_json(const nlohmann::json& doc);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct ExportOptions {
  WeightingScheme weighting = WeightingScheme::InverseFrequency;
  HyperparameterRecord hyperparameters;
};

/// Reads layout.json from the dataset directory, checks every referenced file exists
/// (IoError naming the path otherwise), computes class weights from the training region and
/// writes manifest.json. Output is byte-identical for identical inputs.
DatasetManifest export_manifest(const std::filesystem::path& dataset_dir, const ExportOptions& options = {});

/// Number of window origins along one axis for a dimension, computed from the stride alone.
std::size_t expected_window_count(Index dimension, const WindowSpec& spec);

}  // namespace urbanmap
