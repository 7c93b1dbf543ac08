#include "urbanmap/evaluation.hpp"

#include <nlohmann/json.hpp>

#include "urbanmap/backend.hpp"
#include "urbanmap/image_io.hpp"

namespace urbanmap {

namespace fs = std::filesystem;

namespace {

std::vector<PlacedTile> load_predictions(const DatasetManifest& manifest, const fs::path& predictions_dir) {
  std::vector<PlacedTile> tiles;
  for (const TileEntry& t : manifest.layout.tiles_for(TileRole::Test)) {
    const fs::path path = predictions_dir / prediction_name(t);
    if (!fs::is_regular_file(path)) {
      throw CoverageError("missing prediction tile '" + path.string() + "'", static_cast<long>(t.x),
                          static_cast<long>(t.y));
    }
    LabelRaster pred = load_labels(path, manifest.layout.palette);
    if (pred.width() != t.size || pred.height() != t.size) {
      throw DimensionError("prediction '" + path.string() + "' is not " + std::to_string(t.size) + "x" +
                           std::to_string(t.size));
    }
    tiles.push_back({t.x, t.y, std::move(pred)});
  }
  return tiles;
}

}  // namespace

LabelRaster stitch_predictions(const DatasetManifest& manifest, const fs::path& predictions_dir,
                               MergePolicy policy) {
  const RegionInfo& region = manifest.layout.test;
  LabelRaster out = stitch(load_predictions(manifest, predictions_dir), region.width, region.height, policy,
                           manifest.layout.palette);
  out.set_transform(manifest.layout.transform.shifted(0, region.row_offset));
  return out;
}

EvaluationResult evaluate_run(const DatasetManifest& manifest, const fs::path& dataset_dir,
                              const fs::path& predictions_dir) {
  const RegionInfo& region = manifest.layout.test;
  const std::vector<PlacedTile> tiles = load_predictions(manifest, predictions_dir);
  LabelRaster stitched = stitch(tiles, region.width, region.height, MergePolicy::MajorityVote,
                                manifest.layout.palette);
  stitched.set_transform(manifest.layout.transform.shifted(0, region.row_offset));

  const LabelRaster truth = load_labels(dataset_dir / region.label, manifest.layout.palette);
  if (truth.width() != region.width || truth.height() != region.height) {
    throw DimensionError("test-region ground truth does not match the manifest");
  }

  ConfusionMatrix tile_sum;
  for (const PlacedTile& t : tiles) {
    tile_sum += confusion(truth.crop({t.x, t.y, t.labels.width(), t.labels.height()}), t.labels);
  }
  return {make_report(confusion(truth, stitched)), std::move(stitched), tile_sum};
}

void write_evaluation(const EvaluationResult& result, const fs::path& report_path, const fs::path& stitched_path) {
  write_text_atomic(report_path, report_to_json(result.report).dump(2) + "\n");
  if (!stitched_path.empty()) {
    save_raster(stitched_path, decode_labels(result.stitched), result.stitched.palette());
  }
}

}  // namespace urbanmap
