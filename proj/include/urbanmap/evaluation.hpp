#pragma once

#include <filesystem>

#include "urbanmap/manifest.hpp"
#include "urbanmap/metrics.hpp"

namespace urbanmap {

/// Loads every test-tile prediction from `predictions_dir` and stitches them to the test
/// region's size. A missing tile raises CoverageError with the tile origin as witness.
LabelRaster stitch_predictions(const DatasetManifest& manifest, const std::filesystem::path& predictions_dir,
                               MergePolicy policy = MergePolicy::MajorityVote);

struct EvaluationResult {
  MetricsReport report;
  LabelRaster stitched;
  /// Sum of per-tile confusion matrices, for cross-checking the stitched score.
  ConfusionMatrix tile_sum;
};

/// Scores stitched predictions against the test-region ground truth with Unrecognized ignored.
EvaluationResult evaluate_run(const DatasetManifest& manifest, const std::filesystem::path& dataset_dir,
                              const std::filesystem::path& predictions_dir);

/// Writes the JSON report and the color-decoded stitched prediction (PNG + sidecar).
void write_evaluation(const EvaluationResult& result, const std::filesystem::path& report_path,
                      const std::filesystem::path& stitched_path);

}  // namespace urbanmap
