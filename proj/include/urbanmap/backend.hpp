#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "urbanmap/manifest.hpp"

namespace urbanmap {

/// Predicts one class everywhere.
struct ConstantBackend {
  ClassLabel label = ClassLabel::HighlyInformal;
};

/// Averages each block x block cell of the image and assigns the nearest palette color's class.
struct ColorHeuristicBackend {
  Index block = 8;
};

/// Returns the ground-truth label tile unchanged. Scoring oracle only.
struct IdentityBackend {};

/// Runs `command <manifest> <out_dir>` through /bin/sh. The process writes one class-index
/// PNG per test tile, named like the tile's image file.
struct ExternalBackend {
  std::string command;
  std::filesystem::path working_dir;
  std::chrono::milliseconds timeout{std::chrono::minutes(30)};
};

using InferenceBackend = std::variant<ConstantBackend, ColorHeuristicBackend, IdentityBackend, ExternalBackend>;

/// "constant:<0-4>", "heuristic[:<block>]", "identity" or "external:<command>".
InferenceBackend parse_backend(std::string_view spec);

class BackendError : public Error {
public:
  BackendError(const std::string& what, std::optional<int> exit_code = std::nullopt, std::string diagnostics = {})
      : Error(what), exit_code_(exit_code), diagnostics_(std::move(diagnostics)) {}

  /// Exit status of an external process that terminated normally.
  const std::optional<int>& exit_code() const noexcept { return exit_code_; }
  /// Tail of the process's combined stdout/stderr.
  const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
  std::optional<int> exit_code_;
  std::string diagnostics_;
};

/// Prediction for a single tile from one of the in-process backends.
LabelRaster predict_tile(const ConstantBackend& backend, const GeoRaster& image, const ColorMap& palette);
LabelRaster predict_tile(const ColorHeuristicBackend& backend, const GeoRaster& image, const ColorMap& palette);

/// Name a prediction tile gets in the output directory.
std::string prediction_name(const TileEntry& tile);

/// Runs the backend over every test tile of the manifest and returns the written prediction
/// paths in manifest order. Outputs are checked for shape and class range.
std::vector<std::filesystem::path> run_inference(const InferenceBackend& backend,
                                                 const std::filesystem::path& manifest_path,
                                                 const std::filesystem::path& out_dir, unsigned workers = 0);

}  // namespace urbanmap
