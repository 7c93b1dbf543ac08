#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "urbanmap/raster.hpp"

// PNG / JPEG codecs and the PNG + "<name>.meta.json" sidecar raster format.

namespace urbanmap {

using Bytes = std::vector<std::uint8_t>;

enum class ImageFormat { Png, Jpeg, Unknown };

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept;

/// Decodes PNG or JPEG bytes. Grayscale stays 1-band; everything else becomes RGB.
/// Throws IoError on malformed or unsupported payloads.
GeoRaster decode_image(std::span<const std::uint8_t> bytes);

/// Lossless 8-bit PNG of a 1- or 3-band raster.
Bytes encode_png(const GeoRaster& raster);

Bytes read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

/// "dir/name.png" -> "dir/name.meta.json"
std::filesystem::path sidecar_path(const std::filesystem::path& image_path);

struct RasterMeta {
  GeoTransform transform;
  std::optional<ColorMap> palette;
};

nlohmann::json meta_to_json(const RasterMeta& meta);
RasterMeta meta_from_json(const nlohmann::json& doc);

void save_raster(const std::filesystem::path& path, const GeoRaster& raster,
                 const std::optional<ColorMap>& palette = std::nullopt);
/// Reads the PNG and, when present, its sidecar transform.
GeoRaster load_raster(const std::filesystem::path& path);

/// Writes class indices as an 8-bit grayscale PNG plus a sidecar carrying the palette.
void save_labels(const std::filesystem::path& path, const LabelRaster& labels);

/// Reads a label raster. A grayscale PNG is taken as class indices; an RGB PNG is
/// color-encoded with the sidecar palette (or `palette` when given) at `tolerance`.
LabelRaster load_labels(const std::filesystem::path& path,
                        const std::optional<ColorMap>& palette = std::nullopt,
                        int tolerance = kDefaultColorTolerance);

}  // namespace urbanmap
