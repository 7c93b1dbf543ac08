#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "urbanmap/metrics.hpp"
#include "urbanmap/raster.hpp"

namespace urbanmap::testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag = "urbanmap") {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
  std::filesystem::path path_;
};

inline LabelRaster random_labels(std::mt19937_64& rng, Index width, Index height, int min_class = 0,
                                 int max_class = kNumLabels - 1) {
  std::uniform_int_distribution<int> dist(min_class, max_class);
  LabelRaster::Storage s(height, width);
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) s(y, x) = static_cast<std::uint8_t>(dist(rng));
  }
  return LabelRaster(std::move(s));
}

inline LabelRaster labels_from_rows(std::initializer_list<std::initializer_list<int>> rows) {
  const Index h = static_cast<Index>(rows.size());
  const Index w = static_cast<Index>(rows.begin()->size());
  LabelRaster::Storage s(h, w);
  Index y = 0;
  for (const auto& row : rows) {
    Index x = 0;
    for (const int v : row) s(y, x++) = static_cast<std::uint8_t>(v);
    ++y;
  }
  return LabelRaster(std::move(s));
}

/// Per-class pixel tallies gathered by scanning both rasters directly, without a matrix.
struct PixelScan {
  std::int64_t counted = 0;
  std::int64_t correct = 0;
  std::int64_t ignored = 0;
  std::int64_t in_truth[kNumLabels] = {};
  std::int64_t in_pred[kNumLabels] = {};
  std::int64_t both[kNumLabels] = {};
  std::int64_t either[kNumLabels] = {};
};

inline PixelScan scan_pixels(const LabelRaster& truth, const LabelRaster& pred, int ignore = 0) {
  PixelScan s;
  for (Index y = 0; y < truth.height(); ++y) {
    for (Index x = 0; x < truth.width(); ++x) {
      const int g = truth.classes()(y, x);
      const int p = pred.classes()(y, x);
      if (g == ignore) {
        ++s.ignored;
        continue;
      }
      ++s.counted;
      if (g == p) ++s.correct;
      for (int c = 0; c < kNumLabels; ++c) {
        const bool in_g = g == c, in_p = p == c;
        s.in_truth[c] += in_g;
        s.in_pred[c] += in_p;
        s.both[c] += in_g && in_p;
        s.either[c] += in_g || in_p;
      }
    }
  }
  return s;
}

struct Scene {
  GeoRaster image;
  LabelRaster labels;
};

/// Square cells of random classes, with imagery painted in each class's palette color plus
/// uniform noise of at most `noise` per channel.
inline Scene synthetic_scene(std::mt19937_64& rng, Index width, Index height, Index cell = 16, int noise = 3,
                             GeoTransform transform = {}) {
  const ColorMap palette = ColorMap::standard();
  std::uniform_int_distribution<int> cls(0, kNumLabels - 1);
  std::uniform_int_distribution<int> jitter(-noise, noise);
  const Index cols = (width + cell - 1) / cell, rows = (height + cell - 1) / cell;
  std::vector<int> cells(static_cast<std::size_t>(rows * cols));
  for (int& c : cells) c = cls(rng);
  LabelRaster::Storage s(height, width);
  GeoRaster image(width, height, 3, transform);
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      const int c = cells[static_cast<std::size_t>((y / cell) * cols + x / cell)];
      s(y, x) = static_cast<std::uint8_t>(c);
      const Rgb col = palette.color(static_cast<ClassLabel>(c));
      const std::uint8_t rgb[3] = {col.r, col.g, col.b};
      for (int b = 0; b < 3; ++b) image(x, y, b) = static_cast<std::uint8_t>(std::clamp(rgb[b] + jitter(rng), 0, 255));
    }
  }
  return {std::move(image), LabelRaster(std::move(s), palette, transform)};
}

}  // namespace urbanmap::testing
