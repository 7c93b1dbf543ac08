#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "urbanmap/errors.hpp"
#include "urbanmap/tilemath.hpp"
#include "urbanmap/typology.hpp"

namespace urbanmap {

using Index = Eigen::Index;

/// Maps raster pixel (0, 0) to a global Web-Mercator pixel position.
struct GeoTransform {
  Eigen::Vector2d origin_px = Eigen::Vector2d::Zero();
  int zoom = 0;
  /// Meters per pixel at the raster's center latitude.
  double scale_m_per_px = 1.0;

  GeoTransform shifted(Index dx, Index dy) const {
    GeoTransform t = *this;
    t.origin_px += Eigen::Vector2d(static_cast<double>(dx), static_cast<double>(dy));
    return t;
  }

  GeoPoint pixel_to_latlon(double x, double y) const {
    return global_pixel_to_latlon<double>(origin_px + Eigen::Vector2d(x, y), zoom);
  }

  bool operator==(const GeoTransform& o) const {
    return origin_px == o.origin_px && zoom == o.zoom && scale_m_per_px == o.scale_m_per_px;
  }
};

/// Transform for a raster whose top-left global pixel is `box`'s corner, with the scale
/// evaluated at the box's center latitude.
GeoTransform transform_for(const PixelBox& box);

struct PixelRect {
  Index x = 0;
  Index y = 0;
  Index width = 0;
  Index height = 0;
};

/// Band-interleaved pixel grid. Storage is height rows by width * bands columns, row-major.
template <typename Scalar>
class Raster {
public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Raster() = default;

  Raster(Index width, Index height, int bands, GeoTransform transform = {}, Scalar fill = Scalar(0))
      : width_(width), height_(height), bands_(bands), transform_(transform) {
    if (width <= 0 || height <= 0) throw DimensionError("raster dimensions must be positive");
    if (bands != 1 && bands != 3) throw DimensionError("raster must have 1 or 3 bands");
    data_ = Storage::Constant(height, width * bands, fill);
  }

  Raster(Storage data, int bands, GeoTransform transform = {})
      : width_(bands > 0 ? data.cols() / bands : 0), height_(data.rows()), bands_(bands),
        transform_(transform), data_(std::move(data)) {
    if (bands != 1 && bands != 3) throw DimensionError("raster must have 1 or 3 bands");
    if (width_ <= 0 || height_ <= 0 || data_.cols() != width_ * bands) {
      throw DimensionError("raster storage does not match width * bands");
    }
  }

  Index width() const noexcept { return width_; }
  Index height() const noexcept { return height_; }
  int bands() const noexcept { return bands_; }
  bool empty() const noexcept { return data_.size() == 0; }

  const GeoTransform& transform() const noexcept { return transform_; }
  void set_transform(const GeoTransform& t) { transform_ = t; }

  const std::optional<Scalar>& nodata() const noexcept { return nodata_; }
  void set_nodata(std::optional<Scalar> v) { nodata_ = v; }

  Scalar operator()(Index x, Index y, int band = 0) const { return data_(y, x * bands_ + band); }
  Scalar& operator()(Index x, Index y, int band = 0) { return data_(y, x * bands_ + band); }

  const Storage& storage() const noexcept { return data_; }
  Storage& storage() noexcept { return data_; }

  std::span<const Scalar> data() const noexcept {
    return {data_.data(), static_cast<std::size_t>(data_.size())};
  }

  Raster crop(const PixelRect& r) const {
    check_rect(r);
    Raster out;
    out.width_ = r.width;
    out.height_ = r.height;
    out.bands_ = bands_;
    out.nodata_ = nodata_;
    out.transform_ = transform_.shifted(r.x, r.y);
    out.data_ = data_.block(r.y, r.x * bands_, r.height, r.width * bands_);
    return out;
  }

  /// Copies `src` so that its pixel (0, 0) lands at (x, y); parts outside are dropped.
  void paste(const Raster& src, Index x, Index y) {
    if (src.bands_ != bands_) throw DimensionError("band count mismatch in paste");
    const Index x0 = std::max<Index>(0, x), y0 = std::max<Index>(0, y);
    const Index x1 = std::min(width_, x + src.width_), y1 = std::min(height_, y + src.height_);
    if (x1 <= x0 || y1 <= y0) return;
    data_.block(y0, x0 * bands_, y1 - y0, (x1 - x0) * bands_) =
        src.data_.block(y0 - y, (x0 - x) * bands_, y1 - y0, (x1 - x0) * bands_);
  }

  void check_rect(const PixelRect& r) const {
    if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0 || r.x + r.width > width_ ||
        r.y + r.height > height_) {
      throw RangeError("region outside raster bounds");
    }
  }

  bool operator==(const Raster& o) const {
    return width_ == o.width_ && height_ == o.height_ && bands_ == o.bands_ &&
           (data_ == o.data_).all();
  }

private:
  Index width_ = 0;
  Index height_ = 0;
  int bands_ = 1;
  GeoTransform transform_{};
  std::optional<Scalar> nodata_{};
  Storage data_{};
};

using GeoRaster = Raster<std::uint8_t>;

/// Per-pixel class indices (0..4) with the palette used to render them.
class LabelRaster {
public:
  using Storage = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  LabelRaster() = default;
  /// All pixels Unrecognized.
  LabelRaster(Index width, Index height, ColorMap palette = ColorMap::standard(),
              GeoTransform transform = {});
  /// Throws RangeError if any index is >= kNumLabels.
  LabelRaster(Storage classes, ColorMap palette = ColorMap::standard(), GeoTransform transform = {});

  Index width() const noexcept { return classes_.cols(); }
  Index height() const noexcept { return classes_.rows(); }

  ClassLabel at(Index x, Index y) const { return static_cast<ClassLabel>(classes_(y, x)); }
  void set(Index x, Index y, ClassLabel label) { classes_(y, x) = static_cast<std::uint8_t>(label); }

  const Storage& classes() const noexcept { return classes_; }
  const ColorMap& palette() const noexcept { return palette_; }
  void set_palette(const ColorMap& p) { palette_ = p; }
  const GeoTransform& transform() const noexcept { return transform_; }
  void set_transform(const GeoTransform& t) { transform_ = t; }

  LabelRaster crop(const PixelRect& r) const;
  void fill(const PixelRect& r, ClassLabel label);

  /// Pixel equality; palette and transform are not compared.
  bool same_pixels(const LabelRaster& o) const {
    return width() == o.width() && height() == o.height() && (classes_ == o.classes_).all();
  }

private:
  Storage classes_{};
  ColorMap palette_ = ColorMap::standard();
  GeoTransform transform_{};
};

struct ClassHistogram {
  std::array<std::uint64_t, kNumLabels> counts{};

  std::uint64_t total() const noexcept;
  std::uint64_t real_total() const noexcept { return total() - counts[0]; }
  std::uint64_t operator[](ClassLabel l) const noexcept { return counts[index_of(l)]; }
  ClassHistogram& operator+=(const ClassHistogram& o) noexcept;
  bool operator==(const ClassHistogram&) const = default;
};

enum class WeightingScheme { InverseFrequency, MedianFrequency, None };

WeightingScheme parse_weighting(std::string_view name);
std::string_view weighting_name(WeightingScheme scheme) noexcept;

/// One positive weight per real class (HighlyInformal..HighlyFormal), mean 1.
struct ClassWeights {
  Eigen::Array4d weights = Eigen::Array4d::Ones();
  WeightingScheme scheme = WeightingScheme::InverseFrequency;

  double operator[](ClassLabel l) const { return weights(index_of(l) - 1); }
};

inline constexpr int kDefaultColorTolerance = 8;

/// Maps each RGB pixel to the palette color within Chebyshev distance `tolerance`;
/// anything else becomes Unrecognized. Throws ConfigError when palette colors lie
/// within 2 * tolerance of each other.
LabelRaster encode_labels(const GeoRaster& rgb, const ColorMap& map,
                          int tolerance = kDefaultColorTolerance);

GeoRaster decode_labels(const LabelRaster& labels);

/// Blackens every image pixel whose label is Unrecognized.
GeoRaster apply_unrecognized_mask(const GeoRaster& image, const LabelRaster& labels);

ClassHistogram class_histogram(const LabelRaster& labels,
                               const std::optional<PixelRect>& region = std::nullopt);

/// Throws RangeError when the histogram holds no real-class pixels.
ClassWeights class_weights(const ClassHistogram& histogram,
                           WeightingScheme scheme = WeightingScheme::InverseFrequency);

}  // namespace urbanmap
