#include "urbanmap/raster.hpp"

#include <algorithm>
#include <numeric>

namespace urbanmap {

GeoTransform transform_for(const PixelBox& box) {
  GeoTransform t;
  t.origin_px = Eigen::Vector2d(static_cast<double>(box.x0), static_cast<double>(box.y0));
  t.zoom = box.zoom;
  const Eigen::Vector2d center(0.5 * static_cast<double>(box.x0 + box.x1),
                               0.5 * static_cast<double>(box.y0 + box.y1));
  t.scale_m_per_px = ground_resolution(global_pixel_to_latlon(center, box.zoom).lat, box.zoom);
  return t;
}

LabelRaster::LabelRaster(Index width, Index height, ColorMap palette, GeoTransform transform)
    : palette_(palette), transform_(transform) {
  if (width <= 0 || height <= 0) throw DimensionError("label raster dimensions must be positive");
  classes_ = Storage::Zero(height, width);
}

LabelRaster::LabelRaster(Storage classes, ColorMap palette, GeoTransform transform)
    : classes_(std::move(classes)), palette_(palette), transform_(transform) {
  if (classes_.rows() <= 0 || classes_.cols() <= 0) {
    throw DimensionError("label raster dimensions must be positive");
  }
  if ((classes_ >= kNumLabels).any()) throw RangeError("label raster holds a class index above 4");
}

LabelRaster LabelRaster::crop(const PixelRect& r) const {
  if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0 || r.x + r.width > width() ||
      r.y + r.height > height()) {
    throw RangeError("region outside label raster bounds");
  }
  return LabelRaster(Storage(classes_.block(r.y, r.x, r.height, r.width)), palette_,
                     transform_.shifted(r.x, r.y));
}

void LabelRaster::fill(const PixelRect& r, ClassLabel label) {
  const Index x0 = std::max<Index>(0, r.x), y0 = std::max<Index>(0, r.y);
  const Index x1 = std::min(width(), r.x + r.width), y1 = std::min(height(), r.y + r.height);
  if (x1 <= x0 || y1 <= y0) return;
  classes_.block(y0, x0, y1 - y0, x1 - x0).setConstant(static_cast<std::uint8_t>(label));
}

std::uint64_t ClassHistogram::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ClassHistogram& ClassHistogram::operator+=(const ClassHistogram& o) noexcept {
  for (int i = 0; i < kNumLabels; ++i) counts[i] += o.counts[i];
  return *this;
}

WeightingScheme parse_weighting(std::string_view name) {
  if (name == "inverse_freq") return WeightingScheme::InverseFrequency;
  if (name == "median_freq") return WeightingScheme::MedianFrequency;
  if (name == "none") return WeightingScheme::None;
  throw ConfigError("unknown weighting scheme '" + std::string(name) + "'");
}

std::string_view weighting_name(WeightingScheme scheme) noexcept {
  switch (scheme) {
    case WeightingScheme::InverseFrequency: return "inverse_freq";
    case WeightingScheme::MedianFrequency: return "median_freq";
    case WeightingScheme::None: return "none";
  }
  return "none";
}

LabelRaster encode_labels(const GeoRaster& rgb, const ColorMap& map, int tolerance) {
  if (rgb.bands() != 3) throw DimensionError("encode_labels needs a 3-band raster");
  if (tolerance < 0) throw ConfigError("color tolerance must be non-negative");
  if (map.min_separation() <= 2 * tolerance) {
    throw ConfigError("palette colors lie within 2 * tolerance (" + std::to_string(2 * tolerance) +
                      ") of each other; matches would be ambiguous");
  }
  LabelRaster::Storage classes(rgb.height(), rgb.width());
  for (Index y = 0; y < rgb.height(); ++y) {
    for (Index x = 0; x < rgb.width(); ++x) {
      const Rgb px{rgb(x, y, 0), rgb(x, y, 1), rgb(x, y, 2)};
      classes(y, x) = static_cast<std::uint8_t>(map.match(px, tolerance).value_or(ClassLabel::Unrecognized));
    }
  }
  return LabelRaster(std::move(classes), map, rgb.transform());
}

GeoRaster decode_labels(const LabelRaster& labels) {
  GeoRaster out(labels.width(), labels.height(), 3, labels.transform());
  for (Index y = 0; y < labels.height(); ++y) {
    for (Index x = 0; x < labels.width(); ++x) {
      const Rgb c = labels.palette().color(labels.at(x, y));
      out(x, y, 0) = c.r;
      out(x, y, 1) = c.g;
      out(x, y, 2) = c.b;
    }
  }
  return out;
}

GeoRaster apply_unrecognized_mask(const GeoRaster& image, const LabelRaster& labels) {
  if (image.width() != labels.width() || image.height() != labels.height()) {
    throw DimensionError("image and label raster dimensions differ");
  }
  GeoRaster out = image;
  for (Index y = 0; y < image.height(); ++y) {
    for (Index x = 0; x < image.width(); ++x) {
      if (labels.at(x, y) != ClassLabel::Unrecognized) continue;
      for (int b = 0; b < image.bands(); ++b) out(x, y, b) = 0;
    }
  }
  return out;
}

ClassHistogram class_histogram(const LabelRaster& labels, const std::optional<PixelRect>& region) {
  const PixelRect r = region.value_or(PixelRect{0, 0, labels.width(), labels.height()});
  if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0 || r.x + r.width > labels.width() ||
      r.y + r.height > labels.height()) {
    throw RangeError("histogram region outside label raster bounds");
  }
  ClassHistogram h;
  const auto block = labels.classes().block(r.y, r.x, r.height, r.width);
  for (Index y = 0; y < block.rows(); ++y) {
    for (Index x = 0; x < block.cols(); ++x) ++h.counts[block(y, x)];
  }
  return h;
}

ClassWeights class_weights(const ClassHistogram& histogram, WeightingScheme scheme) {
  const std::uint64_t n_real = histogram.real_total();
  if (n_real == 0) throw RangeError("class weights need at least one real-class pixel");

  ClassWeights out;
  out.scheme = scheme;
  if (scheme == WeightingScheme::None) return out;

  Eigen::Array4d counts;
  for (int c = 0; c < kNumRealClasses; ++c) counts(c) = static_cast<double>(histogram.counts[c + 1]);

  double numerator = static_cast<double>(n_real) / kNumRealClasses;
  if (scheme == WeightingScheme::MedianFrequency) {
    std::array<double, kNumRealClasses> freq{};
    for (int c = 0; c < kNumRealClasses; ++c) freq[c] = counts(c) / static_cast<double>(n_real);
    std::sort(freq.begin(), freq.end());
    numerator = 0.5 * (freq[1] + freq[2]) * static_cast<double>(n_real);
  }

  Eigen::Array4d raw = Eigen::Array4d::Zero();
  double max_finite = 0.0;
  for (int c = 0; c < kNumRealClasses; ++c) {
    if (counts(c) > 0) {
      raw(c) = numerator / counts(c);
      max_finite = std::max(max_finite, raw(c));
    }
  }
  // Median can be zero when most classes are absent; fall back to the inverse-frequency numerator.
  if (max_finite <= 0.0) return class_weights(histogram, WeightingScheme::InverseFrequency);
  raw = (counts > 0).select(raw, max_finite);
  out.weights = raw / raw.mean();
  return out;
}

}  // namespace urbanmap
