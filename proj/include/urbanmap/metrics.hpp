#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "urbanmap/raster.hpp"

namespace urbanmap {

__extension__ using WideInt = __int128;

/// Exact ratio of two counts.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Fraction& a, const Fraction& b) noexcept {
    return static_cast<WideInt>(a.num) * b.den == static_cast<WideInt>(b.num) * a.den;
  }
};

/// Pixel counts indexed [ground truth][prediction] over all labels. Rows of the ignore
/// class stay zero; those pixels are tallied in ignored() instead.
class ConfusionMatrix {
public:
  using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

  explicit ConfusionMatrix(int num_labels = kNumLabels, int ignore_index = 0);

  int num_labels() const noexcept { return static_cast<int>(counts_.rows()); }
  int ignore_index() const noexcept { return ignore_; }
  const Counts& counts() const noexcept { return counts_; }
  std::int64_t ignored() const noexcept { return ignored_; }

  void add(int truth, int predicted, std::int64_t n = 1);

  /// Pixels that entered the matrix (excludes ignored ones).
  std::int64_t total() const { return counts_.sum(); }
  std::int64_t correct() const { return counts_.trace(); }

  std::int64_t true_positives(int c) const { return counts_(c, c); }
  std::int64_t false_positives(int c) const { return counts_.col(c).sum() - counts_(c, c); }
  std::int64_t false_negatives(int c) const { return counts_.row(c).sum() - counts_(c, c); }
  std::int64_t true_negatives(int c) const {
    return total() - true_positives(c) - false_positives(c) - false_negatives(c);
  }

  /// Every class index except the ignore class.
  std::vector<int> scored_classes() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) { return a += b; }
  bool operator==(const ConfusionMatrix& o) const {
    return ignore_ == o.ignore_ && ignored_ == o.ignored_ && counts_ == o.counts_;
  }

private:
  Counts counts_;
  int ignore_;
  std::int64_t ignored_ = 0;
};

/// Throws DimensionError for rasters of different size.
ConfusionMatrix confusion(const LabelRaster& truth, const LabelRaster& predicted,
                          ClassLabel ignore = ClassLabel::Unrecognized);

/// trace / sum. Throws UndefinedMetricError on an empty matrix.
Fraction accuracy(const ConfusionMatrix& m);
/// tp / (tp + fp + fn); nullopt when the class is absent from both truth and prediction.
std::optional<Fraction> iou(const ConfusionMatrix& m, int c);
std::optional<Fraction> precision(const ConfusionMatrix& m, int c);
std::optional<Fraction> recall(const ConfusionMatrix& m, int c);
/// One-vs-rest (tp + tn) / total for class c.
std::optional<Fraction> binary_accuracy(const ConfusionMatrix& m, int c);
/// Mean of the defined per-class IoU values. Throws UndefinedMetricError when none is defined.
double miou(const ConfusionMatrix& m);

struct ClassMetrics {
  int index = 0;
  std::int64_t support = 0;
  std::optional<double> iou;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> binary_accuracy;
};

struct MetricsReport {
  ConfusionMatrix matrix;
  double overall_accuracy = 0.0;
  double miou = 0.0;
  /// Mean of the defined per-class recalls.
  std::optional<double> mean_recall;
  std::vector<ClassMetrics> per_class;
};

MetricsReport make_report(const ConfusionMatrix& m);

/// 0.905 -> "90.50%"
std::string format_percent(double fraction);
std::string format_percent(const std::optional<double>& fraction);

std::vector<std::string> summary_lines(const MetricsReport& report);
nlohmann::json report_to_json(const MetricsReport& report);

}  // namespace urbanmap
