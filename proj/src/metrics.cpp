#include "urbanmap/metrics.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

namespace urbanmap {

ConfusionMatrix::ConfusionMatrix(int num_labels, int ignore_index)
    : counts_(Counts::Zero(num_labels, num_labels)), ignore_(ignore_index) {
  if (num_labels < 2) throw RangeError("confusion matrix needs at least two labels");
}

void ConfusionMatrix::add(int truth, int predicted, std::int64_t n) {
  if (truth < 0 || truth >= num_labels() || predicted < 0 || predicted >= num_labels()) {
    throw RangeError("class index outside the confusion matrix");
  }
  if (truth == ignore_) {
    ignored_ += n;
    return;
  }
  counts_(truth, predicted) += n;
}

std::vector<int> ConfusionMatrix::scored_classes() const {
  std::vector<int> out;
  for (int c = 0; c < num_labels(); ++c) {
    if (c != ignore_) out.push_back(c);
  }
  return out;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  if (o.num_labels() != num_labels() || o.ignore_ != ignore_) {
    throw DimensionError("cannot add confusion matrices of different shape");
  }
  counts_ += o.counts_;
  ignored_ += o.ignored_;
  return *this;
}

ConfusionMatrix confusion(const LabelRaster& truth, const LabelRaster& predicted, ClassLabel ignore) {
  if (truth.width() != predicted.width() || truth.height() != predicted.height()) {
    throw DimensionError("ground truth is " + std::to_string(truth.width()) + "x" +
                         std::to_string(truth.height()) + " but prediction is " +
                         std::to_string(predicted.width()) + "x" + std::to_string(predicted.height()));
  }
  ConfusionMatrix m(kNumLabels, index_of(ignore));
  const auto& g = truth.classes();
  const auto& p = predicted.classes();
  for (Index y = 0; y < g.rows(); ++y) {
    for (Index x = 0; x < g.cols(); ++x) m.add(g(y, x), p(y, x));
  }
  return m;
}

namespace {

std::optional<Fraction> ratio(std::int64_t num, std::int64_t den) {
  if (den <= 0) return std::nullopt;
  return Fraction{num, den};
}

std::optional<double> value_of(const std::optional<Fraction>& f) {
  return f ? std::optional<double>(f->value()) : std::nullopt;
}

}  // namespace

Fraction accuracy(const ConfusionMatrix& m) {
  if (m.total() == 0) throw UndefinedMetricError("accuracy of an empty confusion matrix");
  return {m.correct(), m.total()};
}

std::optional<Fraction> iou(const ConfusionMatrix& m, int c) {
  const std::int64_t tp = m.true_positives(c);
  return ratio(tp, tp + m.false_positives(c) + m.false_negatives(c));
}

std::optional<Fraction> precision(const ConfusionMatrix& m, int c) {
  const std::int64_t tp = m.true_positives(c);
  return ratio(tp, tp + m.false_positives(c));
}

std::optional<Fraction> recall(const ConfusionMatrix& m, int c) {
  const std::int64_t tp = m.true_positives(c);
  return ratio(tp, tp + m.false_negatives(c));
}

std::optional<Fraction> binary_accuracy(const ConfusionMatrix& m, int c) {
  return ratio(m.true_positives(c) + m.true_negatives(c), m.total());
}

double miou(const ConfusionMatrix& m) {
  double sum = 0.0;
  int defined = 0;
  for (const int c : m.scored_classes()) {
    if (const auto v = iou(m, c)) {
      sum += v->value();
      ++defined;
    }
  }
  if (defined == 0) throw UndefinedMetricError("mIoU: no class has a defined IoU");
  return sum / defined;
}

MetricsReport make_report(const ConfusionMatrix& m) {
  MetricsReport r{m, accuracy(m).value(), miou(m), std::nullopt, {}};
  double recall_sum = 0.0;
  int recall_n = 0;
  for (const int c : m.scored_classes()) {
    ClassMetrics cm;
    cm.index = c;
    cm.support = m.counts().row(c).sum();
    cm.iou = value_of(iou(m, c));
    cm.precision = value_of(precision(m, c));
    cm.recall = value_of(recall(m, c));
    cm.binary_accuracy = value_of(binary_accuracy(m, c));
    if (cm.recall) {
      recall_sum += *cm.recall;
      ++recall_n;
    }
    r.per_class.push_back(cm);
  }
  if (recall_n > 0) r.mean_recall = recall_sum / recall_n;
  return r;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
  return buf;
}

std::string format_percent(const std::optional<double>& fraction) {
  return fraction ? format_percent(*fraction) : std::string("n/a");
}

namespace {

std::string class_name(int index, int num_labels) {
  if (num_labels == kNumLabels) return std::string(label_name(static_cast<ClassLabel>(index)));
  return "class " + std::to_string(index);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::vector<std::string> summary_lines(const MetricsReport& report) {
  std::vector<std::string> lines;
  lines.push_back("Overall accuracy: " + format_percent(report.overall_accuracy));
  lines.push_back("Mean IoU: " + format_percent(report.miou));
  lines.push_back("Mean class recall: " + format_percent(report.mean_recall));
  for (const ClassMetrics& c : report.per_class) {
    lines.push_back("Class " + std::to_string(c.index) + " (" +
                    class_name(c.index, report.matrix.num_labels()) + "): IoU " + format_percent(c.iou) +
                    ", precision " + format_percent(c.precision) + ", recall " +
                    format_percent(c.recall) + ", accuracy " + format_percent(c.binary_accuracy));
  }
  return lines;
}

nlohmann::json report_to_json(const MetricsReport& report) {
  const ConfusionMatrix& m = report.matrix;
  nlohmann::json matrix = nlohmann::json::array();
  for (Index g = 0; g < m.counts().rows(); ++g) {
    nlohmann::json row = nlohmann::json::array();
    for (Index p = 0; p < m.counts().cols(); ++p) row.push_back(m.counts()(g, p));
    matrix.push_back(row);
  }
  nlohmann::json per_class = nlohmann::json::array();
  for (const ClassMetrics& c : report.per_class) {
    per_class.push_back({{"index", c.index},
                         {"name", class_name(c.index, m.num_labels())},
                         {"support", c.support},
                         {"iou", optional_json(c.iou)},
                         {"precision", optional_json(c.precision)},
                         {"recall", optional_json(c.recall)},
                         {"binary_accuracy", optional_json(c.binary_accuracy)}});
  }
  return {{"ignore_index", m.ignore_index()},
          {"ignored_pixels", m.ignored()},
          {"counted_pixels", m.total()},
          {"confusion_matrix", matrix},
          {"overall_accuracy", report.overall_accuracy},
          {"miou", report.miou},
          {"mean_recall", optional_json(report.mean_recall)},
          {"per_class", per_class},
          {"summary", summary_lines(report)}};
}

}  // namespace urbanmap
