#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vesselsynth/image.hpp"

namespace vesselsynth::eval {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Counts over pixels where fov == 1. All masks must share one shape.
ConfusionCounts confusion(const Mask& predicted, const Mask& truth, const Mask& fov);

// A zero denominator yields nullopt ("undefined"), never 0.
std::optional<double> sensitivity(const ConfusionCounts& c);  ///< TP / (TP + FN)
std::optional<double> specificity(const ConfusionCounts& c);  ///< TN / (TN + FP)
std::optional<double> accuracy(const ConfusionCounts& c);     ///< (TP + TN) / total

/// 1 where prob >= threshold.
Mask binarize(const GrayImage& prob, double threshold);

struct RocPoint {
  double threshold = 0.0;  ///< pixels with prob >= threshold are called positive
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Points ordered by decreasing threshold; first (0, 0), last (1, 1).
struct RocCurve {
  std::vector<RocPoint> points;
};

struct ThresholdStrategy {
  enum class Kind { all_distinct, uniform_grid };
  Kind kind = Kind::all_distinct;
  int grid_size = 256;

  static ThresholdStrategy all_distinct() { return {Kind::all_distinct, 0}; }
  static ThresholdStrategy uniform_grid(int k) { return {Kind::uniform_grid, k}; }
};

/// Throws MetricError on an empty FOV or when the FOV holds only one class.
RocCurve roc(const GrayImage& prob, const Mask& truth, const Mask& fov,
             ThresholdStrategy strategy = ThresholdStrategy::all_distinct());

/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

/// Mann-Whitney estimate: P(score of a random vessel pixel > score of a
/// random background pixel), ties counted 1/2.
double auc_rank(const GrayImage& prob, const Mask& truth, const Mask& fov);

struct ImageMetrics {
  std::string id;
  ConfusionCounts counts;
  std::optional<double> sn;
  std::optional<double> sp;
  std::optional<double> acc;
  std::optional<double> auc;
};

ImageMetrics evaluate_image(std::string id, const GrayImage& prob, const Mask& truth, const Mask& fov,
                            double threshold = 0.5, ThresholdStrategy strategy = ThresholdStrategy::all_distinct());

/// `image_id,Sn,Sp,Acc,AUC` rows in input order, then a `mean` row over the
/// defined values. Undefined metrics are written as `undefined`.
void write_report_csv(std::ostream& out, std::span<const ImageMetrics> rows);
void write_roc_csv(std::ostream& out, const RocCurve& curve);

/// Mean over the defined entries, nullopt if none.
std::optional<double> mean_of(std::span<const std::optional<double>> values);

}  // namespace vesselsynth::eval
