#pragma once

#include "derids/types.hpp"

#include <cstddef>
#include <string>

namespace derids {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Accuracy/precision/recall. Precision (recall) is 0 when its denominator is
/// empty, with the matching `*_defined` flag cleared.
struct DetectionMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
};

struct Evaluation {
  ConfusionCounts counts;
  DetectionMetrics metrics;
};

/// Expected command alpha . x.
double predict(const Vector& alpha, const Vector& x);

/// Anomaly iff |alpha.x - p| > tau; a residual exactly at tau is normal.
Label detect(const Vector& alpha, double tau, const UnlabeledPoint& point);
Label detect_residual(double residual, double tau);

DetectionMetrics metrics_from_counts(const ConfusionCounts& counts);

Evaluation evaluate(const Vector& alpha, double tau, const Dataset& ds2);

/// Number of thresholds in the baseline's quantile grid.
inline constexpr int kThresholdGridSize = 512;

/// Baseline threshold fine-tuning: picks the accuracy-maximizing tau over
/// the 512 evenly spaced empirical quantiles of |r_i| on ds2, plus one
/// candidate at half the smallest residual. Ties go to the smallest tau.
DetectorConfig tune_threshold_baseline(const Vector& alpha, const Dataset& ds2);

/// Per-point CSV `idx,residual,verdict,truth`; truth is empty for unlabeled data.
std::string detection_csv(const Vector& alpha, double tau, const Dataset& ds);

}  // namespace derids
