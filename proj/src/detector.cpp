#include "derids/detector.hpp"

#include "derids/csv_io.hpp"
#include "derids/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace derids {

double predict(const Vector& alpha, const Vector& x) {
  if (alpha.size() != x.size()) throw SchemaError("coefficient and feature dimensions differ");
  return alpha.dot(x);
}

Label detect_residual(double residual, double tau) {
  return std::abs(residual) > tau ? Label::anomaly : Label::normal;
}

Label detect(const Vector& alpha, double tau, const UnlabeledPoint& point) {
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  return detect_residual(predict(alpha, point.x) - point.p, tau);
}

DetectionMetrics metrics_from_counts(const ConfusionCounts& c) {
  DetectionMetrics m;
  const auto total = c.total();
  m.accuracy = total ? static_cast<double>(c.tp + c.tn) / static_cast<double>(total) : 0.0;
  m.precision_defined = c.tp + c.fp > 0;
  m.recall_defined = c.tp + c.fn > 0;
  m.precision = m.precision_defined ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = m.recall_defined ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  return m;
}

namespace {

ConfusionCounts count(const Vector& abs_r, const std::vector<Label>& y, double tau) {
  ConfusionCounts c;
  for (Eigen::Index i = 0; i < abs_r.size(); ++i) {
    const bool flagged = abs_r[i] > tau;
    const bool anomaly = y[static_cast<std::size_t>(i)] == Label::anomaly;
    if (flagged && anomaly) ++c.tp;
    else if (flagged) ++c.fp;
    else if (anomaly) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// Linear-interpolation quantile of sorted data at probability q.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

Evaluation evaluate(const Vector& alpha, double tau, const Dataset& ds2) {
  if (!ds2.is_labeled()) throw SchemaError("evaluation needs a labeled dataset");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  const Vector abs_r = ds2.residuals(alpha).cwiseAbs();
  Evaluation e;
  e.counts = count(abs_r, ds2.labels(), tau);
  e.metrics = metrics_from_counts(e.counts);
  return e;
}

DetectorConfig tune_threshold_baseline(const Vector& alpha, const Dataset& ds2) {
  if (!ds2.is_labeled()) throw SchemaError("threshold tuning needs a labeled dataset");
  const Vector abs_r = ds2.residuals(alpha).cwiseAbs();
  std::vector<double> sorted(abs_r.begin(), abs_r.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> candidates;
  candidates.reserve(kThresholdGridSize + 1);
  candidates.push_back(0.5 * sorted.front());
  for (int k = 0; k < kThresholdGridSize; ++k)
    candidates.push_back(quantile(sorted, static_cast<double>(k) / (kThresholdGridSize - 1)));
  std::erase_if(candidates, [](double t) { return !(t > 0.0); });
  if (candidates.empty()) return DetectorConfig(std::numeric_limits<double>::min());
  std::sort(candidates.begin(), candidates.end());

  double best_tau = candidates.front();
  std::size_t best_correct = 0;
  bool first = true;
  for (double t : candidates) {
    const auto c = count(abs_r, ds2.labels(), t);
    const auto correct = c.tp + c.tn;
    if (first || correct > best_correct) {
      best_correct = correct;
      best_tau = t;
      first = false;
    }
  }
  return DetectorConfig(best_tau);
}

std::string detection_csv(const Vector& alpha, double tau, const Dataset& ds) {
  const Vector r = ds.residuals(alpha);
  std::ostringstream out;
  out << "idx,residual,verdict,truth\n";
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    out << i << ',' << format_double(r[i]) << ',' << to_int(detect_residual(r[i], tau)) << ',';
    if (ds.is_labeled()) out << to_int(ds.labels()[static_cast<std::size_t>(i)]);
    out << '\n';
  }
  return out.str();
}

}  // namespace derids
