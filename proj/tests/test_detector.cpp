#include "doctest.h"

#include "derids/datagen.hpp"
#include "derids/detector.hpp"
#include "derids/errors.hpp"
#include "oracles.hpp"

#include <cmath>
#include <sstream>

using namespace derids;

namespace {

Vector v4(double a, double b, double c, double d) {
  Vector v(4);
  v << a, b, c, d;
  return v;
}

UnlabeledPoint point_with_residual(double r) {
  // alpha = 0 below, so residual = -p.
  return UnlabeledPoint::make(v4(1, 2, 3, 4), -r);
}

// Labeled D2 with alpha = 0 residuals r_i.
Dataset residual_set(const std::vector<double>& r, const std::vector<Label>& y) {
  const auto n = static_cast<Eigen::Index>(r.size());
  Matrix x(n, 2);
  Vector p(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) << 1.0, 0.0;
    p[i] = -r[static_cast<std::size_t>(i)];
  }
  return Dataset::labeled(x, p, y);
}

}  // namespace

TEST_CASE("predict examples") {
  CHECK(predict(v4(1, 0, 0, 0), v4(1, 7, -3, 2)) == 1.0);
  CHECK(predict(Vector::Zero(4), v4(1, 7, -3, 2)) == 0.0);
  CHECK(predict(v4(0, 1, 0, 0), v4(1, 3.2, 0.9, 5)) == 3.2);
  CHECK_THROWS_AS(predict(Vector::Zero(3), v4(1, 0, 0, 0)), SchemaError);
}

TEST_CASE("predict is linear in x") {
  Rng rng(51);
  for (int k = 0; k < 1000; ++k) {
    const Vector a = Vector::NullaryExpr(4, [&] { return rng.uniform(-3, 3); });
    const Vector x = Vector::NullaryExpr(4, [&] { return rng.uniform(-10, 10); });
    const Vector z = Vector::NullaryExpr(4, [&] { return rng.uniform(-10, 10); });
    const double s = rng.uniform(-2, 2), t = rng.uniform(-2, 2);
    const double lhs = predict(a, s * x + t * z);
    const double rhs = s * predict(a, x) + t * predict(a, z);
    REQUIRE(std::abs(lhs - rhs) <= 1e-12 * (1 + std::abs(lhs)));
  }
}

TEST_CASE("detect examples and the boundary rule") {
  const Vector a = Vector::Zero(4);
  CHECK(detect(a, 0.5, point_with_residual(0.6)) == Label::anomaly);
  CHECK(detect(a, 0.5, point_with_residual(-0.6)) == Label::anomaly);
  CHECK(detect(a, 0.5, point_with_residual(0.5)) == Label::normal);
  CHECK(detect(a, 0.5, point_with_residual(0.0)) == Label::normal);
  CHECK_THROWS_AS(detect(a, 0.0, point_with_residual(1.0)), DomainError);
}

TEST_CASE("metrics from counts") {
  const auto m = metrics_from_counts({8, 85, 2, 5});
  CHECK(m.accuracy == doctest::Approx(0.93));
  CHECK(m.precision == doctest::Approx(0.8));
  CHECK(m.recall == doctest::Approx(8.0 / 13.0));
  CHECK(m.precision_defined);
  CHECK(m.recall_defined);

  const auto none = metrics_from_counts({0, 10, 0, 0});
  CHECK(none.accuracy == 1.0);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK_FALSE(none.precision_defined);
  CHECK_FALSE(none.recall_defined);
}

TEST_CASE("evaluate: all-normal data and a perfect detector") {
  const auto clean = residual_set({0.1, -0.2, 0.3}, {Label::normal, Label::normal, Label::normal});
  const auto e = evaluate(Vector::Zero(2), 1.0, clean);
  CHECK(e.counts == ConfusionCounts{0, 3, 0, 0});
  CHECK(e.metrics.accuracy == 1.0);
  CHECK_FALSE(e.metrics.precision_defined);

  const auto mixed = residual_set({0.1, 5.0, -4.0, 0.2}, {Label::normal, Label::anomaly, Label::anomaly, Label::normal});
  const auto p = evaluate(Vector::Zero(2), 1.0, mixed);
  CHECK(p.metrics.accuracy == 1.0);
  CHECK(p.metrics.precision == 1.0);
  CHECK(p.metrics.recall == 1.0);
}

TEST_CASE("detect is monotone in tau; counts partition the data (1000-case fuzz)") {
  Rng rng(52);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto ds = oracle::random_labels(rng, oracle::random_instance(rng, 5 + static_cast<int>(rng.index(60))));
    const Vector a = Vector::NullaryExpr(4, [&] { return rng.uniform(-2, 2); });
    const double t1 = std::exp(rng.uniform(-3, 3));
    const double t2 = t1 * (1.0 + rng.uniform01() * 3.0);
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
      const auto pt = ds.point(i);
      if (detect(a, t1, pt) == Label::normal) REQUIRE(detect(a, t2, pt) == Label::normal);
    }
    const auto e1 = evaluate(a, t1, ds);
    const auto e2 = evaluate(a, t2, ds);
    REQUIRE(e1.counts.total() == static_cast<std::size_t>(ds.size()));
    REQUIRE(e2.counts.total() == static_cast<std::size_t>(ds.size()));
    // Recall nonincreasing, specificity nondecreasing.
    REQUIRE(e2.counts.tp <= e1.counts.tp);
    REQUIRE(e2.counts.tn >= e1.counts.tn);
  }
}

TEST_CASE("baseline tuning: separable classes reach accuracy 1") {
  const auto ds = residual_set({0.1, -0.3, 0.2, 2.0, -2.5, 3.0},
                               {Label::normal, Label::normal, Label::normal, Label::anomaly, Label::anomaly,
                                Label::anomaly});
  const double tau = tune_threshold_baseline(Vector::Zero(2), ds).tau();
  CHECK(tau >= 0.3);
  CHECK(tau < 2.0);
  CHECK(evaluate(Vector::Zero(2), tau, ds).metrics.accuracy == 1.0);
}

TEST_CASE("baseline tuning: single anomaly with |r| = 2") {
  const auto ds = residual_set({2.0}, {Label::anomaly});
  const double tau = tune_threshold_baseline(Vector::Zero(2), ds).tau();
  CHECK(tau < 2.0);
  CHECK(evaluate(Vector::Zero(2), tau, ds).metrics.accuracy == 1.0);
}

TEST_CASE("baseline tuning: chosen tau is at least as accurate as every grid point") {
  Rng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ds = oracle::random_labels(rng, oracle::random_instance(rng, 80));
    const Vector a = Vector::NullaryExpr(4, [&] { return rng.uniform(-2, 2); });
    const double tau = tune_threshold_baseline(a, ds).tau();
    const double best = evaluate(a, tau, ds).metrics.accuracy;
    std::vector<double> mag(static_cast<std::size_t>(ds.size()));
    const Vector r = ds.residuals(a).cwiseAbs();
    for (Eigen::Index i = 0; i < r.size(); ++i) mag[static_cast<std::size_t>(i)] = r[i];
    std::sort(mag.begin(), mag.end());
    for (int g = 0; g < kThresholdGridSize; ++g) {
      // Independent quantile, linear interpolation between order statistics.
      const double pos = static_cast<double>(g) / (kThresholdGridSize - 1) * static_cast<double>(mag.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, mag.size() - 1);
      const double q = mag[lo] + (pos - static_cast<double>(lo)) * (mag[hi] - mag[lo]);
      if (q > 0) REQUIRE(best >= evaluate(a, q, ds).metrics.accuracy);
    }
  }
}

TEST_CASE("detection CSV rows agree with detect") {
  const auto ds = residual_set({0.1, 5.0, -0.5}, {Label::normal, Label::anomaly, Label::anomaly});
  const auto csv = detection_csv(Vector::Zero(2), 0.5, ds);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "idx,residual,verdict,truth");
  std::vector<std::string> verdicts;
  while (std::getline(in, line)) verdicts.push_back(line.substr(line.find(',', line.find(',') + 1) + 1));
  CHECK(verdicts == std::vector<std::string>{"-1,-1", "1,1", "-1,1"});
}
