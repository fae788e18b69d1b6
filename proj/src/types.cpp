#include "derids/types.hpp"

#include "derids/errors.hpp"

#include <cmath>
#include <utility>

namespace derids {

namespace {

void check_features(const Vector& x) {
  if (x.size() < 2) throw SchemaError("feature vector needs dimension >= 2");
  if (x[0] != 1.0) throw SchemaError("feature vector must start with the constant 1 intercept");
  if (!x.allFinite()) throw SchemaError("feature vector has non-finite entries");
}

}  // namespace

Label label_from_int(long long value) {
  if (value == -1) return Label::normal;
  if (value == 1) return Label::anomaly;
  throw SchemaError("label must be -1 or +1, got " + std::to_string(value));
}

UnlabeledPoint UnlabeledPoint::make(Vector x, double p) {
  check_features(x);
  if (!std::isfinite(p)) throw SchemaError("command p is not finite");
  return UnlabeledPoint{std::move(x), p};
}

LabeledPoint LabeledPoint::make(Vector x, double p, long long y) {
  return make(std::move(x), p, label_from_int(y));
}

LabeledPoint LabeledPoint::make(Vector x, double p, Label y) {
  auto base = UnlabeledPoint::make(std::move(x), p);
  // Enum values outside {-1, +1} can be forged with a cast.
  label_from_int(to_int(y));
  return LabeledPoint{std::move(base.x), base.p, y};
}

std::string_view to_string(DatasetKind kind) noexcept {
  return kind == DatasetKind::labeled ? "labeled" : "unlabeled";
}

Dataset::Dataset(DatasetKind kind, Matrix x, Vector p, std::vector<Label> y)
    : kind_(kind), x_(std::move(x)), p_(std::move(p)), y_(std::move(y)) {
  if (p_.size() == 0) throw SchemaError("empty dataset");
  if (x_.rows() != p_.size()) throw SchemaError("feature rows and command count differ");
  if (x_.cols() < 2) throw SchemaError("feature dimension must be >= 2");
  if (!x_.allFinite() || !p_.allFinite()) throw SchemaError("dataset has non-finite values");
  if (!(x_.col(0).array() == 1.0).all()) throw SchemaError("intercept column must be exactly 1");
  if (kind_ == DatasetKind::unlabeled && !y_.empty())
    throw SchemaError("unlabeled dataset cannot carry labels");
  if (kind_ == DatasetKind::labeled) {
    if (static_cast<Eigen::Index>(y_.size()) != p_.size())
      throw SchemaError("label count differs from point count");
    for (Label y : y_) label_from_int(to_int(y));
  }
}

Dataset Dataset::unlabeled(Matrix x, Vector p) {
  return Dataset(DatasetKind::unlabeled, std::move(x), std::move(p), {});
}

Dataset Dataset::labeled(Matrix x, Vector p, std::vector<Label> y) {
  return Dataset(DatasetKind::labeled, std::move(x), std::move(p), std::move(y));
}

namespace {

template <typename Point>
std::pair<Matrix, Vector> stack(std::span<const Point> points) {
  if (points.empty()) throw SchemaError("empty dataset");
  const auto d = points.front().x.size();
  Matrix x(static_cast<Eigen::Index>(points.size()), d);
  Vector p(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].x.size() != d) throw SchemaError("points have different dimensions");
    x.row(static_cast<Eigen::Index>(i)) = points[i].x.transpose();
    p[static_cast<Eigen::Index>(i)] = points[i].p;
  }
  return {std::move(x), std::move(p)};
}

}  // namespace

Dataset Dataset::from_points(std::span<const UnlabeledPoint> points) {
  auto [x, p] = stack(points);
  return unlabeled(std::move(x), std::move(p));
}

Dataset Dataset::from_points(std::span<const LabeledPoint> points) {
  auto [x, p] = stack(points);
  std::vector<Label> y;
  y.reserve(points.size());
  for (const auto& pt : points) y.push_back(pt.y);
  return labeled(std::move(x), std::move(p), std::move(y));
}

UnlabeledPoint Dataset::point(Eigen::Index i) const {
  return UnlabeledPoint{x_.row(i).transpose(), p_[i]};
}

LabeledPoint Dataset::labeled_point(Eigen::Index i) const {
  if (!is_labeled()) throw SchemaError("dataset is unlabeled");
  return LabeledPoint{x_.row(i).transpose(), p_[i], y_[static_cast<std::size_t>(i)]};
}

Dataset Dataset::with_commands(Vector p) const {
  return Dataset(kind_, x_, std::move(p), y_);
}

Dataset Dataset::with_labels(std::vector<Label> y) const {
  return Dataset(DatasetKind::labeled, x_, p_, std::move(y));
}

Dataset Dataset::without_labels() const { return Dataset(DatasetKind::unlabeled, x_, p_, {}); }

Vector Dataset::residuals(const Vector& alpha) const {
  if (alpha.size() != dim()) throw SchemaError("coefficient dimension does not match dataset");
  return x_ * alpha - p_;
}

DetectorConfig::DetectorConfig(double tau) : tau_(tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("detection threshold tau must be positive");
}

std::string_view to_string(AttackKind kind) noexcept {
  return kind == AttackKind::poisoning ? "poisoning" : "evasion";
}

std::string_view to_string(SignMode mode) noexcept {
  return mode == SignMode::symmetric ? "symmetric" : "one_sided";
}

SignMode sign_mode_from_string(std::string_view name) {
  if (name == "symmetric") return SignMode::symmetric;
  if (name == "one_sided") return SignMode::one_sided;
  throw DomainError("unknown sign mode '" + std::string(name) + "'");
}

void AttackSpec::validate() const {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw DomainError("attack fraction must lie in [0, 1]");
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude))
    throw DomainError("attack magnitude must be nonnegative");
  if (!(noise_rel >= 0.0) || !std::isfinite(noise_rel))
    throw DomainError("attack noise scale must be nonnegative");
}

}  // namespace derids
