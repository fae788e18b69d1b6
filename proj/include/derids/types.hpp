#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace derids {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Detection label. Stored as -1/+1 everywhere (files included), never 0/1.
enum class Label : int { normal = -1, anomaly = +1 };

inline int to_int(Label y) noexcept { return static_cast<int>(y); }
inline double to_double(Label y) noexcept { return static_cast<double>(static_cast<int>(y)); }

/// Throws SchemaError unless value is exactly -1 or +1.
Label label_from_int(long long value);

/// One command sample. x = [1, p_L, q_L, p_Dmax] for the real-power channel.
struct UnlabeledPoint {
  Vector x;
  double p = 0.0;

  /// Validates x[0] == 1, dim >= 2 and finiteness.
  static UnlabeledPoint make(Vector x, double p);
};

struct LabeledPoint {
  Vector x;
  double p = 0.0;
  Label y = Label::normal;

  static LabeledPoint make(Vector x, double p, long long y);
  static LabeledPoint make(Vector x, double p, Label y);
};

enum class DatasetKind { unlabeled, labeled };

std::string_view to_string(DatasetKind kind) noexcept;

/// Immutable collection of points sharing one feature dimension.
///
/// Features are held as an n x d design matrix whose first column is the
/// constant intercept; commands as a length-n vector. Labeled datasets also
/// carry one label per row.
class Dataset {
 public:
  static Dataset unlabeled(Matrix x, Vector p);
  static Dataset labeled(Matrix x, Vector p, std::vector<Label> y);
  static Dataset from_points(std::span<const UnlabeledPoint> points);
  static Dataset from_points(std::span<const LabeledPoint> points);

  DatasetKind kind() const noexcept { return kind_; }
  bool is_labeled() const noexcept { return kind_ == DatasetKind::labeled; }
  Eigen::Index size() const noexcept { return p_.size(); }
  Eigen::Index dim() const noexcept { return x_.cols(); }

  const Matrix& features() const noexcept { return x_; }
  const Vector& commands() const noexcept { return p_; }
  const std::vector<Label>& labels() const noexcept { return y_; }

  UnlabeledPoint point(Eigen::Index i) const;
  LabeledPoint labeled_point(Eigen::Index i) const;

  /// Copy with the command vector replaced (same features/labels).
  Dataset with_commands(Vector p) const;
  /// Copy re-labeled as a labeled dataset.
  Dataset with_labels(std::vector<Label> y) const;
  /// Labels dropped.
  Dataset without_labels() const;

  /// Residuals alpha . x_i - p_i.
  Vector residuals(const Vector& alpha) const;

 private:
  Dataset(DatasetKind kind, Matrix x, Vector p, std::vector<Label> y);

  DatasetKind kind_;
  Matrix x_;
  Vector p_;
  std::vector<Label> y_;
};

/// Coefficients plus the per-point hypothetical bad-data vector.
struct RegressionModel {
  Vector alpha;
  Vector delta;  // empty for models that do not carry one (baseline)
  std::optional<double> lambda;
};

class DetectorConfig {
 public:
  explicit DetectorConfig(double tau);
  double tau() const noexcept { return tau_; }

 private:
  double tau_;
};

enum class AttackKind { poisoning, evasion };

/// How the perturbation direction s_i is drawn.
enum class SignMode {
  symmetric,  // s_i uniform on {-1, +1}
  one_sided,  // s_i = +1
};

std::string_view to_string(AttackKind kind) noexcept;
std::string_view to_string(SignMode mode) noexcept;
SignMode sign_mode_from_string(std::string_view name);

struct AttackSpec {
  AttackKind kind = AttackKind::poisoning;
  double fraction = 0.0;   // share of points attacked
  double magnitude = 0.0;  // relative perturbation, 0.4 = 40%
  double noise_rel = 0.01; // std of added noise relative to |p|
  SignMode sign = SignMode::symmetric;
  std::uint64_t seed = 0;

  /// Throws DomainError on out-of-range fields.
  void validate() const;
};

}  // namespace derids
