#include "derids/gradients.hpp"

#include "derids/errors.hpp"
#include "derids/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace derids {

namespace {

void require_labeled(const Dataset& ds2) {
  if (!ds2.is_labeled()) throw SchemaError("outer objective needs a labeled dataset");
}

}  // namespace

ResidualPartition partition_residuals(const Vector& alpha, const Dataset& ds, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  const Vector r = ds.residuals(alpha);
  const auto& x = ds.features();
  const auto d = ds.dim();
  ResidualPartition part{{}, {}, {}, Matrix::Zero(d, d), Vector::Zero(d), Vector::Zero(d)};
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (r[i] <= -lambda) {
      part.below.push_back(i);
      part.sum_below += x.row(i).transpose();
    } else if (r[i] >= lambda) {
      part.above.push_back(i);
      part.sum_above += x.row(i).transpose();
    } else {
      part.inside.push_back(i);
      part.gram_inside.noalias() += x.row(i).transpose() * x.row(i);
    }
  }
  return part;
}

std::string_view to_string(ImplicitGradientScaling scaling) noexcept {
  return scaling == ImplicitGradientScaling::unscaled ? "unscaled" : "lambda_scaled";
}

ImplicitGradientScaling scaling_from_string(std::string_view name) {
  if (name == "unscaled") return ImplicitGradientScaling::unscaled;
  if (name == "lambda_scaled") return ImplicitGradientScaling::lambda_scaled;
  throw DomainError("unknown implicit-gradient scaling '" + std::string(name) + "'");
}

Vector implicit_gradient(const ResidualPartition& part, double lambda, ImplicitGradientScaling scaling) {
  const Vector rhs = part.sum_below - part.sum_above;
  if (part.below.empty() && part.above.empty()) return Vector::Zero(rhs.size());

  const auto d = part.gram_inside.rows();
  Matrix a = part.gram_inside;
  const double trace = a.trace();
  if (trace > 0.0) a.diagonal().array() += kRidgeJitter * trace / static_cast<double>(d);
  if (!(trace > 0.0) || condition_number(a) >= 1e12)
    throw SingularSystemError("implicit gradient undefined: quadratic-zone Gram matrix is singular (" +
                              std::to_string(part.inside.size()) + " points with |r| < lambda, d = " +
                              std::to_string(d) + ")");
  Vector g = a.ldlt().solve(rhs);
  if (scaling == ImplicitGradientScaling::lambda_scaled) g *= lambda;
  return g;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double outer_loss(const Vector& alpha, double tau, const Dataset& ds2) {
  require_labeled(ds2);
  const Vector r = ds2.residuals(alpha);
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double y = to_double(ds2.labels()[static_cast<std::size_t>(i)]);
    total += softplus(-y * (std::abs(r[i]) - tau));
  }
  return total;
}

double grad_tau(const Vector& alpha, double tau, const Dataset& ds2) {
  require_labeled(ds2);
  const Vector r = ds2.residuals(alpha);
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double y = to_double(ds2.labels()[static_cast<std::size_t>(i)]);
    total += y * sigmoid(-y * (std::abs(r[i]) - tau));
  }
  return total;
}

double grad_lambda(const Vector& alpha, double tau, const Dataset& ds2, const Vector& dalpha_dlambda) {
  require_labeled(ds2);
  if (dalpha_dlambda.size() != ds2.dim()) throw SchemaError("gradient dimension does not match dataset");
  const Vector r = ds2.residuals(alpha);
  const Vector dr = ds2.features() * dalpha_dlambda;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double y = to_double(ds2.labels()[static_cast<std::size_t>(i)]);
    const double sgn = r[i] >= 0.0 ? 1.0 : -1.0;
    total += -y * sgn * sigmoid(-y * (std::abs(r[i]) - tau)) * dr[i];
  }
  return total;
}

}  // namespace derids
