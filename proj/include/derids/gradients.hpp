#pragma once

#include "derids/types.hpp"

#include <string_view>
#include <vector>

namespace derids {

/// Split of D1 by inner-solution residual r_i = alpha.x_i - p_i:
/// inside (|r| < lambda), below (r <= -lambda), above (r >= lambda).
struct ResidualPartition {
  std::vector<Eigen::Index> inside;
  std::vector<Eigen::Index> below;
  std::vector<Eigen::Index> above;
  Matrix gram_inside;  // sum over `inside` of x x^T
  Vector sum_below;    // sum over `below` of x
  Vector sum_above;    // sum over `above` of x
};

ResidualPartition partition_residuals(const Vector& alpha, const Dataset& ds, double lambda);

/// Scaling of the implicit gradient.
///
/// `unscaled` is A^-1 (sum_below x - sum_above x), the derivative of the
/// stationarity condition. `lambda_scaled` multiplies that by lambda, the form
/// printed in the original statement of the result. Finite differences agree
/// with `unscaled`.
enum class ImplicitGradientScaling { unscaled, lambda_scaled };

inline constexpr ImplicitGradientScaling kDefaultScaling = ImplicitGradientScaling::unscaled;

std::string_view to_string(ImplicitGradientScaling scaling) noexcept;
ImplicitGradientScaling scaling_from_string(std::string_view name);

/// d alpha / d lambda of the inner solution. Throws SingularSystemError when
/// the quadratic-zone Gram matrix is not invertible (condition >= 1e12 after jitter).
Vector implicit_gradient(const ResidualPartition& part, double lambda,
                         ImplicitGradientScaling scaling = kDefaultScaling);

/// Overflow-safe log(1 + exp(z)).
double softplus(double z);
/// Overflow-safe 1 / (1 + exp(-z)).
double sigmoid(double z);

/// L(tau) = sum_i log(1 + exp(-y_i (|alpha.x_i - p_i| - tau))).
double outer_loss(const Vector& alpha, double tau, const Dataset& ds2);

/// dL/dtau = sum_i y_i sigma(-y_i (|r_i| - tau)).
double grad_tau(const Vector& alpha, double tau, const Dataset& ds2);

/// dL/dlambda via the chain rule through d alpha / d lambda, with sgn(0) = +1.
double grad_lambda(const Vector& alpha, double tau, const Dataset& ds2, const Vector& dalpha_dlambda);

}  // namespace derids
