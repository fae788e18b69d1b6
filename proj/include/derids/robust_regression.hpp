#pragma once

#include "derids/types.hpp"

#include <optional>

namespace derids {

/// f(z; lambda) = z^2/2 for |z| <= lambda, lambda(|z| - lambda/2) otherwise.
/// Throws DomainError for lambda <= 0.
double huber_loss(double z, double lambda);

/// Derivative of huber_loss in z: z clipped to [-lambda, lambda].
double huber_derivative(double z, double lambda);

/// Soft-threshold recovery of the bad-data vector for a given alpha:
/// delta_i = sign(p_i - alpha.x_i) * max(0, |alpha.x_i - p_i| - lambda).
Vector recover_delta(const Vector& alpha, const Dataset& ds, double lambda);

/// 1/2 sum (alpha.x_i - p_i + delta_i)^2 + lambda ||delta||_1.
double bad_data_objective(const Vector& alpha, const Vector& delta, const Dataset& ds, double lambda);

/// sum_i huber_loss(alpha.x_i - p_i; lambda).
double huber_objective(const Vector& alpha, const Dataset& ds, double lambda);

/// Relative stationarity residual of the Huber objective at alpha:
/// ||sum psi_i x_i||_inf / max(sum ||psi_i x_i||_inf, lambda max_i ||x_i||_inf).
double huber_stationarity(const Vector& alpha, const Dataset& ds, double lambda);

struct HuberSolveOptions {
  double tol = 1e-10;
  int max_iter = 500;
  /// Warm start; least squares when absent.
  std::optional<Vector> initial_alpha;
};

struct HuberSolveReport {
  Vector alpha;
  Vector delta;
  int iterations = 0;
  double final_objective = 0.0;  // bad_data_objective(alpha, delta)
  double stationarity = 0.0;     // huber_stationarity(alpha)
  bool converged = false;
  /// Points whose |residual| lies within 1e-9 (relative to lambda) of lambda.
  Eigen::Index boundary_points = 0;
};

/// Minimizes the l1-penalized bad-data objective through its Huber form.
///
/// Each iteration takes a Newton direction on the current residual partition
/// (Hessian = Gram matrix of the quadratic-zone points), or an iteratively
/// reweighted least-squares direction when that block is rank deficient or
/// ill-conditioned, followed by an exact line search along the piecewise
/// quadratic ray. Once the partition is identified the full Newton step is
/// exact. `converged` means the relative stationarity residual is at most
/// `tol`. Requires n > d and lambda > 0.
HuberSolveReport fit_robust(const Dataset& ds, double lambda, const HuberSolveOptions& options = {});

/// Ordinary least squares via column-pivoted QR.
/// Throws SingularSystemError when the design is rank deficient.
Vector fit_least_squares(const Dataset& ds);

}  // namespace derids
