#pragma once

#include "derids/types.hpp"

namespace derids {

/// Relative ridge added to small symmetric systems: eps * trace(A) / d.
inline constexpr double kRidgeJitter = 1e-12;

/// Solves the symmetric positive (semi)definite system (A + eps*tr(A)/d I) x = b.
/// Throws SingularSystemError if A is zero or the factorization fails.
Vector solve_jittered(const Matrix& a, const Vector& b, double eps = kRidgeJitter);

/// 2-norm condition number of a symmetric matrix (infinity when singular).
double condition_number(const Matrix& sym);

}  // namespace derids
