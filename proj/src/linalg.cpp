#include "derids/linalg.hpp"

#include "derids/errors.hpp"

#include <cmath>
#include <limits>

namespace derids {

Vector solve_jittered(const Matrix& a, const Vector& b, double eps) {
  const double trace = a.trace();
  if (!(trace > 0.0) || !std::isfinite(trace)) throw SingularSystemError("system matrix has zero trace");
  Matrix shifted = a;
  shifted.diagonal().array() += eps * trace / static_cast<double>(a.rows());
  Eigen::LDLT<Matrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw SingularSystemError("LDLT factorization failed");
  Vector x = ldlt.solve(b);
  if (!x.allFinite()) throw SingularSystemError("solve produced non-finite values");
  return x;
}

double condition_number(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.cwiseAbs().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace derids
