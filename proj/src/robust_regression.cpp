#include "derids/robust_regression.hpp"

#include "derids/errors.hpp"
#include "derids/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace derids {

namespace {

void require_positive_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive and finite");
}

// -1: r <= -lambda, 0: |r| < lambda, +1: r >= lambda.
int zone(double r, double lambda) {
  if (r <= -lambda) return -1;
  if (r >= lambda) return 1;
  return 0;
}

// Newton step -A^{-1} grad for the current partition, or nullopt if the
// quadratic block is unusable. Using the gradient from the residuals, rather
// than solving for the new point directly, avoids cancellation in p.x terms.
std::optional<Vector> newton_step(const Dataset& ds, const Vector& r, double lambda) {
  const auto& x = ds.features();
  const auto d = ds.dim();
  Matrix a = Matrix::Zero(d, d);
  Vector g = Vector::Zero(d);
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    g.noalias() += std::clamp(r[i], -lambda, lambda) * x.row(i).transpose();
    if (zone(r[i], lambda) == 0) {
      a.noalias() += x.row(i).transpose() * x.row(i);
      ++inside;
    }
  }
  if (inside < d || condition_number(a) > 1e12) return std::nullopt;
  // No ridge here: even a tiny one biases the step when lambda is small.
  return Vector(-Eigen::LDLT<Matrix>(a).solve(g));
}

// Exact minimizer over t >= 0 of sum huber(r_i + t s_i). The derivative is
// piecewise linear and nondecreasing in t, so walk its breakpoints in order.
double exact_line_search(const Vector& r, const Vector& s, double lambda) {
  struct Event {
    double t;
    double curvature;  // change in the second derivative when crossing t
  };
  std::vector<Event> events;
  double g = 0.0;
  double c = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double si = s[i];
    if (si == 0.0) continue;
    const double s2 = si * si;
    g += std::clamp(r[i], -lambda, lambda) * si;
    // Crossing times of the two kinks at -lambda and +lambda.
    const double t_lo = (-lambda - r[i]) / si;
    const double t_hi = (lambda - r[i]) / si;
    const double enter = std::min(t_lo, t_hi);
    const double leave = std::max(t_lo, t_hi);
    if (enter < 0.0 && leave > 0.0) {
      c += s2;
      events.push_back({leave, -s2});
    } else if (enter >= 0.0) {
      events.push_back({enter, s2});
      events.push_back({leave, -s2});
    }
  }
  if (g >= 0.0) return 0.0;
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  double t = 0.0;
  for (const auto& e : events) {
    if (c > 0.0 && g + c * (e.t - t) >= 0.0) return t - g / c;
    g += c * (e.t - t);
    t = e.t;
    c += e.curvature;
  }
  return c > 0.0 ? t - g / c : t;
}

}  // namespace

double huber_loss(double z, double lambda) {
  require_positive_lambda(lambda);
  const double az = std::abs(z);
  return az <= lambda ? 0.5 * z * z : lambda * (az - 0.5 * lambda);
}

double huber_derivative(double z, double lambda) {
  require_positive_lambda(lambda);
  return std::clamp(z, -lambda, lambda);
}

Vector recover_delta(const Vector& alpha, const Dataset& ds, double lambda) {
  require_positive_lambda(lambda);
  const Vector r = ds.residuals(alpha);
  Vector delta(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double shrunk = std::max(0.0, std::abs(r[i]) - lambda);
    // sign(p - alpha.x) = -sign(r)
    delta[i] = r[i] > 0.0 ? -shrunk : (r[i] < 0.0 ? shrunk : 0.0);
  }
  return delta;
}

double bad_data_objective(const Vector& alpha, const Vector& delta, const Dataset& ds, double lambda) {
  require_positive_lambda(lambda);
  if (delta.size() != ds.size()) throw SchemaError("delta length does not match dataset");
  const Vector fit = ds.residuals(alpha) + delta;
  return 0.5 * fit.squaredNorm() + lambda * delta.lpNorm<1>();
}

double huber_objective(const Vector& alpha, const Dataset& ds, double lambda) {
  require_positive_lambda(lambda);
  const Vector r = ds.residuals(alpha);
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) total += huber_loss(r[i], lambda);
  return total;
}

double huber_stationarity(const Vector& alpha, const Dataset& ds, double lambda) {
  require_positive_lambda(lambda);
  const Vector r = ds.residuals(alpha);
  const auto& x = ds.features();
  Vector g = Vector::Zero(ds.dim());
  double scale = 0.0;
  double xmax = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double psi = std::clamp(r[i], -lambda, lambda);
    g.noalias() += psi * x.row(i).transpose();
    const double xn = x.row(i).cwiseAbs().maxCoeff();
    scale += std::abs(psi) * xn;
    xmax = std::max(xmax, xn);
  }
  return g.cwiseAbs().maxCoeff() / std::max(scale, lambda * xmax);
}

HuberSolveReport fit_robust(const Dataset& ds, double lambda, const HuberSolveOptions& options) {
  require_positive_lambda(lambda);
  if (ds.size() <= ds.dim())
    throw DomainError("robust fit needs more points (" + std::to_string(ds.size()) +
                      ") than features (" + std::to_string(ds.dim()) + ")");
  if (options.initial_alpha && options.initial_alpha->size() != ds.dim())
    throw SchemaError("initial alpha has the wrong dimension");

  const auto& x = ds.features();
  const auto& p = ds.commands();

  Vector alpha;
  if (options.initial_alpha) {
    alpha = *options.initial_alpha;
  } else {
    const Eigen::ColPivHouseholderQR<Matrix> qr(x);
    alpha = qr.rank() == x.cols() ? Vector(qr.solve(p)) : solve_jittered(x.transpose() * x, x.transpose() * p);
  }

  HuberSolveReport report;
  double objective = huber_objective(alpha, ds, lambda);
  double stationarity = huber_stationarity(alpha, ds, lambda);
  int it = 0;
  while (stationarity > options.tol && it < options.max_iter) {
    ++it;
    const Vector r = x * alpha - p;

    // Newton direction on the current partition when its quadratic block is
    // usable, otherwise the reweighted least-squares direction.
    Vector dir;
    if (auto step = newton_step(ds, r, lambda)) {
      // The full step is exact when the partition does not change.
      const Vector target = alpha + *step;
      const double f_full = huber_objective(target, ds, lambda);
      const double s_full = huber_stationarity(target, ds, lambda);
      if (s_full <= options.tol && f_full <= objective + 1e-13 * objective) {
        alpha = target;
        stationarity = s_full;
        break;
      }
      dir = *step;
    } else {
      const Vector w = r.unaryExpr([lambda](double ri) {
        const double a = std::abs(ri);
        return a <= lambda ? 1.0 : lambda / a;
      });
      const Matrix a = x.transpose() * w.asDiagonal() * x;
      const Vector b = x.transpose() * w.cwiseProduct(p);
      dir = solve_jittered(a, b) - alpha;
    }
    const double t = exact_line_search(r, x * dir, lambda);
    const Vector next = alpha + t * dir;
    const double f = huber_objective(next, ds, lambda);
    const double s_next = huber_stationarity(next, ds, lambda);
    // No progress in either measure means we are at the roundoff floor.
    if (!(f < objective || s_next < stationarity)) break;
    alpha = next;
    objective = f;
    stationarity = s_next;
  }

  report.alpha = alpha;
  report.delta = recover_delta(alpha, ds, lambda);
  report.iterations = it;
  report.final_objective = bad_data_objective(alpha, report.delta, ds, lambda);
  report.stationarity = stationarity;
  report.converged = stationarity <= options.tol;
  const Vector r = x * alpha - p;
  report.boundary_points =
      ((r.array().abs() - lambda).abs() <= 1e-9 * lambda).count();
  return report;
}

Vector fit_least_squares(const Dataset& ds) {
  const auto& x = ds.features();
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < x.cols())
    throw SingularSystemError("design matrix is rank deficient: rank " + std::to_string(qr.rank()) +
                              " < " + std::to_string(x.cols()) + " features");
  return qr.solve(ds.commands());
}

}  // namespace derids
