#include "derids/trainer.hpp"

#include "derids/csv_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace derids {

namespace {

double median(std::vector<double> v) {
  const auto n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

std::vector<double> to_std(const Vector& v) { return {v.begin(), v.end()}; }

}  // namespace

void TrainerConfig::validate() const {
  if (K < 0) throw DomainError("iteration budget K must be nonnegative");
  if (!(beta_tau_rel > 0.0) || !(beta_lambda_rel > 0.0)) throw DomainError("step sizes must be positive");
  if ((beta_tau && !(*beta_tau > 0.0)) || (beta_lambda && !(*beta_lambda > 0.0)))
    throw DomainError("step sizes must be positive");
  if (!(lambda_min > 0.0)) throw DomainError("lambda_min must be positive");
  if (tau_init && !(*tau_init > 0.0)) throw DomainError("tau_init must be positive");
  if (lambda_init && !(*lambda_init > 0.0)) throw DomainError("lambda_init must be positive");
}

InitialValues default_init(const Dataset& ds1, const Dataset& ds2) {
  InitialValues init;
  const Vector alpha_ls = fit_least_squares(ds1);
  const auto r = to_std(ds1.residuals(alpha_ls));
  const double med = median(r);
  std::vector<double> dev(r.size());
  std::transform(r.begin(), r.end(), dev.begin(), [med](double v) { return std::abs(v - med); });
  const double mad = median(std::move(dev));
  const double mean_abs_p = ds1.commands().cwiseAbs().mean();
  // Exact-fit data leaves only roundoff in the residuals.
  if (mad <= 1e-12 * std::max(mean_abs_p, 1.0)) {
    init.lambda = 1e-3 * mean_abs_p;
    init.lambda_fallback = true;
  } else {
    init.lambda = 1.345 * mad / 0.6745;
  }
  init.tau = median(to_std(ds2.residuals(alpha_ls).cwiseAbs()));
  return init;
}

std::string_view to_string(StopReason reason) noexcept {
  switch (reason) {
    case StopReason::budget: return "budget";
    case StopReason::loss_plateau: return "loss_plateau";
    case StopReason::singular_partition: return "singular_partition";
  }
  return "unknown";
}

std::string TrainTrace::to_csv() const {
  std::ostringstream out;
  out << "k,lambda,tau,outer_loss,inner_obj,i1,i2,i3,gtau,glambda\n";
  for (const auto& r : records) {
    out << r.k << ',' << format_double(r.lambda) << ',' << format_double(r.tau) << ','
        << format_double(r.outer_loss) << ',' << format_double(r.inner_objective) << ',' << r.i1 << ','
        << r.i2 << ',' << r.i3 << ',' << format_double(r.gtau) << ',' << format_double(r.glambda) << '\n';
  }
  return out.str();
}

TrainResult train(const Dataset& ds1, const Dataset& ds2, const TrainerConfig& cfg) {
  cfg.validate();
  if (ds1.is_labeled()) throw SchemaError("D1 must be unlabeled");
  if (!ds2.is_labeled()) throw SchemaError("D2 must be labeled");
  if (ds1.dim() != ds2.dim()) throw SchemaError("D1 and D2 have different feature dimensions");
  if (ds1.size() <= ds1.dim()) throw DomainError("D1 needs more points than features");

  InitialValues init;
  if (cfg.tau_init && cfg.lambda_init) {
    init.tau = *cfg.tau_init;
    init.lambda = *cfg.lambda_init;
  } else {
    init = default_init(ds1, ds2);
    if (cfg.tau_init) init.tau = *cfg.tau_init;
    if (cfg.lambda_init) init.lambda = *cfg.lambda_init;
  }
  // The LS-residual median can be exactly zero on degenerate data.
  const double tau_floor = 1e-9 * std::max(init.tau, init.lambda);
  init.tau = std::max(init.tau, tau_floor);
  init.lambda = std::max(init.lambda, cfg.lambda_min);

  const double beta_tau = cfg.beta_tau.value_or(cfg.beta_tau_rel * init.tau);
  const double beta_lambda = cfg.beta_lambda.value_or(cfg.beta_lambda_rel * init.lambda);
  const double stop_tol = cfg.stop_tol.value_or(1e-8 * static_cast<double>(ds2.size()));

  HuberSolveOptions inner{cfg.inner_tol, cfg.inner_max_iter, std::nullopt};
  TrainTrace trace;

  auto solve = [&](double lambda, int k) {
    auto rep = fit_robust(ds1, lambda, inner);
    if (!rep.converged)
      throw TrainingError("inner robust regression did not converge at iteration " + std::to_string(k) +
                              " (lambda = " + format_double(lambda) +
                              ", stationarity = " + format_double(rep.stationarity) + ")",
                          trace);
    inner.initial_alpha = rep.alpha;
    return rep;
  };

  if (cfg.K == 0) {
    auto rep = solve(init.lambda, 0);
    const double loss = outer_loss(rep.alpha, init.tau, ds2);
    return TrainResult{RegressionModel{rep.alpha, rep.delta, init.lambda}, DetectorConfig(init.tau),
                       std::move(trace), init, loss};
  }

  double lambda = init.lambda;
  double tau = init.tau;
  std::optional<HuberSolveReport> best_rep;
  double best_loss = 0.0, best_tau = tau, best_lambda = lambda;

  for (int k = 1; k <= cfg.K; ++k) {
    auto rep = solve(lambda, k);
    const double loss = outer_loss(rep.alpha, tau, ds2);
    const auto part = partition_residuals(rep.alpha, ds1, lambda);

    TrainRecord rec;
    rec.k = k;
    rec.lambda = lambda;
    rec.tau = tau;
    rec.outer_loss = loss;
    rec.inner_objective = rep.final_objective;
    rec.i1 = part.inside.size();
    rec.i2 = part.below.size();
    rec.i3 = part.above.size();
    rec.gtau = grad_tau(rep.alpha, tau, ds2);

    if (!best_rep || loss < best_loss) {
      best_loss = loss;
      best_tau = tau;
      best_lambda = lambda;
      best_rep = rep;
      trace.best_index = trace.records.size();
    }

    Vector dalpha;
    try {
      dalpha = implicit_gradient(part, lambda, cfg.scaling);
    } catch (const SingularSystemError&) {
      rec.glambda = std::nan("");
      trace.records.push_back(rec);
      trace.reason = StopReason::singular_partition;
      break;
    }
    rec.glambda = grad_lambda(rep.alpha, tau, ds2, dalpha);
    trace.records.push_back(rec);
    if (!std::isfinite(rec.gtau) || !std::isfinite(rec.glambda))
      throw TrainingError("non-finite outer gradient at iteration " + std::to_string(k), trace);

    if (k > 1 && std::abs(loss - trace.records[trace.records.size() - 2].outer_loss) < stop_tol) {
      trace.reason = StopReason::loss_plateau;
      break;
    }
    tau = std::max(tau - beta_tau * rec.gtau, tau_floor);
    lambda = std::max(lambda - beta_lambda * rec.glambda, cfg.lambda_min);
  }

  return TrainResult{RegressionModel{best_rep->alpha, best_rep->delta, best_lambda},
                     DetectorConfig(best_tau), std::move(trace), init, best_loss};
}

}  // namespace derids
