#pragma once

#include "derids/errors.hpp"
#include "derids/gradients.hpp"
#include "derids/robust_regression.hpp"
#include "derids/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace derids {

/// Outer gradient-descent settings. Step sizes default to a fraction of the
/// initial values so behaviour does not depend on the command units.
struct TrainerConfig {
  int K = 200;
  double beta_tau_rel = 1e-2;
  double beta_lambda_rel = 1e-2;
  std::optional<double> beta_tau;     // absolute step, overrides beta_tau_rel
  std::optional<double> beta_lambda;  // absolute step, overrides beta_lambda_rel
  std::optional<double> tau_init;
  std::optional<double> lambda_init;
  double lambda_min = 1e-6;
  /// Stop when |L_k - L_{k-1}| falls below this; defaults to 1e-8 * n2.
  std::optional<double> stop_tol;
  ImplicitGradientScaling scaling = kDefaultScaling;
  double inner_tol = 1e-10;
  int inner_max_iter = 500;

  void validate() const;
};

struct InitialValues {
  double tau = 0.0;
  double lambda = 0.0;
  /// True when the residual MAD was zero and lambda fell back to 1e-3 * mean|p|.
  bool lambda_fallback = false;
};

/// lambda_1 = 1.345 * MAD(LS residuals on D1) / 0.6745,
/// tau_1 = median over D2 of |alpha_LS . x - p|.
InitialValues default_init(const Dataset& ds1, const Dataset& ds2);

struct TrainRecord {
  int k = 0;
  double lambda = 0.0;
  double tau = 0.0;
  double outer_loss = 0.0;
  double inner_objective = 0.0;
  std::size_t i1 = 0, i2 = 0, i3 = 0;
  double gtau = 0.0;
  double glambda = 0.0;
};

enum class StopReason { budget, loss_plateau, singular_partition };

std::string_view to_string(StopReason reason) noexcept;

struct TrainTrace {
  std::vector<TrainRecord> records;
  StopReason reason = StopReason::budget;
  /// Position of the returned iterate in `records` (absent when K = 0).
  std::optional<std::size_t> best_index;

  /// `k,lambda,tau,outer_loss,inner_obj,i1,i2,i3,gtau,glambda`
  std::string to_csv() const;
};

/// Training aborted; carries the trace up to the failure.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, TrainTrace trace) : Error(what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const noexcept { return trace_; }

 private:
  TrainTrace trace_;
};

struct TrainResult {
  RegressionModel model;
  DetectorConfig detector;
  TrainTrace trace;
  InitialValues init;
  double outer_loss = 0.0;
};

/// Bilevel training: gradient descent on (lambda, tau) with the inner robust
/// regression re-solved exactly at every iterate. Returns the iterate with the
/// lowest outer loss seen. Throws TrainingError when an inner solve fails to
/// converge or a gradient is not finite.
TrainResult train(const Dataset& ds1, const Dataset& ds2, const TrainerConfig& cfg = {});

}  // namespace derids
