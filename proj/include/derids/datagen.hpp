#pragma once

#include "derids/types.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace derids {

/// Seeded random source with platform-independent draws.
///
/// The std distributions are implementation-defined, so uniform, normal and
/// index draws are derived directly from the 64-bit engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01();  // [0, 1) with 53 random bits
  double uniform(double lo, double hi);
  double normal();     // standard normal, Box-Muller
  std::size_t index(std::size_t n);  // uniform on [0, n)
  double sign();       // -1 or +1

 private:
  std::mt19937_64 engine_;
};

/// Deterministic child seed: splitmix64 finalizer applied to (parent, stream).
std::uint64_t split_seed(std::uint64_t parent, std::uint64_t stream);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Generating model for synthetic real-power command data.
struct GroundTruth {
  Vector alpha_true;            // [intercept, p_L, q_L, p_Dmax] coefficients
  double noise_std_rel = 0.02;  // clean measurement noise, relative to the command
  Range p_load{0.5, 10.0};      // kW
  Range q_load{0.1, 4.0};       // kVAr
  std::vector<double> p_dmax_levels{3.0, 5.0, 7.0};  // kW

  void validate() const;
};

/// Default mean |p| targeted by draw_ground_truth.
inline constexpr double kDefaultMeanAbsCommand = 50.0;

/// alpha_true ~ Uniform[-1, 1]^4, rescaled so the mean |alpha_true . x| over the
/// feature distribution is `mean_abs_command`.
GroundTruth draw_ground_truth(std::uint64_t seed, double mean_abs_command = kDefaultMeanAbsCommand,
                              double noise_std_rel = 0.02);

/// n points with uniform features and p_i = alpha_true . x_i * (1 + eps_i),
/// eps_i ~ Normal(0, noise_std_rel^2).
Dataset generate_clean(const GroundTruth& gt, std::size_t n, std::uint64_t seed);

/// floor(fraction * n), robust to representation error in `fraction`.
std::size_t attacked_count(double fraction, std::size_t n);

struct Injection {
  Dataset data;
  std::vector<std::size_t> attacked;  // ascending
};

/// Replaces p_i on a uniformly random floor(fraction * n)-subset by
/// p_i (1 + s_i m) + eta_i, eta_i ~ Normal(0, (noise_rel |p_i|)^2).
Injection inject_poisoning(const Dataset& ds, const AttackSpec& spec);

/// Labels a floor(anomaly_fraction * n) share of a clean pool +1 after the same
/// perturbation as poisoning; the rest keep clean commands and label -1.
Injection inject_evasion(const Dataset& clean_pool, const AttackSpec& spec, double anomaly_fraction);

}  // namespace derids
