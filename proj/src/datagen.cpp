#include "derids/datagen.hpp"

#include "derids/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace derids {

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw DomainError("cannot draw an index from an empty range");
  const std::uint64_t bound = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return static_cast<std::size_t>(v % bound);
}

double Rng::sign() { return (engine_() >> 63) ? 1.0 : -1.0; }

std::uint64_t split_seed(std::uint64_t parent, std::uint64_t stream) {
  std::uint64_t z = parent + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void GroundTruth::validate() const {
  if (alpha_true.size() != 4) throw DomainError("ground truth needs 4 coefficients");
  if (!(noise_std_rel >= 0.0)) throw DomainError("noise_std_rel must be nonnegative");
  if (!(p_load.lo <= p_load.hi) || !(q_load.lo <= q_load.hi) || p_dmax_levels.empty())
    throw DomainError("feature ranges must be nonempty");
}

namespace {

Vector draw_features(const GroundTruth& gt, Rng& rng) {
  Vector x(4);
  x[0] = 1.0;
  x[1] = rng.uniform(gt.p_load.lo, gt.p_load.hi);
  x[2] = rng.uniform(gt.q_load.lo, gt.q_load.hi);
  x[3] = gt.p_dmax_levels[rng.index(gt.p_dmax_levels.size())];
  return x;
}

std::vector<std::size_t> sample_subset(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Vector perturb(const Vector& p, const std::vector<std::size_t>& attacked, const AttackSpec& spec,
               Rng& rng) {
  Vector out = p;
  for (auto i : attacked) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double s = spec.sign == SignMode::symmetric ? rng.sign() : 1.0;
    const double eta = spec.noise_rel * std::abs(p[ii]) * rng.normal();
    out[ii] = p[ii] * (1.0 + s * spec.magnitude) + eta;
  }
  return out;
}

}  // namespace

GroundTruth draw_ground_truth(std::uint64_t seed, double mean_abs_command, double noise_std_rel) {
  if (!(mean_abs_command > 0.0)) throw DomainError("mean_abs_command must be positive");
  Rng rng(seed);
  GroundTruth gt;
  gt.noise_std_rel = noise_std_rel;
  gt.alpha_true = Vector(4);
  for (Eigen::Index j = 0; j < 4; ++j) gt.alpha_true[j] = rng.uniform(-1.0, 1.0);
  constexpr int kScaleSamples = 4096;
  double mean_abs = 0.0;
  for (int s = 0; s < kScaleSamples; ++s) mean_abs += std::abs(gt.alpha_true.dot(draw_features(gt, rng)));
  mean_abs /= kScaleSamples;
  if (!(mean_abs > 0.0)) throw DomainError("degenerate ground-truth draw");
  gt.alpha_true *= mean_abs_command / mean_abs;
  gt.validate();
  return gt;
}

Dataset generate_clean(const GroundTruth& gt, std::size_t n, std::uint64_t seed) {
  gt.validate();
  if (n == 0) throw DomainError("cannot generate an empty dataset");
  Rng rng(seed);
  const auto rows = static_cast<Eigen::Index>(n);
  Matrix x(rows, 4);
  Vector p(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    x.row(i) = draw_features(gt, rng).transpose();
    const double eps = gt.noise_std_rel * rng.normal();
    p[i] = gt.alpha_true.dot(x.row(i).transpose()) * (1.0 + eps);
  }
  return Dataset::unlabeled(std::move(x), std::move(p));
}

std::size_t attacked_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

Injection inject_poisoning(const Dataset& ds, const AttackSpec& spec) {
  spec.validate();
  if (spec.kind != AttackKind::poisoning) throw DomainError("inject_poisoning needs a poisoning spec");
  const auto n = static_cast<std::size_t>(ds.size());
  const auto k = attacked_count(spec.fraction, n);
  if (k == 0) return Injection{ds, {}};
  Rng rng(spec.seed);
  auto attacked = sample_subset(n, k, rng);
  auto p = perturb(ds.commands(), attacked, spec, rng);
  return Injection{ds.with_commands(std::move(p)), std::move(attacked)};
}

Injection inject_evasion(const Dataset& clean_pool, const AttackSpec& spec, double anomaly_fraction) {
  spec.validate();
  if (spec.kind != AttackKind::evasion) throw DomainError("inject_evasion needs an evasion spec");
  if (!(anomaly_fraction >= 0.0 && anomaly_fraction <= 1.0))
    throw DomainError("anomaly fraction must lie in [0, 1]");
  const auto n = static_cast<std::size_t>(clean_pool.size());
  const auto k = attacked_count(anomaly_fraction, n);
  std::vector<Label> y(n, Label::normal);
  if (k == 0) return Injection{clean_pool.without_labels().with_labels(std::move(y)), {}};
  Rng rng(spec.seed);
  auto attacked = sample_subset(n, k, rng);
  auto p = perturb(clean_pool.commands(), attacked, spec, rng);
  for (auto i : attacked) y[i] = Label::anomaly;
  return Injection{clean_pool.without_labels().with_commands(std::move(p)).with_labels(std::move(y)),
                   std::move(attacked)};
}

}  // namespace derids
