#include "doctest.h"

#include "derids/datagen.hpp"
#include "derids/errors.hpp"
#include "derids/harness.hpp"
#include "derids/trainer.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace derids;

namespace {

Matrix random_features(Rng& rng, int n) {
  Matrix x(n, 4);
  for (int i = 0; i < n; ++i) x.row(i) << 1.0, rng.uniform(0, 10), rng.uniform(0, 4), rng.uniform(3, 7);
  return x;
}

Vector alpha0() {
  Vector a(4);
  a << 2.0, 3.0, -1.5, 4.0;
  return a;
}

// A small poisoned scenario from the experiment generator.
ScenarioData scenario(int run) {
  RunConfig cfg;
  cfg.n1 = 300;
  cfg.n2 = 100;
  cfg.master_seed = 99;
  return generate_scenario(Cell{0.3, 1.0, 0.7}, run, cfg);
}

}  // namespace

TEST_CASE("default_init: exact-linear D1 falls back to 1e-3 mean|p|") {
  Rng rng(41);
  const Matrix x = random_features(rng, 50);
  const Vector p = x * alpha0();
  const auto d1 = Dataset::unlabeled(x, p);
  const auto d2 = d1.with_labels(std::vector<Label>(50, Label::normal));
  const auto init = default_init(d1, d2);
  CHECK(init.lambda_fallback);
  CHECK(init.lambda == doctest::Approx(1e-3 * p.cwiseAbs().mean()).epsilon(1e-12));
}

TEST_CASE("default_init: D2 residual magnitudes {1,2,3} give tau = 2") {
  Rng rng(42);
  const Matrix x = random_features(rng, 40);
  const auto d1 = Dataset::unlabeled(x, x * alpha0());
  const Matrix x2 = random_features(rng, 3);
  Vector p2 = x2 * alpha0();
  p2[0] += 3.0;
  p2[1] -= 1.0;
  p2[2] += 2.0;
  const auto d2 = Dataset::labeled(x2, p2, {Label::normal, Label::anomaly, Label::normal});
  CHECK(default_init(d1, d2).tau == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("default_init: standard-normal residuals give lambda near 1.345 (10k Monte-Carlo)") {
  Rng rng(43);
  const Matrix x = random_features(rng, 10000);
  Vector p = x * alpha0();
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += rng.normal();
  const auto d1 = Dataset::unlabeled(x, p);
  const auto init = default_init(d1, d1.with_labels(std::vector<Label>(10000, Label::normal)));
  CHECK_FALSE(init.lambda_fallback);
  CHECK(init.lambda == doctest::Approx(1.345).epsilon(0.10));
}

TEST_CASE("K = 0 returns the initialization unchanged") {
  const auto s = scenario(0);
  TrainerConfig cfg;
  cfg.K = 0;
  const auto res = train(s.d1, s.d2, cfg);
  const auto init = default_init(s.d1, s.d2);
  CHECK(res.trace.records.empty());
  CHECK_FALSE(res.trace.best_index.has_value());
  CHECK(res.detector.tau() == init.tau);
  CHECK(*res.model.lambda == init.lambda);
  CHECK((res.model.alpha - fit_robust(s.d1, init.lambda).alpha).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("explicit initial values are honoured") {
  const auto s = scenario(1);
  TrainerConfig cfg;
  cfg.K = 0;
  cfg.tau_init = 3.5;
  cfg.lambda_init = 0.75;
  const auto res = train(s.d1, s.d2, cfg);
  CHECK(res.detector.tau() == 3.5);
  CHECK(*res.model.lambda == 0.75);
}

TEST_CASE("returned loss never exceeds the initial iterate's loss") {
  for (int run = 0; run < 3; ++run) {
    const auto s = scenario(run);
    const auto res = train(s.d1, s.d2);
    REQUIRE_FALSE(res.trace.records.empty());
    CHECK(res.outer_loss <= res.trace.records.front().outer_loss);
    REQUIRE(res.trace.best_index.has_value());
    const auto& best = res.trace.records[*res.trace.best_index];
    CHECK(best.outer_loss == res.outer_loss);
    CHECK(best.tau == res.detector.tau());
    CHECK(best.lambda == *res.model.lambda);
    for (const auto& r : res.trace.records) CHECK(r.outer_loss >= res.outer_loss);
  }
}

TEST_CASE("clean D1 with an informative D2 does not get worse") {
  RunConfig cfg;
  cfg.n1 = 300;
  cfg.n2 = 100;
  cfg.master_seed = 5;
  const auto s = generate_scenario(Cell{0.0, 0.0, 1.0}, 0, cfg);
  const auto res = train(s.d1, s.d2);
  CHECK(res.outer_loss <= res.trace.records.front().outer_loss);
}

TEST_CASE("lambda never drops below lambda_min") {
  const auto s = scenario(2);
  TrainerConfig cfg;
  cfg.K = 40;
  cfg.lambda_min = 0.05;
  cfg.beta_lambda_rel = 5.0;  // aggressive steps so the floor is hit
  try {
    const auto res = train(s.d1, s.d2, cfg);
    for (const auto& r : res.trace.records) CHECK(r.lambda >= cfg.lambda_min);
    CHECK(*res.model.lambda >= cfg.lambda_min);
  } catch (const TrainingError& e) {
    for (const auto& r : e.trace().records) CHECK(r.lambda >= cfg.lambda_min);
  }
}

TEST_CASE("best-iterate loss is nonincreasing in the budget") {
  const auto s = scenario(3);
  double prev = std::numeric_limits<double>::infinity();
  for (int K : {1, 2, 5, 20, 60, 200}) {
    TrainerConfig cfg;
    cfg.K = K;
    const auto res = train(s.d1, s.d2, cfg);
    CHECK(res.trace.records.size() <= static_cast<std::size_t>(K));
    CHECK(res.outer_loss <= prev);
    prev = res.outer_loss;
  }
}

TEST_CASE("trace losses re-evaluate from (lambda_k, tau_k) within 1e-10") {
  const auto s = scenario(4);
  const auto res = train(s.d1, s.d2);
  for (const auto& r : res.trace.records) {
    CHECK(std::isfinite(r.outer_loss));
    const Vector a = fit_robust(s.d1, r.lambda).alpha;
    CHECK(std::abs(outer_loss(a, r.tau, s.d2) - r.outer_loss) <= 1e-10 * std::max(1.0, r.outer_loss));
    CHECK(r.i1 + r.i2 + r.i3 == static_cast<std::size_t>(s.d1.size()));
  }
  const auto csv = res.trace.to_csv();
  CHECK(csv.rfind("k,lambda,tau,outer_loss,inner_obj,i1,i2,i3,gtau,glambda\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == res.trace.records.size() + 1);
}

TEST_CASE("separable D2: returned tau is near the 1-D optimum over tau at the returned lambda") {
  Rng rng(44);
  const Matrix x1 = random_features(rng, 300);
  Vector p1 = x1 * alpha0();
  for (Eigen::Index i = 0; i < p1.size(); ++i) p1[i] += 0.2 * rng.normal();
  const auto d1 = Dataset::unlabeled(x1, p1);

  const Matrix x2 = random_features(rng, 100);
  Vector p2 = x2 * alpha0();
  std::vector<Label> y(100);
  for (int i = 0; i < 100; ++i) {
    const bool anomaly = i % 5 == 0;
    y[static_cast<std::size_t>(i)] = anomaly ? Label::anomaly : Label::normal;
    p2[i] += anomaly ? rng.sign() * rng.uniform(3.0, 5.0) : rng.uniform(-0.5, 0.5);
  }
  const auto d2 = Dataset::labeled(x2, p2, y);

  const auto res = train(d1, d2);
  const Vector& a = res.model.alpha;
  const auto loss = [&](double t) { return oracle::logistic_sum(a, t, d2); };
  const double t_star = oracle::golden_section(loss, 0.0, 10.0);
  CHECK(loss(res.detector.tau()) - loss(t_star) <= 1e-3);
}

TEST_CASE("inner non-convergence aborts with the partial trace") {
  const auto s = scenario(5);
  TrainerConfig cfg;
  cfg.inner_max_iter = 0;
  try {
    train(s.d1, s.d2, cfg);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("did not converge") != std::string::npos);
    CHECK(e.trace().records.empty());
  }
}

TEST_CASE("configuration and input validation") {
  const auto s = scenario(6);
  TrainerConfig cfg;
  cfg.beta_tau = -1.0;
  CHECK_THROWS_AS(train(s.d1, s.d2, cfg), DomainError);
  cfg = {};
  cfg.lambda_min = 0.0;
  CHECK_THROWS_AS(train(s.d1, s.d2, cfg), DomainError);
  cfg = {};
  cfg.K = -1;
  CHECK_THROWS_AS(train(s.d1, s.d2, cfg), DomainError);
  CHECK_THROWS_AS(train(s.d2, s.d2), SchemaError);
  CHECK_THROWS_AS(train(s.d1, s.d1), SchemaError);
}
