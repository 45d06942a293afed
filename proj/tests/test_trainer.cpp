#include <doctest.h>

#include "qrnn/trainer.hpp"
#include "support.hpp"

using namespace qrnn;
using test::toy_dataset;

namespace {

std::span<const double> span_of(const RVector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("pooled rmse") {
  std::vector<RVector> p(2, RVector(5)), y(2, RVector(5));
  p[0] << 1, 2, 3, 4, 5;
  p[1] << -1, 0, 1, 2, 3;
  y[0] = p[0];
  y[1] = p[1];
  CHECK(rmse_loss(p, y) == 0.0);

  for (auto& v : p) v.array() += 0.3;
  CHECK(rmse_loss(p, y) == doctest::Approx(0.3).epsilon(1e-14));

  y[0] << 1, 2, 3, 4, 5;
  y[1] << -1, 0, 1, 2, 3;
  p[0] << 2, 2, 3, 4, 5;   // errors 1,0,0,0,0
  p[1] << -1, 2, 1, 2, 6;  // errors 0,2,0,0,3
  CHECK(rmse_loss(p, y) == doctest::Approx(std::sqrt((1.0 + 4.0 + 9.0) / 10.0)).epsilon(1e-14));

  CHECK_THROWS_AS(rmse_loss({}, {}), EmptyDatasetError);
  std::vector<RVector> short_y{RVector(4), RVector(5)};
  CHECK_THROWS_AS(rmse_loss(p, short_y), ShapeError);
}

TEST_CASE("minimizer solves a quadratic in a few iterations") {
  std::mt19937_64 rng(71);
  RVector a(6);
  for (int i = 0; i < 6; ++i) a(i) = test::urand(rng, -2.0, 2.0);

  const Objective quad = [&a](const RVector& x, RVector* grad) {
    if (grad != nullptr) *grad = 2.0 * (x - a);
    return (x - a).squaredNorm();
  };

  RVector x0(6);
  for (int i = 0; i < 6; ++i) x0(i) = test::urand(rng, -5.0, 5.0);

  LbfgsOptions opt;
  opt.g_tol = 1e-10;
  const MinimizeResult res = minimize(quad, x0, opt);
  CHECK((res.theta - a).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(res.n_it <= 20);
  CHECK(res.n_fev >= res.n_it);
  CHECK(res.n_fev == res.n_jev);
}

TEST_CASE("minimizer reaches the rosenbrock minimum") {
  const Objective rosen = [](const RVector& x, RVector* grad) {
    const double a = 1.0 - x(0);
    const double b = x(1) - x(0) * x(0);
    if (grad != nullptr) {
      grad->resize(2);
      (*grad)(0) = -2.0 * a - 400.0 * x(0) * b;
      (*grad)(1) = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
  };

  RVector x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions opt;
  opt.g_tol = 1e-8;
  opt.f_rel_tol = 1e-14;
  const MinimizeResult res = minimize(rosen, x0, opt);
  CHECK(std::abs(res.theta(0) - 1.0) <= 1e-5);
  CHECK(std::abs(res.theta(1) - 1.0) <= 1e-5);
}

TEST_CASE("minimizer stops on the gradient threshold or the iteration cap") {
  const Objective quad = [](const RVector& x, RVector* grad) {
    if (grad != nullptr) *grad = 2.0 * x;
    return x.squaredNorm();
  };
  RVector x0(3);
  x0 << 1.0, -2.0, 0.5;

  LbfgsOptions tight;
  tight.g_tol = 1e-9;
  tight.max_iter = 2;
  const MinimizeResult capped = minimize(quad, x0, tight);
  CHECK(capped.n_it == 2);
  CHECK((capped.hit_max_iter || capped.converged_ftol));

  LbfgsOptions loose;
  loose.g_tol = 1e3;  // already satisfied at the start
  const MinimizeResult instant = minimize(quad, x0, loose);
  CHECK(instant.converged_gtol);
  CHECK(instant.n_it == 0);
}

TEST_CASE("minimizer rejects a non-finite start") {
  const Objective bad = [](const RVector&, RVector* grad) {
    if (grad != nullptr) grad->setConstant(1, 0.0);
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(minimize(bad, RVector::Zero(1), LbfgsOptions{}), NumericError);
}

TEST_CASE("iteration callback sees a non-increasing best loss") {
  const Objective quad = [](const RVector& x, RVector* grad) {
    if (grad != nullptr) *grad = 2.0 * x;
    return x.squaredNorm();
  };
  RVector x0(4);
  x0 << 3.0, -1.0, 2.0, 0.7;
  std::vector<double> losses;
  LbfgsOptions opt;
  opt.g_tol = 1e-12;
  minimize(quad, x0, opt, [&](int, const RVector&, double f) { losses.push_back(f); });
  REQUIRE(!losses.empty());
  double best = losses.front();
  for (const double f : losses) {
    CHECK(f <= best + 1e-15);
    best = std::min(best, f);
  }
}

TEST_CASE("bias-only fit drives the training error to zero") {
  std::mt19937_64 rng(72);
  // no entangling layers, constant target: only the bias has to move
  const AnsatzConfig cfg{1, 1, 0, 0, 1};
  WindowedDataset ds = toy_dataset(6, 2, 3, 1, rng);
  ds.series.inputs.setZero();
  ds.series.target.setConstant(0.2);

  TrainConfig tc;
  tc.restarts = 1;
  tc.max_iter = 200;
  tc.g_tol = 1e-10;
  tc.init_seed = 5;
  tc.workers = 1;

  // the pooled RMSE has a |.|-shaped floor at zero error, so the line
  // search is allowed to give up there with the near-zero best kept
  const TrainResult result = train_multi_restart(ds, cfg, tc);
  CHECK(result.report.rmse_train <= 1e-4);
}

TEST_CASE("multi restart picks the best validation run deterministically") {
  std::mt19937_64 rng(73);
  const AnsatzConfig cfg{1, 1, 1, 0, 1};
  WindowedDataset ds = toy_dataset(6, 2, 4, 1, rng);
  // carve out one window as validation
  ds.val_starts.push_back(ds.train_starts.back());
  ds.train_starts.pop_back();
  // make the targets reachable so training moves
  ds.series.target.setConstant(0.1);

  TrainConfig tc;
  tc.restarts = 3;
  tc.max_iter = 30;
  tc.g_tol = 1e-6;
  tc.init_seed = 11;
  tc.workers = 1;
  tc.audit_invariants = true;

  const TrainResult first = train_multi_restart(ds, cfg, tc);
  const TrainResult second = train_multi_restart(ds, cfg, tc);

  CHECK(first.report.best_restart == second.report.best_restart);
  CHECK((first.model.theta - second.model.theta).cwiseAbs().maxCoeff() == 0.0);

  REQUIRE(first.report.restarts.size() == 3);
  for (const RestartSummary& s : first.report.restarts) {
    CHECK(first.report.rmse_val <= s.rmse_val + 1e-15);
  }
  CHECK(first.report.audit.audited_states > 0);
  CHECK(first.report.audit.ok());
  CHECK(first.report.budget_gradient > 0);

  SUBCASE("restarts=1 reduces to a single minimization") {
    TrainConfig single = tc;
    single.restarts = 1;
    const TrainResult one = train_multi_restart(ds, cfg, single);
    CHECK(one.report.best_restart == 0);
    CHECK(one.report.restarts.size() == 1);
  }
}

TEST_CASE("evaluate reports the four figures over the right sets") {
  std::mt19937_64 rng(74);
  const WindowedDataset ds = make_windows(generate(SeriesSpec::for_case('a')), 3);
  const AnsatzConfig cfg = test::case_a();
  const ParameterLayout layout(cfg);
  const TrainedModel model{cfg, test::random_theta(layout, rng)};

  InvariantAudit audit;
  const EvalRmse rmse = evaluate(model, ds, &audit);
  CHECK(std::isfinite(rmse.train));
  CHECK(std::isfinite(rmse.val));
  CHECK(std::isfinite(rmse.test));
  CHECK(std::isfinite(rmse.full_test));
  CHECK(audit.ok());
  CHECK(audit.audited_states ==
        20LL * (ds.train_starts.size() + ds.val_starts.size() + ds.test_starts.size() +
                ds.full_test_starts.size()));

  // an untrained random model cannot be at zero error
  CHECK(rmse.train > 1e-4);
}

}  // TEST_SUITE
