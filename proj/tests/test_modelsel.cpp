#include "ksupport/modelsel.hpp"

#include <gtest/gtest.h>

namespace ksupport {
namespace {

ToyProblem small_toy(std::uint64_t seed, double noise = 1.0) {
  ToyConfig cfg;
  cfg.d_signal = 4;
  cfg.d_noise = 6;
  cfg.n_train = 30;
  cfg.n_val = 30;
  cfg.n_test = 100;
  cfg.noise_sigma = noise;
  cfg.seed = seed;
  return generate_toy(cfg);
}

TEST(Metrics, Examples) {
  const Vector y = (Vector(4) << 1, -1, 1, -1).finished();
  EXPECT_EQ(accuracy(y, y), 1.0);
  EXPECT_EQ(accuracy(-y, y), 0.0);
  Vector p = y;
  p[3] = 1;
  EXPECT_EQ(accuracy(p, y), 0.75);

  const Vector t = (Vector(2) << 1, 2).finished();
  EXPECT_EQ(mse(t, t, MseMode::mean), 0.0);
  const Vector s = (Vector(2) << 2, 5).finished();
  EXPECT_EQ(mse(s, t, MseMode::mean), 5.0);
  EXPECT_EQ(mse(s, t, MseMode::sum), 10.0);
  EXPECT_THROW(accuracy(Vector::Ones(2), Vector::Ones(3)), InputError);
}

TEST(Grid, NamesAndRanges) {
  EXPECT_EQ(decade_grid(-15, 5).size(), 21u);
  EXPECT_EQ(decade_grid(-15, 5).front(), 1e-15);
  EXPECT_EQ(decade_grid(-15, 5).back(), 1e5);
  EXPECT_EQ(k_range(3), (std::vector<int>{1, 2, 3}));
  for (auto m : {Metric::accuracy, Metric::mse_mean, Metric::mse_sum}) EXPECT_EQ(parse_metric(to_string(m)), m);
  for (auto m : {RegularizerMode::ksup, RegularizerMode::l1_fixed, RegularizerMode::l2_fixed})
    EXPECT_EQ(parse_regularizer_mode(to_string(m)), m);
  EXPECT_THROW(parse_metric("auc"), ParameterError);
  GridSpec g;
  g.k_values = {0};
  EXPECT_THROW(g.validate(4), ParameterError);
  g.k_values = {5};
  EXPECT_THROW(g.validate(4), ParameterError);
  g.k_values = {};
  g.lambda_values = {};
  EXPECT_THROW(g.validate(4), ParameterError);
}

TEST(GridSearch, SingleCellIsSelected) {
  const auto toy = small_toy(1);
  GridSpec g;
  g.k_values = {3};
  g.lambda_values = {0.5};
  const auto spec = LossSpec::make(LossKind::huber_hinge);
  const auto rep = grid_search(toy.train, toy.val, spec, g, {}, 1);
  ASSERT_EQ(rep.cells.size(), 1u);
  EXPECT_EQ(rep.model.k, 3);
  EXPECT_EQ(rep.model.lambda, 0.5);
  const auto direct = fit(toy.train, spec, 3, 0.5);
  EXPECT_EQ(rep.model.beta, direct.beta);
  EXPECT_EQ(*rep.best_cell().score, accuracy(classify(predict_scores(direct.beta, toy.val.X)), toy.val.y));
}

TEST(GridSearch, WinnerIsBestAndTieBreakPrefersSmallKLargeLambda) {
  const auto toy = small_toy(2);
  GridSpec g;
  g.lambda_values = decade_grid(-3, 2);
  for (auto kind : {LossKind::squared, LossKind::logistic}) {
    const auto rep = grid_search(toy.train, toy.val, LossSpec::make(kind), g, {}, 1);
    EXPECT_EQ(rep.cells.size(), 10u * 6u);
    double best = -1;
    for (const auto& c : rep.cells) best = std::max(best, *c.score);
    EXPECT_EQ(*rep.best_cell().score, best);
    for (const auto& c : rep.cells) {
      if (*c.score != best) continue;
      EXPECT_GE(c.k, rep.model.k);
      if (c.k == rep.model.k) {
        EXPECT_LE(c.lambda, rep.model.lambda);
      }
    }
  }

  // Huge lambda gives beta = 0 everywhere, so every cell scores the same.
  GridSpec flat;
  flat.k_values = {4, 2, 7};
  flat.lambda_values = {1e12, 1e14};
  const auto rep = grid_search(toy.train, toy.val, LossSpec::make(LossKind::squared), flat, {}, 1);
  EXPECT_EQ(rep.model.k, 2);
  EXPECT_EQ(rep.model.lambda, 1e14);
}

TEST(GridSearch, MseSelectionMinimizes) {
  const auto toy = small_toy(3);
  GridSpec g;
  g.lambda_values = decade_grid(-2, 2);
  g.metric = Metric::mse_mean;
  const auto rep = grid_search(toy.train, toy.val, LossSpec::make(LossKind::squared), g, {}, 1);
  for (const auto& c : rep.cells) EXPECT_GE(*c.score, *rep.best_cell().score);
}

TEST(GridSearch, FixedModesMatchRestrictedKsupGrid) {
  const auto toy = small_toy(4);
  const auto spec = LossSpec::make(LossKind::huber_hinge);
  GridSpec g;
  g.lambda_values = decade_grid(-2, 1);
  for (auto [mode, k] : {std::pair{RegularizerMode::l1_fixed, 1}, std::pair{RegularizerMode::l2_fixed, 10}}) {
    GridSpec fixed = g;
    fixed.mode = mode;
    GridSpec ks = g;
    ks.k_values = {k};
    const auto a = grid_search(toy.train, toy.val, spec, fixed, {}, 1);
    const auto b = grid_search(toy.train, toy.val, spec, ks, {}, 1);
    ASSERT_EQ(a.cells.size(), b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
      EXPECT_EQ(a.cells[i].k, k);
      EXPECT_EQ(a.cells[i].beta, b.cells[i].beta);
    }
  }
}

TEST(GridSearch, SupersetGridIsNeverWorseOnValidation) {
  const auto toy = small_toy(5);
  const auto spec = LossSpec::make(LossKind::logistic);
  GridSpec small;
  small.k_values = {2, 5};
  small.lambda_values = {0.1, 10};
  GridSpec big = small;
  big.k_values = {1, 2, 3, 5, 8};
  big.lambda_values = {0.01, 0.1, 1, 10};
  const auto a = grid_search(toy.train, toy.val, spec, small, {}, 1);
  const auto b = grid_search(toy.train, toy.val, spec, big, {}, 1);
  EXPECT_GE(*b.best_cell().score, *a.best_cell().score);
}

TEST(GridSearch, NearlySeparableToyIsLearned) {
  ToyConfig cfg;
  cfg.noise_sigma = 0.1;
  cfg.seed = 11;
  const auto toy = generate_toy(cfg);
  GridSpec g;
  g.k_values = {1, 5, 15, 65};
  g.lambda_values = decade_grid(-2, 2);
  const auto rep = grid_search(toy.train, toy.val, LossSpec::make(LossKind::huber_hinge), g);
  const double acc = accuracy(classify(predict_scores(rep.model.beta, toy.test.X)), toy.test.y);
  EXPECT_GE(acc, 0.95);
}

TEST(GridSearch, ThreadCountDoesNotChangeResults) {
  const auto toy = small_toy(6);
  GridSpec g;
  g.lambda_values = decade_grid(-2, 1);
  const auto spec = LossSpec::make(LossKind::eps_insensitive);
  const auto a = grid_search(toy.train, toy.val, spec, g, {}, 1);
  const auto b = grid_search(toy.train, toy.val, spec, g, {}, 4);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].beta, b.cells[i].beta);
    EXPECT_EQ(a.cells[i].score, b.cells[i].score);
  }
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(format_report_csv(a), format_report_csv(b));
}

TEST(GridSearch, FailedCellsAreMarkedNotFatal) {
  // One point with a large feature: the exponential loss overflows under a
  // tiny forced Lipschitz constant for every cell.
  const auto train = Dataset::make((Matrix(2, 1) << 1, 2).finished(), (Vector(2) << 1, -1).finished(),
                                   TargetKind::binary);
  GridSpec g;
  g.lambda_values = {1e-6};
  SolverConfig cfg;
  cfg.lipschitz_override = 1e-3;
  EXPECT_THROW(grid_search(train, train, LossSpec::make(LossKind::exponential), g, cfg, 1), Error);

  const auto toy = small_toy(7);
  GridSpec mixed;
  mixed.k_values = {1, 2};
  mixed.lambda_values = {1.0};
  const auto rep = grid_search(toy.train, toy.val, LossSpec::make(LossKind::squared), mixed, {}, 1);
  EXPECT_EQ(rep.failed_cells(), 0u);
  const auto csv = format_report_csv(rep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,lambda,accuracy,iterations,converged,failed");
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig cfg;
  cfg.instances = 3;
  cfg.base_seed = 100;
  cfg.toy.d_signal = 3;
  cfg.toy.d_noise = 4;
  cfg.toy.n_train = 20;
  cfg.toy.n_val = 20;
  cfg.toy.n_test = 40;
  cfg.k_values = {1, 3, 7};
  cfg.lambda_values = {0.1, 1.0};
  cfg.losses = {LossSpec::make(LossKind::squared), LossSpec::make(LossKind::huber_hinge)};
  cfg.threads = 1;
  return cfg;
}

TEST(Experiment, TableShapeAndDeterminism) {
  const auto cfg = tiny_experiment();
  int calls = 0;
  const auto a = run_experiment(cfg, [&](const InstanceResult&) { ++calls; });
  EXPECT_EQ(calls, 3 * 2 * 3);
  EXPECT_EQ(a.entries.size(), 2u * 3u * 3u);
  const auto b = run_experiment(cfg);
  EXPECT_EQ(format_table_csv(a), format_table_csv(b));
  const auto& e = a.at("hinge", RegularizerMode::ksup, "accuracy");
  EXPECT_EQ(e.n_instances, 3);
  EXPECT_EQ(e.n_missing, 0);
  EXPECT_GE(e.mean, 0.0);
  EXPECT_LE(e.mean, 1.0);
  const auto csv = format_table_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "loss,regularizer,metric,mean,std,n_instances");
  for (const auto& r : a.details)
    if (r.regularizer == RegularizerMode::l1_fixed) {
      EXPECT_EQ(r.k, 1);
    }
}

TEST(Experiment, StatisticsMatchPerInstanceResults) {
  const auto cfg = tiny_experiment();
  const auto t = run_experiment(cfg);
  std::vector<double> xs;
  for (const auto& r : t.details)
    if (r.loss == "squared" && r.regularizer == RegularizerMode::l2_fixed) xs.push_back(r.test_mse_sum);
  ASSERT_EQ(xs.size(), 3u);
  const double mean = (xs[0] + xs[1] + xs[2]) / 3.0;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const auto& e = t.at("squared", RegularizerMode::l2_fixed, "mse_sum");
  EXPECT_NEAR(e.mean, mean, 1e-12 * mean);
  EXPECT_NEAR(e.std, std::sqrt(ss / 2.0), 1e-12 * std::max(1.0, mean));

  auto one = cfg;
  one.instances = 1;
  for (const auto& entry : run_experiment(one).entries) EXPECT_EQ(entry.std, 0.0);
}

TEST(Experiment, ThreadCountDoesNotChangeTable) {
  auto cfg = tiny_experiment();
  cfg.instances = 2;
  const auto a = run_experiment(cfg);
  cfg.threads = 3;
  EXPECT_EQ(format_table_csv(a), format_table_csv(run_experiment(cfg)));
}

TEST(Experiment, Errors) {
  auto cfg = tiny_experiment();
  cfg.instances = 0;
  EXPECT_THROW(run_experiment(cfg), ParameterError);
  cfg = tiny_experiment();
  cfg.losses.clear();
  EXPECT_THROW(run_experiment(cfg), ParameterError);
}

}  // namespace
}  // namespace ksupport
