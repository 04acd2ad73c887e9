#pragma once

// Validation metrics, (k, lambda) grid search and the repeated toy experiment.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ksupport/data.hpp"
#include "ksupport/errors.hpp"
#include "ksupport/losses.hpp"
#include "ksupport/model_io.hpp"
#include "ksupport/solver.hpp"

namespace ksupport {

// ---------------------------------------------------------------------------
// Metrics

inline double accuracy(const VectorRef& predicted, const VectorRef& y) {
  if (predicted.size() != y.size()) throw InputError("accuracy: length mismatch");
  if (y.size() == 0) throw InputError("accuracy: empty input");
  Eigen::Index agree = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) agree += predicted[i] == y[i];
  return static_cast<double>(agree) / static_cast<double>(y.size());
}

enum class MseMode { mean, sum };

inline double mse(const VectorRef& scores, const VectorRef& y, MseMode mode) {
  if (scores.size() != y.size()) throw InputError("mse: length mismatch");
  if (y.size() == 0) throw InputError("mse: empty input");
  const double sum = (scores - y).squaredNorm();
  return mode == MseMode::sum ? sum : sum / static_cast<double>(y.size());
}

// ---------------------------------------------------------------------------
// Grid search

enum class Metric { accuracy, mse_mean, mse_sum };
enum class RegularizerMode { ksup, l1_fixed, l2_fixed };

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::accuracy: return "accuracy";
    case Metric::mse_mean: return "mse_mean";
    case Metric::mse_sum: return "mse_sum";
  }
  return "unknown";
}

inline std::string_view to_string(RegularizerMode m) {
  switch (m) {
    case RegularizerMode::ksup: return "ksup";
    case RegularizerMode::l1_fixed: return "l1";
    case RegularizerMode::l2_fixed: return "l2";
  }
  return "unknown";
}

inline Metric parse_metric(std::string_view name) {
  for (auto m : {Metric::accuracy, Metric::mse_mean, Metric::mse_sum})
    if (to_string(m) == name) return m;
  throw ParameterError("unknown metric '" + std::string(name) + "'");
}

inline RegularizerMode parse_regularizer_mode(std::string_view name) {
  for (auto m : {RegularizerMode::ksup, RegularizerMode::l1_fixed, RegularizerMode::l2_fixed})
    if (to_string(m) == name) return m;
  throw ParameterError("unknown regularizer '" + std::string(name) + "' (expected ksup, l1 or l2)");
}

inline constexpr bool higher_is_better(Metric m) { return m == Metric::accuracy; }

/// lambda = 10^i for i in [lo, hi].
inline std::vector<double> decade_grid(int lo, int hi) {
  std::vector<double> out;
  for (int i = lo; i <= hi; ++i) out.push_back(std::pow(10.0, i));
  return out;
}

inline std::vector<int> k_range(int d) {
  std::vector<int> out(static_cast<std::size_t>(d));
  for (int k = 1; k <= d; ++k) out[static_cast<std::size_t>(k - 1)] = k;
  return out;
}

struct GridSpec {
  std::vector<int> k_values;  // empty: 1..d
  std::vector<double> lambda_values = decade_grid(-15, 5);
  Metric metric = Metric::accuracy;
  RegularizerMode mode = RegularizerMode::ksup;

  /// k values actually searched for a problem with d features.
  std::vector<int> effective_k(int d) const {
    switch (mode) {
      case RegularizerMode::l1_fixed: return {1};
      case RegularizerMode::l2_fixed: return {d};
      case RegularizerMode::ksup: break;
    }
    return k_values.empty() ? k_range(d) : k_values;
  }

  void validate(int d) const {
    if (lambda_values.empty()) throw ParameterError("grid: empty lambda grid");
    for (double l : lambda_values)
      if (!(l > 0.0) || !std::isfinite(l)) throw ParameterError("grid: lambda values must be positive");
    for (int k : effective_k(d))
      if (k < 1 || k > d)
        throw ParameterError("grid: k = " + std::to_string(k) + " outside [1, " + std::to_string(d) + "]");
  }
};

struct GridCell {
  int k = 1;
  double lambda = 0.0;
  std::optional<double> score;  // empty when the fit failed
  int iterations = 0;
  bool converged = false;
  std::string error;
  Vector beta;
};

struct GridSearchReport {
  Metric metric = Metric::accuracy;
  std::vector<GridCell> cells;  // k-major, lambda-minor
  std::size_t best = 0;
  Model model;  // train-fitted model of the winning cell

  const GridCell& best_cell() const { return cells[best]; }
  std::size_t failed_cells() const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [](const GridCell& c) { return !c.score; }));
  }
};

namespace detail {

inline double score_model(const VectorRef& beta, const Dataset& data, Metric metric) {
  const Vector scores = predict_scores(beta, data.X);
  switch (metric) {
    case Metric::accuracy: return accuracy(classify(scores), data.y);
    case Metric::mse_mean: return mse(scores, data.y, MseMode::mean);
    case Metric::mse_sum: return mse(scores, data.y, MseMode::sum);
  }
  return 0.0;
}

// True if a should win over b: better score, then smaller k, then larger lambda.
inline bool cell_beats(const GridCell& a, const GridCell& b, Metric metric) {
  if (*a.score != *b.score) return higher_is_better(metric) ? *a.score > *b.score : *a.score < *b.score;
  if (a.k != b.k) return a.k < b.k;
  return a.lambda > b.lambda;
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Exceptions from
/// body are not expected; callers catch inside body.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
}

}  // namespace detail

/// Default metric for a target kind: accuracy for binary, mean MSE for real.
inline Metric default_metric(TargetKind kind) {
  return kind == TargetKind::binary ? Metric::accuracy : Metric::mse_mean;
}

/// Fits every (k, lambda) cell on train and scores it on val. A failed fit
/// marks its cell and the search goes on; only an all-failed grid throws.
/// threads = 0 uses the hardware concurrency. Results do not depend on the
/// thread count.
inline GridSearchReport grid_search(const Dataset& train, const Dataset& val, const LossSpec& spec,
                                    const GridSpec& grid, const SolverConfig& cfg = {},
                                    unsigned threads = 0) {
  train.validate();
  val.validate();
  if (train.features() != val.features())
    throw InputError("grid search: train and validation feature counts differ");
  if (train.target_kind != val.target_kind)
    throw InputError("grid search: train and validation target kinds differ");
  const int d = static_cast<int>(train.features());
  grid.validate(d);

  GridSearchReport report;
  report.metric = grid.metric;
  for (int k : grid.effective_k(d))
    for (double lambda : grid.lambda_values) {
      GridCell cell;
      cell.k = k;
      cell.lambda = lambda;
      report.cells.push_back(std::move(cell));
    }

  detail::parallel_for(report.cells.size(), threads, [&](std::size_t i) {
    auto& cell = report.cells[i];
    try {
      const auto res = fit(train, spec, cell.k, cell.lambda, cfg);
      cell.iterations = res.iterations;
      cell.converged = res.converged;
      cell.score = detail::score_model(res.beta, val, grid.metric);
      cell.beta = res.beta;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    if (!report.cells[i].score) continue;
    if (!best || detail::cell_beats(report.cells[i], report.cells[*best], grid.metric)) best = i;
  }
  if (!best) throw Error("grid search: every cell failed (first error: " + report.cells.front().error + ")");
  report.best = *best;

  const auto& win = report.cells[*best];
  report.model.beta = win.beta;
  report.model.k = win.k;
  report.model.lambda = win.lambda;
  report.model.loss = spec;
  report.model.objective = objective(win.beta, train, spec, win.k, win.lambda);
  report.model.iterations = win.iterations;
  report.model.converged = win.converged;
  return report;
}

/// One line per cell: k, lambda, score, iterations, converged, failed.
inline std::string format_report_csv(const GridSearchReport& report) {
  std::string out = "k,lambda," + std::string(to_string(report.metric)) + ",iterations,converged,failed\n";
  for (const auto& c : report.cells) {
    out += std::to_string(c.k) + "," + detail::format_double(c.lambda) + "," +
           (c.score ? detail::format_double(*c.score) : std::string()) + "," + std::to_string(c.iterations) +
           "," + (c.converged ? "1" : "0") + "," + (c.score ? "0" : "1") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Repeated toy experiment

// Noise std on the signal features for the repeated experiment. Unit noise
// makes the toy problem nearly separable (test accuracy ~0.99); 2.5 puts
// k-support accuracy near 0.88 and squared-loss test MSE sums near 110.
inline constexpr double kExperimentNoiseSigma = 2.5;

inline ToyConfig experiment_toy() {
  ToyConfig t;
  t.noise_sigma = kExperimentNoiseSigma;
  return t;
}

struct ExperimentConfig {
  int instances = 20;
  std::uint64_t base_seed = 0;
  std::vector<LossSpec> losses;
  std::vector<int> k_values;  // empty: 1..d
  std::vector<double> lambda_values = decade_grid(-15, 5);
  std::vector<RegularizerMode> regularizers = {RegularizerMode::ksup, RegularizerMode::l1_fixed,
                                               RegularizerMode::l2_fixed};
  ToyConfig toy = experiment_toy();
  SolverConfig solver;
  unsigned threads = 0;

  /// The seven losses with h = 0.1 and eps = 1.
  static std::vector<LossSpec> default_losses(double h = kDefaultHuber, double eps = kDefaultEpsilon) {
    std::vector<LossSpec> out;
    for (auto kind : kAllLossKinds) out.push_back(LossSpec::make(kind, h, eps));
    return out;
  }

  /// Coarsened grid for quick runs: 5 instances, 7 values of k, lambda in 1e-4..1e2.
  static ExperimentConfig fast() {
    ExperimentConfig cfg;
    cfg.instances = 5;
    cfg.k_values = {1, 5, 10, 15, 20, 40, 65};
    cfg.lambda_values = decade_grid(-4, 2);
    return cfg;
  }
};

/// Test-set outcome of one grid search.
struct InstanceResult {
  int instance = 0;
  std::uint64_t seed = 0;
  std::string loss;
  RegularizerMode regularizer = RegularizerMode::ksup;
  bool failed = false;
  std::string error;
  int k = 0;
  double lambda = 0.0;
  double val_score = 0.0;
  double test_accuracy = 0.0;
  double test_mse_sum = 0.0;
  double test_mse_mean = 0.0;
  std::size_t failed_cells = 0;
};

struct TableEntry {
  std::string loss;
  RegularizerMode regularizer = RegularizerMode::ksup;
  std::string metric;  // accuracy, mse_sum, mse_mean
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single instance
  int n_instances = 0;
  int n_missing = 0;
};

struct ExperimentTable {
  std::vector<TableEntry> entries;
  std::vector<InstanceResult> details;

  const TableEntry& at(std::string_view loss, RegularizerMode reg, std::string_view metric) const {
    for (const auto& e : entries)
      if (e.loss == loss && e.regularizer == reg && e.metric == metric) return e;
    throw Error("experiment table: no entry for " + std::string(loss) + "/" + std::string(to_string(reg)) +
                "/" + std::string(metric));
  }
};

namespace detail {

inline void mean_std(const std::vector<double>& xs, double& mean, double& std) {
  mean = 0.0;
  std = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

/// For each instance (seed = base_seed + index), each loss and each
/// regularizer row: select (k, lambda) by validation accuracy, then evaluate
/// the selected train-fitted model on the test set. progress, if given, is
/// called after every grid search.
inline ExperimentTable run_experiment(const ExperimentConfig& cfg,
                                      const std::function<void(const InstanceResult&)>& progress = {}) {
  if (cfg.instances < 1) throw ParameterError("experiment: instances must be at least 1");
  if (cfg.losses.empty()) throw ParameterError("experiment: no losses");
  cfg.toy.validate();

  ExperimentTable table;
  for (int inst = 0; inst < cfg.instances; ++inst) {
    ToyConfig toy_cfg = cfg.toy;
    toy_cfg.seed = cfg.base_seed + static_cast<std::uint64_t>(inst);
    const auto toy = generate_toy(toy_cfg);

    for (const auto& loss : cfg.losses) {
      for (auto reg : cfg.regularizers) {
        InstanceResult r;
        r.instance = inst;
        r.seed = toy_cfg.seed;
        r.loss = std::string(to_string(loss.kind));
        r.regularizer = reg;
        GridSpec grid;
        grid.k_values = cfg.k_values;
        grid.lambda_values = cfg.lambda_values;
        grid.metric = default_metric(toy.train.target_kind);
        grid.mode = reg;
        try {
          const auto report = grid_search(toy.train, toy.val, loss, grid, cfg.solver, cfg.threads);
          const auto& best = report.best_cell();
          const Vector scores = predict_scores(report.model.beta, toy.test.X);
          r.k = best.k;
          r.lambda = best.lambda;
          r.val_score = *best.score;
          r.failed_cells = report.failed_cells();
          r.test_accuracy = accuracy(classify(scores), toy.test.y);
          r.test_mse_sum = mse(scores, toy.test.y, MseMode::sum);
          r.test_mse_mean = mse(scores, toy.test.y, MseMode::mean);
        } catch (const std::exception& e) {
          r.failed = true;
          r.error = e.what();
        }
        if (progress) progress(r);
        table.details.push_back(std::move(r));
      }
    }
  }

  for (const auto& loss : cfg.losses) {
    const std::string name(to_string(loss.kind));
    for (auto reg : cfg.regularizers) {
      std::vector<double> acc, sum, mean;
      int missing = 0;
      for (const auto& r : table.details) {
        if (r.loss != name || r.regularizer != reg) continue;
        if (r.failed) {
          ++missing;
          continue;
        }
        acc.push_back(r.test_accuracy);
        sum.push_back(r.test_mse_sum);
        mean.push_back(r.test_mse_mean);
      }
      for (const auto& [metric, xs] : {std::pair<const char*, const std::vector<double>*>{"accuracy", &acc},
                                       {"mse_sum", &sum},
                                       {"mse_mean", &mean}}) {
        TableEntry e{name, reg, metric};
        detail::mean_std(*xs, e.mean, e.std);
        e.n_instances = static_cast<int>(xs->size());
        e.n_missing = missing;
        table.entries.push_back(std::move(e));
      }
    }
  }
  return table;
}

/// Columns: loss, regularizer, metric, mean, std, n_instances.
inline std::string format_table_csv(const ExperimentTable& table) {
  std::string out = "loss,regularizer,metric,mean,std,n_instances\n";
  for (const auto& e : table.entries)
    out += e.loss + "," + std::string(to_string(e.regularizer)) + "," + e.metric + "," +
           detail::format_double(e.mean) + "," + detail::format_double(e.std) + "," +
           std::to_string(e.n_instances) + "\n";
  return out;
}

inline nlohmann::json to_json(const ExperimentTable& table, const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["config"] = {{"instances", cfg.instances},
                 {"base_seed", cfg.base_seed},
                 {"k_values", cfg.k_values},
                 {"lambda_values", cfg.lambda_values},
                 {"toy", to_json(cfg.toy)},
                 {"solver", {{"max_iter", cfg.solver.max_iter}, {"tol", cfg.solver.tol}}}};
  nlohmann::json losses = nlohmann::json::array();
  for (const auto& l : cfg.losses) {
    losses.push_back({{"loss", to_string(l.kind)},
                      {"h", l.huber() ? nlohmann::json(*l.huber()) : nlohmann::json(nullptr)},
                      {"eps", l.epsilon() ? nlohmann::json(*l.epsilon()) : nlohmann::json(nullptr)}});
  }
  j["config"]["losses"] = losses;
  for (const auto& e : table.entries)
    j["table"].push_back({{"loss", e.loss},
                          {"regularizer", to_string(e.regularizer)},
                          {"metric", e.metric},
                          {"mean", e.mean},
                          {"std", e.std},
                          {"n_instances", e.n_instances},
                          {"n_missing", e.n_missing}});
  for (const auto& r : table.details) {
    nlohmann::json d = {{"instance", r.instance},
                        {"seed", r.seed},
                        {"loss", r.loss},
                        {"regularizer", to_string(r.regularizer)},
                        {"failed", r.failed},
                        {"failed_cells", r.failed_cells}};
    if (r.failed) {
      d["error"] = r.error;
    } else {
      d["k"] = r.k;
      d["lambda"] = r.lambda;
      d["val_score"] = r.val_score;
      d["test_accuracy"] = r.test_accuracy;
      d["test_mse_sum"] = r.test_mse_sum;
      d["test_mse_mean"] = r.test_mse_mean;
    }
    j["instances"].push_back(std::move(d));
  }
  return j;
}

}  // namespace ksupport
