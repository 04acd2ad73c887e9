// ksupport: command-line front end for the k-support norm library.
//
// Exit codes: 0 success, 2 usage error (bad flags or parameter values),
// 1 runtime error (I/O, parse, solver).

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ksupport/ksupport.hpp"

namespace {

using namespace ksupport;

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

struct LossFlags {
  std::string loss;
  double h = kDefaultHuber;
  double eps = kDefaultEpsilon;

  void add(CLI::App* app, bool required = true) {
    auto* opt = app->add_option("--loss", loss, "squared, one-sided-squared, hinge, logistic, exponential, "
                                                "eps-insensitive or absolute");
    if (required) opt->required();
    app->add_option("--h", h, "Huber smoothing width")->capture_default_str();
    app->add_option("--eps", eps, "insensitive-zone half width (eps-insensitive)")->capture_default_str();
  }

  LossSpec spec() const {
    const auto s = LossSpec::make(parse_loss_kind(loss), h, eps);
    if (s.consistency_warning())
      std::cerr << "warning: eps - h >= 1; consistency guarantees for this loss assume eps - h < 1\n";
    return s;
  }
};

struct SolverFlags {
  SolverConfig cfg;
  std::optional<double> lipschitz;

  void add(CLI::App* app) {
    app->add_option("--tol", cfg.tol, "relative objective-change tolerance")->capture_default_str();
    app->add_option("--max-iter", cfg.max_iter, "iteration cap")->capture_default_str();
    app->add_option("--lipschitz", lipschitz, "override the Lipschitz constant (step = 1/L)");
    app->add_option("--exp-lipschitz-factor", cfg.exp_lipschitz_factor,
                    "exponential loss: L = factor * lambda_max(X^T X)")
        ->capture_default_str();
  }

  SolverConfig config() const {
    SolverConfig c = cfg;
    c.lipschitz_override = lipschitz;
    c.validate();
    return c;
  }
};

TargetKind target_for(const LossSpec& spec) {
  return is_classification(spec.kind) ? TargetKind::binary : TargetKind::real;
}

void add_toy_flags(CLI::App* app, ToyConfig& toy) {
  app->add_option("--d-signal", toy.d_signal)->capture_default_str();
  app->add_option("--d-noise", toy.d_noise)->capture_default_str();
  app->add_option("--n-train", toy.n_train)->capture_default_str();
  app->add_option("--n-val", toy.n_val)->capture_default_str();
  app->add_option("--n-test", toy.n_test)->capture_default_str();
  app->add_option("--signal-sigma", toy.signal_sigma)->capture_default_str();
  app->add_option("--noise-sigma", toy.noise_sigma, "noise std on the signal features")->capture_default_str();
  app->add_option("--background-sigma", toy.background_sigma)->capture_default_str();
}

std::string fmt(double v) { return detail::format_double(v); }

// ---------------------------------------------------------------------------

struct NormCmd {
  std::string input;
  int k = 1;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("norm", "print the k-support norm of a vector read from CSV");
    app->add_option("--input", input, "single-row or single-column CSV")->required();
    app->add_option("--k", k)->required();
    app->callback([this] { run(); });
  }

  void run() const {
    if (k < 1) throw ParameterError("norm: k must be at least 1");
    const Vector v = read_vector_csv(input);
    std::printf("%.12g\n", ksup_norm(v, k));
  }
};

struct FitCmd {
  LossFlags loss;
  SolverFlags solver;
  int k = 1;
  double lambda = 0.0;
  std::string train, model;
  bool header = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("fit", "fit one model and write it as JSON");
    loss.add(app);
    solver.add(app);
    app->add_option("--k", k)->required();
    app->add_option("--lambda", lambda)->required();
    app->add_option("--train", train, "CSV, last column is the target")->required();
    app->add_flag("--header", header, "skip the first CSV line");
    app->add_option("--model", model, "output JSON")->required();
    app->callback([this] { run(); });
  }

  void run() const {
    const auto spec = loss.spec();
    const auto cfg = solver.config();
    const auto data = read_csv(train, header, target_for(spec));
    const auto res = fit(data, spec, k, lambda, cfg);
    write_model(Model::from_fit(res, spec, k, lambda), model);
    std::cout << "objective " << fmt(res.objective) << "\niterations " << res.iterations << "\nconverged "
              << (res.converged ? "true" : "false") << "\n";
    if (!res.converged) std::cerr << "warning: iteration cap reached before the tolerance was met\n";
  }
};

struct PredictCmd {
  std::string model, data, out;
  bool header = false, no_target = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("predict", "score a CSV with a fitted model");
    app->add_option("--model", model)->required();
    app->add_option("--data", data, "CSV; last column is the target unless --no-target")->required();
    app->add_flag("--header", header);
    app->add_flag("--no-target", no_target, "every column is a feature");
    app->add_option("--out", out, "write score,prediction CSV here instead of standard output");
    app->callback([this] { run(); });
  }

  void run() const {
    const auto m = read_model(model);
    const bool binary = is_classification(m.loss.kind);
    Matrix X;
    std::optional<Dataset> ds;
    if (no_target) {
      const auto rows = detail::parse_rows(read_file(data), header);
      X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
          X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    } else {
      ds = read_csv(data, header, binary ? TargetKind::binary : TargetKind::real);
      X = ds->X;
    }
    const Vector scores = predict_scores(m.beta, X);
    const Vector pred = binary ? classify(scores) : scores;
    std::string csv = "score,prediction\n";
    for (Eigen::Index i = 0; i < scores.size(); ++i) csv += fmt(scores[i]) + "," + fmt(pred[i]) + "\n";
    if (out.empty()) {
      std::cout << csv;
    } else {
      write_file_atomic(out, csv);
    }
    if (ds) {
      // Summary goes to stderr when the predictions themselves use stdout.
      std::ostream& os = out.empty() ? std::cerr : std::cout;
      os << "objective " << fmt(objective(m.beta, *ds, m.loss, m.k, m.lambda)) << "\n";
      if (binary) {
        os << "accuracy " << fmt(accuracy(pred, ds->y)) << "\n";
      } else {
        os << "mse_mean " << fmt(mse(scores, ds->y, MseMode::mean)) << "\n";
      }
    }
  }
};

struct GridCmd {
  LossFlags loss;
  SolverFlags solver;
  std::string train, val, out, model, metric, mode = "ksup";
  std::vector<int> k_values;
  std::vector<double> lambda_values;
  std::vector<int> lambda_decades{-15, 5};
  bool header = false;
  unsigned threads = 0;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("gridsearch", "select (k, lambda) on a validation set");
    loss.add(app);
    solver.add(app);
    app->add_option("--train", train)->required();
    app->add_option("--val", val)->required();
    app->add_flag("--header", header);
    app->add_option("--k-values", k_values, "default: 1..d")->delimiter(',');
    auto* lv = app->add_option("--lambda-values", lambda_values)->delimiter(',');
    app->add_option("--lambda-decades", lambda_decades, "lambda = 10^i for i in [LO, HI]")
        ->expected(2)
        ->excludes(lv)
        ->capture_default_str();
    app->add_option("--metric", metric, "accuracy, mse_mean or mse_sum (default by target kind)");
    app->add_option("--mode", mode, "ksup, l1 (k = 1) or l2 (k = d)")->capture_default_str();
    app->add_option("--threads", threads, "0: hardware concurrency")->capture_default_str();
    app->add_option("--out", out, "report CSV (default: standard output)");
    app->add_option("--model", model, "write the winning model as JSON");
    app->callback([this] { run(); });
  }

  void run() const {
    const auto spec = loss.spec();
    const auto cfg = solver.config();
    GridSpec grid;
    grid.k_values = k_values;
    grid.lambda_values = lambda_values.empty() ? decade_grid(lambda_decades[0], lambda_decades[1]) : lambda_values;
    grid.mode = parse_regularizer_mode(mode);
    grid.metric = metric.empty() ? default_metric(target_for(spec)) : parse_metric(metric);
    const auto tr = read_csv(train, header, target_for(spec));
    const auto va = read_csv(val, header, target_for(spec));
    grid.validate(static_cast<int>(tr.features()));
    const auto rep = grid_search(tr, va, spec, grid, cfg, threads);
    const auto csv = format_report_csv(rep);
    if (out.empty()) {
      std::cout << csv;
    } else {
      write_file_atomic(out, csv);
    }
    if (!model.empty()) write_model(rep.model, model);
    const auto& best = rep.best_cell();
    std::cerr << "best k " << best.k << " lambda " << fmt(best.lambda) << " " << to_string(rep.metric) << " "
              << fmt(*best.score) << "\n";
    if (rep.failed_cells() > 0) std::cerr << "warning: " << rep.failed_cells() << " cells failed\n";
  }
};

struct ToyCmd {
  ToyConfig toy;
  std::string out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("toy", "write one toy problem instance");
    app->add_option("--seed", toy.seed)->capture_default_str();
    add_toy_flags(app, toy);
    app->add_option("--out", out, "prefix for .train.csv, .val.csv, .test.csv and .meta.json")->required();
    app->callback([this] { run(); });
  }

  void run() const { write_toy(generate_toy(toy), toy, out); }
};

struct ExperimentCmd {
  ExperimentConfig cfg;
  bool fast = false, quiet = false;
  std::optional<int> instances;
  double h = kDefaultHuber, eps = kDefaultEpsilon;
  std::vector<std::string> losses;
  std::string out;
  SolverFlags solver;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand(
        "experiment",
        "repeated toy experiment: accuracy and test MSE per loss and regularizer.\n"
        "Defaults: 20 instances, k = 1..65, lambda = 1e-15..1e5.\n"
        "--fast: 5 instances, k in {1,5,10,15,20,40,65}, lambda = 1e-4..1e2.");
    app->add_flag("--fast", fast, "coarse grid for quick runs");
    app->add_option("--instances", instances);
    app->add_option("--base-seed", cfg.base_seed, "instance i uses seed base + i")->capture_default_str();
    app->add_option("--threads", cfg.threads, "0: hardware concurrency")->capture_default_str();
    app->add_option("--h", h)->capture_default_str();
    app->add_option("--eps", eps)->capture_default_str();
    app->add_option("--losses", losses, "subset of losses (default: all seven)")->delimiter(',');
    add_toy_flags(app, cfg.toy);
    solver.add(app);
    app->add_flag("--quiet", quiet, "no per-search progress on standard error");
    app->add_option("--out", out, "write <prefix>.csv and <prefix>.json");
    app->callback([this] { run(); });
  }

  void run() {
    ExperimentConfig c = fast ? ExperimentConfig::fast() : ExperimentConfig{};
    c.base_seed = cfg.base_seed;
    c.threads = cfg.threads;
    c.toy = cfg.toy;
    c.solver = solver.config();
    if (instances) c.instances = *instances;
    if (losses.empty()) {
      c.losses = ExperimentConfig::default_losses(h, eps);
    } else {
      for (const auto& name : losses) c.losses.push_back(LossSpec::make(parse_loss_kind(name), h, eps));
    }
    // Validate everything before the first grid search starts.
    if (c.instances < 1) throw ParameterError("experiment: instances must be at least 1");
    c.toy.validate();
    GridSpec probe;
    probe.k_values = c.k_values;
    probe.lambda_values = c.lambda_values;
    probe.validate(c.toy.dimensions());

    const auto table = run_experiment(c, [&](const InstanceResult& r) {
      if (quiet) return;
      std::cerr << "instance " << r.instance << " " << r.loss << " " << to_string(r.regularizer);
      if (r.failed) {
        std::cerr << " failed: " << r.error << "\n";
      } else {
        std::cerr << " k " << r.k << " lambda " << fmt(r.lambda) << " test accuracy " << fmt(r.test_accuracy)
                  << "\n";
      }
    });
    const auto csv = format_table_csv(table);
    std::cout << csv;
    if (!out.empty()) {
      write_file_atomic(out + ".csv", csv);
      write_file_atomic(out + ".json", to_json(table, c).dump(2) + "\n");
    }
  }
};

struct LossCurveCmd {
  LossFlags loss;
  std::vector<double> range;
  double step = 0.0;
  std::string out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand(
        "losscurve",
        "tabulate one loss for a single sample with x = 1.\n"
        "input is the residual y - <beta,x> for squared, eps-insensitive and absolute,\n"
        "and the margin y<beta,x> otherwise; gradient is d loss / d input.");
    loss.add(app);
    app->add_option("--range", range, "A B")->expected(2)->required();
    app->add_option("--step", step)->required();
    app->add_option("--out", out, "CSV (default: standard output)");
    app->callback([this] { run(); });
  }

  void run() const {
    const auto spec = loss.spec();
    const double a = range[0], b = range[1];
    if (!(step > 0.0) || !std::isfinite(step)) throw ParameterError("losscurve: step must be positive");
    if (!(b > a) || !std::isfinite(a) || !std::isfinite(b)) throw ParameterError("losscurve: empty range");
    const bool margin = is_classification(spec.kind);
    const auto n = static_cast<long>(std::floor((b - a) / step * (1.0 + 1e-12))) + 1;
    std::string csv = "input,loss,gradient\n";
    for (long i = 0; i < n; ++i) {
      const double t = a + static_cast<double>(i) * step;
      // Margin: target 1, score t. Residual: target 0, score -t.
      const auto e = margin ? evaluate_sample(spec, t, 1.0) : evaluate_sample(spec, -t, 0.0);
      const double g = (margin ? e.gradient[0] : -e.gradient[0]) + 0.0;  // no -0 in the output
      csv += fmt(t) + "," + fmt(e.value) + "," + fmt(g) + "\n";
    }
    if (out.empty()) {
      std::cout << csv;
    } else {
      write_file_atomic(out, csv);
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-support norm regularized learning"};
  app.set_version_flag("--version", std::string(ksupport::kVersion));
  app.require_subcommand(1);
  // --h is the Huber width, so help is long-form only (inherited by subcommands).
  app.set_help_flag("--help", "print help and exit");

  NormCmd norm;
  FitCmd fit_cmd;
  PredictCmd predict;
  GridCmd grid;
  ToyCmd toy;
  ExperimentCmd experiment;
  LossCurveCmd curve;
  norm.add(app);
  fit_cmd.add(app);
  predict.add(app);
  grid.add(app);
  toy.add(app);
  experiment.add(app);
  curve.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  } catch (const ksupport::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
