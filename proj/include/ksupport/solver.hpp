#pragma once

// Accelerated proximal gradient (FISTA) for
//
//   min_beta  (lambda / 2) ||beta||_k^2 + f(beta, X, y)
//
// with the fixed step 1/L taken from the loss's Lipschitz constant.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ksupport/dataset.hpp"
#include "ksupport/errors.hpp"
#include "ksupport/losses.hpp"
#include "ksupport/norms.hpp"

namespace ksupport {

struct SpectralEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Largest eigenvalue of X^T X by power iteration. X^T X is never formed;
/// each step applies X and then X^T. Starts from the all-ones vector and
/// restarts from a seeded random vector if that start lies in the null space.
inline SpectralEstimate spectral_norm_sq(const MatrixRef& X, double tol = 1e-10, int max_iter = 1000) {
  if (!X.allFinite()) throw InputError("spectral norm: non-finite entry in X");
  if (!(tol > 0.0) || max_iter < 1) throw ParameterError("spectral norm: tol > 0 and max_iter >= 1 required");
  const auto d = X.cols();
  SpectralEstimate est;
  if (d == 0 || X.isZero(0.0)) {
    est.converged = true;
    return est;
  }

  Vector v = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
  Vector w = X.transpose() * (X * v);
  if (w.norm() == 0.0) {
    std::mt19937_64 rng(0x6b737570ULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = unit(rng);
    v.normalize();
    w = X.transpose() * (X * v);
  }

  double previous = v.dot(w);
  for (int it = 1; it <= max_iter; ++it) {
    const double wn = w.norm();
    if (wn == 0.0) break;
    v = w / wn;
    w = X.transpose() * (X * v);
    const double rayleigh = v.dot(w);
    est.value = rayleigh;
    est.iterations = it;
    if (std::abs(rayleigh - previous) <= tol * std::abs(rayleigh)) {
      est.converged = true;
      break;
    }
    previous = rayleigh;
  }
  return est;
}

struct SolverConfig {
  int max_iter = 10000;
  /// Stop once |obj_t - obj_{t-1}| <= tol * max(1, |obj_{t-1}|).
  double tol = 1e-8;
  std::optional<double> lipschitz_override;
  double exp_lipschitz_factor = kDefaultExponentialLipschitzFactor;
  bool record_trace = false;

  void validate() const {
    if (max_iter < 1) throw ParameterError("solver: max_iter must be at least 1");
    if (!(tol > 0.0)) throw ParameterError("solver: tol must be positive");
    if (lipschitz_override && !(*lipschitz_override > 0.0 && std::isfinite(*lipschitz_override)))
      throw ParameterError("solver: lipschitz override must be positive");
    if (!(exp_lipschitz_factor > 0.0)) throw ParameterError("solver: exponential Lipschitz factor must be positive");
  }
};

struct FitResult {
  Vector beta;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double lipschitz = 0.0;
  std::vector<double> trace;  // objective of each iterate, when requested
};

/// The loss blew up (exponential loss past the clamp). Carries the offending iterate.
class SolverDivergence : public Error {
 public:
  SolverDivergence(const std::string& what, Vector iterate, int iteration)
      : Error(what), iterate_(std::move(iterate)), iteration_(iteration) {}
  const Vector& iterate() const noexcept { return iterate_; }
  int iteration() const noexcept { return iteration_; }

 private:
  Vector iterate_;
  int iteration_;
};

inline double regularizer(const VectorRef& beta, int k, double lambda) {
  return lambda == 0.0 ? 0.0 : 0.5 * lambda * ksup_norm_squared(beta, k);
}

/// (lambda / 2) ||beta||_k^2 + f(beta, X, y).
inline double objective(const VectorRef& beta, const Dataset& data, const LossSpec& spec, int k,
                        double lambda) {
  return regularizer(beta, k, lambda) + loss_value(spec, beta, data.X, data.y);
}

namespace detail {

inline void check_fit_inputs(const Dataset& data, const LossSpec& spec, int k, double lambda,
                             const SolverConfig& cfg) {
  data.validate();
  spec.validate();
  cfg.validate();
  check_k(k, data.features());
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ParameterError("fit: lambda must be nonnegative and finite");
  if (is_classification(spec.kind) && data.target_kind != TargetKind::binary) {
    for (Eigen::Index i = 0; i < data.y.size(); ++i)
      if (data.y[i] != 1.0 && data.y[i] != -1.0)
        throw InputError("fit: loss " + std::string(to_string(spec.kind)) + " needs -1/+1 targets");
  }
}

}  // namespace detail

/// Accelerated proximal gradient from beta = 0 with momentum (t-1)/(t+2).
/// Returns the iterate with the lowest objective seen.
inline FitResult fit(const Dataset& data, const LossSpec& spec, int k, double lambda,
                     const SolverConfig& cfg = {}) {
  detail::check_fit_inputs(data, spec, k, lambda, cfg);
  const auto d = data.features();

  FitResult result;
  result.lipschitz = cfg.lipschitz_override
                         ? *cfg.lipschitz_override
                         : lipschitz_constant(spec, spectral_norm_sq(data.X).value, cfg.exp_lipschitz_factor);
  const double L = result.lipschitz;

  Vector beta_prev = Vector::Zero(d);
  Vector alpha = Vector::Zero(d);
  double obj_prev = objective(beta_prev, data, spec, k, lambda);
  double best_obj = std::numeric_limits<double>::infinity();
  if (cfg.record_trace) result.trace.reserve(static_cast<std::size_t>(std::min(cfg.max_iter, 100000)));

  for (int t = 1; t <= cfg.max_iter; ++t) {
    const auto ev = evaluate_loss(spec, alpha, data.X, data.y);
    if (ev.diverged) throw SolverDivergence("fit: loss diverged at iteration " + std::to_string(t), alpha, t);

    const Vector step = alpha - ev.gradient / L;
    Vector beta = lambda > 0.0 ? prox_ksup_sq(step, k, lambda / L) : step;

    const double obj = objective(beta, data, spec, k, lambda);
    if (!std::isfinite(obj))
      throw SolverDivergence("fit: objective diverged at iteration " + std::to_string(t), beta, t);
    if (cfg.record_trace) result.trace.push_back(obj);
    result.iterations = t;
    if (obj < best_obj) {
      best_obj = obj;
      result.beta = beta;
    }

    alpha = beta + (static_cast<double>(t - 1) / static_cast<double>(t + 2)) * (beta - beta_prev);
    beta_prev = std::move(beta);

    if (std::abs(obj - obj_prev) <= cfg.tol * std::max(1.0, std::abs(obj_prev))) {
      result.converged = true;
      break;
    }
    obj_prev = obj;
  }
  result.objective = best_obj;
  return result;
}

}  // namespace ksupport
