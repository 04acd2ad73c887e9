#pragma once

// Smooth(ed) convex losses for regularized risk minimization. Every loss is a
// sum over samples of a function of the score s_i = <beta, x_i>, so the
// gradient is X^T c for a per-sample coefficient vector c.
//
// Piecewise losses test the closed quadratic branch (|.| <= h) first, so
// boundary points always land on it.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "ksupport/errors.hpp"
#include "ksupport/norms.hpp"

namespace ksupport {

enum class LossKind {
  squared,
  one_sided_squared,
  huber_hinge,
  logistic,
  exponential,
  eps_insensitive,
  absolute,
};

inline constexpr std::array<LossKind, 7> kAllLossKinds = {
    LossKind::squared,     LossKind::one_sided_squared, LossKind::huber_hinge,
    LossKind::logistic,    LossKind::exponential,       LossKind::absolute,
    LossKind::eps_insensitive,
};

inline constexpr double kDefaultHuber = 0.1;
inline constexpr double kDefaultEpsilon = 1.0;
inline constexpr double kDefaultExponentialLipschitzFactor = 50.0;
/// Exponents above this are clamped and the evaluation is flagged as diverged.
inline constexpr double kExponentClamp = 500.0;
inline constexpr double kLipschitzFloor = 1e-12;

inline std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::squared: return "squared";
    case LossKind::one_sided_squared: return "one-sided-squared";
    case LossKind::huber_hinge: return "hinge";
    case LossKind::logistic: return "logistic";
    case LossKind::exponential: return "exponential";
    case LossKind::eps_insensitive: return "eps-insensitive";
    case LossKind::absolute: return "absolute";
  }
  return "unknown";
}

inline LossKind parse_loss_kind(std::string_view name) {
  for (auto kind : kAllLossKinds)
    if (to_string(kind) == name) return kind;
  throw ParameterError("unknown loss '" + std::string(name) +
                       "' (expected squared, one-sided-squared, hinge, logistic, exponential, "
                       "eps-insensitive or absolute)");
}

/// Losses defined on margins y_i <beta, x_i>; these need y in {-1, +1}.
inline constexpr bool is_classification(LossKind kind) {
  return kind == LossKind::one_sided_squared || kind == LossKind::huber_hinge ||
         kind == LossKind::logistic || kind == LossKind::exponential;
}

inline constexpr bool uses_huber(LossKind kind) {
  return kind == LossKind::huber_hinge || kind == LossKind::eps_insensitive ||
         kind == LossKind::absolute;
}

inline constexpr bool uses_epsilon(LossKind kind) {
  return kind == LossKind::eps_insensitive || kind == LossKind::absolute;
}

struct LossSpec {
  LossKind kind = LossKind::squared;
  double h = kDefaultHuber;
  double eps = kDefaultEpsilon;

  /// Builds a validated spec. Parameters a kind does not use are normalized
  /// (absolute always carries eps = 0).
  static LossSpec make(LossKind kind, double h = kDefaultHuber, double eps = kDefaultEpsilon) {
    LossSpec spec{kind, h, eps};
    if (kind == LossKind::absolute) spec.eps = 0.0;
    spec.validate();
    return spec;
  }

  void validate() const {
    if (uses_huber(kind) && !(h > 0.0 && std::isfinite(h)))
      throw ParameterError("loss " + std::string(to_string(kind)) + ": h must be positive");
    if (kind == LossKind::eps_insensitive && !(eps >= 0.0 && std::isfinite(eps)))
      throw ParameterError("loss eps-insensitive: eps must be nonnegative");
    if (kind == LossKind::absolute && eps != 0.0)
      throw ParameterError("loss absolute: eps is fixed at 0");
  }

  std::optional<double> huber() const { return uses_huber(kind) ? std::optional(h) : std::nullopt; }
  std::optional<double> epsilon() const {
    return uses_epsilon(kind) ? std::optional(eps) : std::nullopt;
  }

  /// Classification-only consistency condition for the smoothed eps-insensitive
  /// loss (eps - h < 1). Advisory; nothing enforces it.
  bool consistency_warning() const { return kind == LossKind::eps_insensitive && eps - h >= 1.0; }
};

struct LossEvaluation {
  double value = 0.0;
  Vector gradient;
  /// Exponential loss only: some exponent exceeded kExponentClamp. value is +inf.
  bool diverged = false;
};

namespace detail {

inline void check_loss_inputs(const LossSpec& spec, const VectorRef& beta, const MatrixRef& X,
                              const VectorRef& y) {
  spec.validate();
  if (X.cols() != beta.size())
    throw InputError("loss: X has " + std::to_string(X.cols()) + " columns but beta has " +
                     std::to_string(beta.size()) + " entries");
  if (X.rows() != y.size())
    throw InputError("loss: X has " + std::to_string(X.rows()) + " rows but y has " +
                     std::to_string(y.size()) + " entries");
  if (!beta.allFinite()) throw InputError("loss: non-finite entry in beta");
  if (is_classification(spec.kind)) {
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y[i] != 1.0 && y[i] != -1.0)
        throw InputError("loss " + std::string(to_string(spec.kind)) +
                         ": targets must be -1 or +1 (sample " + std::to_string(i) + ")");
  }
}

struct SampleTerm {
  double value;
  double coef;  // d value / d score
};

// One Huber-smoothed hinge component on the variable u with kink at 0:
// 0 for u < -h, (u + h)^2 / (4h) for |u| <= h, u for u > h.
inline SampleTerm huber_ramp(double u, double h) {
  if (std::abs(u) <= h) return {(u + h) * (u + h) / (4.0 * h), (u + h) / (2.0 * h)};
  if (u > h) return {u, 1.0};
  return {0.0, 0.0};
}

inline SampleTerm sample_term(const LossSpec& spec, double score, double target, bool& diverged) {
  switch (spec.kind) {
    case LossKind::squared: {
      const double res = score - target;
      return {res * res, 2.0 * res};
    }
    case LossKind::one_sided_squared: {
      const double margin = target * score;
      if (margin > 1.0) return {0.0, 0.0};
      const double slack = 1.0 - margin;
      return {slack * slack, 2.0 * score - 2.0 * target};
    }
    case LossKind::huber_hinge: {
      const double margin = target * score;
      const double h = spec.h;
      if (std::abs(1.0 - margin) <= h) {
        const double gap = 1.0 + h - margin;
        return {gap * gap / (4.0 * h), (score - (1.0 + h) * target) / (2.0 * h)};
      }
      if (margin > 1.0 + h) return {0.0, 0.0};
      return {1.0 - margin, -target};
    }
    case LossKind::logistic: {
      const double a = -target * score;
      // log(1 + e^a) and e^a / (1 + e^a) without overflow.
      const double value = a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
      const double sigmoid = a > 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
      return {value, -sigmoid * target};
    }
    case LossKind::exponential: {
      double a = -target * score;
      if (a > kExponentClamp) {
        diverged = true;
        a = kExponentClamp;
      }
      const double e = std::exp(a);
      return {e, -e * target};
    }
    case LossKind::eps_insensitive:
    case LossKind::absolute: {
      // Residual r = y - s. Lower component penalizes r < -eps, upper r > eps.
      const double res = target - score;
      const auto lower = huber_ramp(-res - spec.eps, spec.h);
      const auto upper = huber_ramp(res - spec.eps, spec.h);
      // d/ds of lower is +lower.coef, of upper is -upper.coef.
      return {lower.value + upper.value, lower.coef - upper.coef};
    }
  }
  return {0.0, 0.0};
}

}  // namespace detail

/// Value and gradient in one pass over the samples. Per-sample terms are
/// accumulated in sample order.
inline LossEvaluation evaluate_loss(const LossSpec& spec, const VectorRef& beta, const MatrixRef& X,
                                    const VectorRef& y) {
  detail::check_loss_inputs(spec, beta, X, y);
  const Vector scores = X * beta;
  Vector coef(scores.size());
  LossEvaluation out;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const auto term = detail::sample_term(spec, scores[i], y[i], out.diverged);
    out.value += term.value;
    coef[i] = term.coef;
  }
  out.gradient = X.transpose() * coef;
  if (out.diverged) out.value = std::numeric_limits<double>::infinity();
  return out;
}

inline double loss_value(const LossSpec& spec, const VectorRef& beta, const MatrixRef& X,
                         const VectorRef& y) {
  detail::check_loss_inputs(spec, beta, X, y);
  const Vector scores = X * beta;
  bool diverged = false;
  double value = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    value += detail::sample_term(spec, scores[i], y[i], diverged).value;
  return diverged ? std::numeric_limits<double>::infinity() : value;
}

inline Vector loss_gradient(const LossSpec& spec, const VectorRef& beta, const MatrixRef& X,
                            const VectorRef& y) {
  return evaluate_loss(spec, beta, X, y).gradient;
}

/// Loss and derivative of a single sample as a function of its score; used to
/// draw loss curves.
inline LossEvaluation evaluate_sample(const LossSpec& spec, double score, double target) {
  spec.validate();
  bool diverged = false;
  const auto term = detail::sample_term(spec, score, target, diverged);
  LossEvaluation out;
  out.value = diverged ? std::numeric_limits<double>::infinity() : term.value;
  out.gradient = Vector::Constant(1, term.coef);
  out.diverged = diverged;
  return out;
}

/// Lipschitz constant of the loss gradient given gamma = lambda_max(X^T X).
/// The exponential loss has no global constant; exp_factor * gamma is a
/// heuristic that callers may override.
inline double lipschitz_constant(const LossSpec& spec, double gamma,
                                 double exp_factor = kDefaultExponentialLipschitzFactor) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw ParameterError("lipschitz constant: gamma must be nonnegative and finite");
  spec.validate();
  double L = 0.0;
  switch (spec.kind) {
    case LossKind::squared:
    case LossKind::one_sided_squared: L = 2.0 * gamma; break;
    case LossKind::huber_hinge: L = gamma / (2.0 * spec.h); break;
    case LossKind::logistic: L = gamma / 4.0; break;
    case LossKind::exponential: L = exp_factor * gamma; break;
    // Two hinge components; their curvatures add where they overlap.
    case LossKind::eps_insensitive:
    case LossKind::absolute: L = gamma / spec.h; break;
  }
  return std::max(L, kLipschitzFloor);
}

}  // namespace ksupport
