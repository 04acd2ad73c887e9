#pragma once

// k-support norm of a vector and the proximal operator of its square.
//
// For a vector b with magnitudes sorted as z_1 >= z_2 >= ... >= z_d,
//
//   ||b||_k^2 = sum_{i=1}^{k-r-1} z_i^2 + (1/(r+1)) (sum_{i=k-r}^{d} z_i)^2
//
// where r in {0, ..., k-1} is the unique integer with
//
//   z_{k-r-1} > (1/(r+1)) sum_{i=k-r}^{d} z_i >= z_{k-r}.
//
// The left condition is vacuous for r = k-1 (z_0 = +inf).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ksupport/errors.hpp"

namespace ksupport {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;
using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;

/// Relative tolerance used for the order comparisons that select r.
inline constexpr double kRTolerance = 1e-12;

namespace detail {

inline bool greater_tol(double a, double b) {
  return a > b - kRTolerance * std::max(std::abs(a), std::abs(b));
}

inline bool greater_equal_tol(double a, double b) {
  return a >= b - kRTolerance * std::max(std::abs(a), std::abs(b));
}

inline void check_k(std::ptrdiff_t k, std::ptrdiff_t d) {
  if (d < 1) throw ParameterError("k-support norm: vector must have at least one entry");
  if (k < 1 || k > d)
    throw ParameterError("k-support norm: k = " + std::to_string(k) + " outside [1, " +
                         std::to_string(d) + "]");
}

inline void check_finite(const VectorRef& v, const char* what) {
  if (!v.allFinite()) throw InputError(std::string(what) + ": non-finite entry");
}

// Indices of v ordered by magnitude, largest first; equal magnitudes keep
// their original order.
inline std::vector<Eigen::Index> magnitude_order(const VectorRef& v) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(v.size()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::stable_sort(perm.begin(), perm.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(v[a]) > std::abs(v[b]);
  });
  return perm;
}

}  // namespace detail

/// Returns the unique r in {0, ..., k-1} splitting sorted magnitudes into the
/// head (squared individually) and the averaged tail. The scan runs from r = 0
/// upward and the first r passing both comparisons (at relative tolerance
/// kRTolerance) wins. An all-zero input yields k - 1.
inline int find_r(std::span<const double> sorted_abs, int k) {
  const auto d = static_cast<std::ptrdiff_t>(sorted_abs.size());
  detail::check_k(k, d);
  if (std::all_of(sorted_abs.begin(), sorted_abs.end(), [](double z) { return z == 0.0; }))
    return k - 1;

  // tail = sum_{i=k-r}^{d} z_i (1-based), grown by one element per step of r.
  double tail = 0.0;
  for (std::ptrdiff_t i = d - 1; i >= k - 1; --i) tail += sorted_abs[i];

  for (int r = 0; r < k; ++r) {
    if (r > 0) tail += sorted_abs[k - r - 1];
    const double avg = tail / (r + 1);
    const bool left = (k - r - 1 == 0) || detail::greater_tol(sorted_abs[k - r - 2], avg);
    const bool right = detail::greater_equal_tol(avg, sorted_abs[k - r - 1]);
    if (left && right) return r;
  }
  // Unreachable for valid input: r = k-1 always satisfies the vacuous left
  // condition and the tail average of k values dominates the smallest of them.
  return k - 1;
}

/// Sorted-magnitude view of a vector with the split index r and the two sums
/// that make up the squared norm.
struct KSupportDecomposition {
  int k = 1;
  int r = 0;
  std::vector<double> sorted_abs;
  std::vector<Eigen::Index> perm;  // sorted position -> original index
  std::vector<int> signs;          // sign of beta at each original index (+1 for zero)
  double head_sq_sum = 0.0;
  double tail_sum = 0.0;

  double norm_squared() const { return head_sq_sum + tail_sum * tail_sum / (r + 1); }
  double norm() const { return std::sqrt(norm_squared()); }

  /// Rebuilds the original vector from the sorted magnitudes.
  Vector reconstruct() const {
    Vector out(static_cast<Eigen::Index>(sorted_abs.size()));
    for (std::size_t i = 0; i < sorted_abs.size(); ++i)
      out[perm[i]] = signs[static_cast<std::size_t>(perm[i])] * sorted_abs[i];
    return out;
  }
};

inline KSupportDecomposition decompose(const VectorRef& beta, int k) {
  const auto d = beta.size();
  detail::check_k(k, d);
  detail::check_finite(beta, "k-support norm");

  KSupportDecomposition dec;
  dec.k = k;
  dec.perm = detail::magnitude_order(beta);
  dec.sorted_abs.resize(static_cast<std::size_t>(d));
  dec.signs.resize(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    dec.sorted_abs[static_cast<std::size_t>(i)] = std::abs(beta[dec.perm[static_cast<std::size_t>(i)]]);
    dec.signs[static_cast<std::size_t>(i)] = beta[i] < 0 ? -1 : 1;
  }
  dec.r = find_r(dec.sorted_abs, k);

  const int head = k - dec.r - 1;
  for (int i = 0; i < head; ++i) dec.head_sq_sum += dec.sorted_abs[i] * dec.sorted_abs[i];
  for (std::ptrdiff_t i = head; i < d; ++i) dec.tail_sum += dec.sorted_abs[i];
  return dec;
}

/// k-support norm. k = 1 gives the l1 norm, k = d the l2 norm.
inline double ksup_norm(const VectorRef& beta, int k) {
  detail::check_k(k, beta.size());
  detail::check_finite(beta, "k-support norm");
  if (beta.isZero(0.0)) return 0.0;
  return decompose(beta, k).norm();
}

/// Squared k-support norm; avoids the sqrt/square round trip of ksup_norm.
inline double ksup_norm_squared(const VectorRef& beta, int k) {
  detail::check_k(k, beta.size());
  detail::check_finite(beta, "k-support norm");
  if (beta.isZero(0.0)) return 0.0;
  return decompose(beta, k).norm_squared();
}

/// Proximal operator of the squared k-support norm:
///
///   argmin_x  0.5 ||x - v||^2 + (tau / 2) ||x||_k^2.
///
/// Works on sorted magnitudes z of v. The minimizer q keeps the order of z and
/// has three blocks: a ridge-shrunk head q_i = z_i / (1 + tau) for
/// i < k - r, a shifted middle q_i = z_i - theta for k - r <= i <= l, and
/// zeros after l. With T = sum_{i=k-r}^{l} z_i and m = l - k + r + 1,
///
///   theta = tau T / (r + 1 + tau m),
///
/// and (r, l) is the pair for which the head/middle boundary satisfies the
/// norm's split condition and the middle/zero boundary satisfies
/// z_l > theta >= z_{l+1}. The search is over r in [0, k), l in [k, d].
inline Vector prox_ksup_sq(const VectorRef& v, int k, double tau) {
  const auto d = v.size();
  detail::check_k(k, d);
  detail::check_finite(v, "k-support prox");
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw ParameterError("k-support prox: tau must be positive and finite");

  if (v.isZero(0.0)) return Vector::Zero(d);

  const auto perm = detail::magnitude_order(v);
  std::vector<double> z(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) z[static_cast<std::size_t>(i)] = std::abs(v[perm[static_cast<std::size_t>(i)]]);

  const auto nnz = std::count_if(z.begin(), z.end(), [](double a) { return a > 0.0; });
  if (nnz <= k) return v / (1.0 + tau);

  // prefix[i] = z_1 + ... + z_i (1-based), so sum_{a..b} = prefix[b] - prefix[a-1].
  std::vector<double> prefix(static_cast<std::size_t>(d) + 1, 0.0);
  for (std::size_t i = 0; i < z.size(); ++i) prefix[i + 1] = prefix[i] + z[i];
  auto z1 = [&](std::ptrdiff_t i) { return z[static_cast<std::size_t>(i - 1)]; };

  auto build = [&](int r, std::ptrdiff_t l, double theta) {
    std::vector<double> q(static_cast<std::size_t>(d), 0.0);
    for (std::ptrdiff_t i = 1; i <= k - r - 1; ++i) q[i - 1] = z1(i) / (1.0 + tau);
    for (std::ptrdiff_t i = k - r; i <= l; ++i) q[i - 1] = std::max(z1(i) - theta, 0.0);
    return q;
  };
  auto restore = [&](const std::vector<double>& q) {
    Vector x = Vector::Zero(d);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const auto idx = perm[i];
      x[idx] = v[idx] < 0 ? -q[i] : q[i];
    }
    return x;
  };

  for (int r = 0; r < k; ++r) {
    for (std::ptrdiff_t l = k; l <= d; ++l) {
      const double total = prefix[l] - prefix[k - r - 1];
      const double m = static_cast<double>(l - k + r + 1);
      const double avg = total / (r + 1 + tau * m);  // theta / tau
      const double theta = tau * avg;
      const double split = (1.0 + tau) * avg;
      const bool left = (k - r - 1 == 0) || detail::greater_tol(z1(k - r - 1), split);
      const bool right = detail::greater_equal_tol(split, z1(k - r));
      const bool last_positive = detail::greater_tol(z1(l), theta);
      const bool next_zero = (l == d) || detail::greater_equal_tol(theta, z1(l + 1));
      if (left && right && last_positive && next_zero) return restore(build(r, l, theta));
    }
  }

  // Rounding pushed every candidate just outside its conditions. Take the
  // candidate with the lowest objective.
  double best_obj = std::numeric_limits<double>::infinity();
  Vector best = v / (1.0 + tau);
  for (int r = 0; r < k; ++r) {
    for (std::ptrdiff_t l = k; l <= d; ++l) {
      const double total = prefix[l] - prefix[k - r - 1];
      const double theta = tau * total / (r + 1 + tau * static_cast<double>(l - k + r + 1));
      const Vector x = restore(build(r, l, theta));
      const double obj = 0.5 * (x - v).squaredNorm() + 0.5 * tau * ksup_norm_squared(x, k);
      if (obj < best_obj) {
        best_obj = obj;
        best = x;
      }
    }
  }
  return best;
}

}  // namespace ksupport
