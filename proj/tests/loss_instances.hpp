#pragma once

// Random loss-evaluation instances kept away from the kinks of piecewise losses.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ksupport/losses.hpp"

namespace ksupport::testing {

struct Instance {
  Matrix X;
  Vector y;
  Vector beta;
};

// Distance from each sample's branch variable to the nearest kink of the
// piecewise definition; infinite for smooth losses.
inline double boundary_distance(const LossSpec& spec, const Instance& in) {
  const Vector s = in.X * in.beta;
  double dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double m = in.y[i] * s[i], r = in.y[i] - s[i];
    switch (spec.kind) {
      case LossKind::one_sided_squared: dist = std::min(dist, std::abs(m - 1)); break;
      case LossKind::huber_hinge:
        dist = std::min({dist, std::abs(m - 1 - spec.h), std::abs(m - 1 + spec.h)});
        break;
      case LossKind::eps_insensitive:
      case LossKind::absolute:
        for (double e : {spec.eps, -spec.eps})
          for (double h : {spec.h, -spec.h}) dist = std::min(dist, std::abs(r - e - h));
        break;
      default: break;
    }
  }
  return dist;
}

inline Instance random_instance(std::mt19937_64& rng, const LossSpec& spec, int n, int d, double beta_scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  Instance in{Matrix(n, d), Vector(n), Vector(d)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) in.X(i, j) = g(rng);
    in.y[i] = is_classification(spec.kind) ? ((rng() & 1) ? 1.0 : -1.0) : 2.0 * g(rng);
  }
  do {
    for (int j = 0; j < d; ++j) in.beta[j] = beta_scale * g(rng);
  } while (boundary_distance(spec, in) < 1e-3);
  return in;
}

}  // namespace ksupport::testing
