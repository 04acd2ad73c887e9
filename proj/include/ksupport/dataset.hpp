#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "ksupport/errors.hpp"

namespace ksupport {

enum class TargetKind { binary, real };

inline std::string_view to_string(TargetKind kind) {
  return kind == TargetKind::binary ? "binary" : "real";
}

inline TargetKind parse_target_kind(std::string_view name) {
  if (name == "binary") return TargetKind::binary;
  if (name == "real") return TargetKind::real;
  throw ParameterError("unknown target kind '" + std::string(name) + "' (expected binary or real)");
}

/// Design matrix (one sample per row) with its targets. Construct through
/// make() to get the invariants checked.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  TargetKind target_kind = TargetKind::real;

  static Dataset make(Eigen::MatrixXd X, Eigen::VectorXd y, TargetKind kind) {
    Dataset ds{std::move(X), std::move(y), kind};
    ds.validate();
    return ds;
  }

  Eigen::Index samples() const { return X.rows(); }
  Eigen::Index features() const { return X.cols(); }

  void validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw InputError("dataset: needs at least one sample and one feature");
    if (X.rows() != y.size())
      throw InputError("dataset: " + std::to_string(X.rows()) + " rows but " +
                       std::to_string(y.size()) + " targets");
    if (!X.allFinite() || !y.allFinite()) throw InputError("dataset: non-finite entry");
    if (target_kind == TargetKind::binary) {
      for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y[i] != 1.0 && y[i] != -1.0)
          throw InputError("dataset: binary target must be -1 or +1 (sample " + std::to_string(i + 1) + ")");
    }
  }
};

}  // namespace ksupport
