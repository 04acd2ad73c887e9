#pragma once

// Dataset I/O, prediction and the synthetic correlated-signal problem.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ksupport/dataset.hpp"
#include "ksupport/errors.hpp"
#include "ksupport/fileio.hpp"
#include "ksupport/norms.hpp"

namespace ksupport {

// ---------------------------------------------------------------------------
// Prediction

inline Vector predict_scores(const VectorRef& beta, const MatrixRef& X) {
  if (X.cols() != beta.size())
    throw InputError("predict: X has " + std::to_string(X.cols()) + " columns but beta has " +
                     std::to_string(beta.size()) + " entries");
  return X * beta;
}

/// sign(score), with a zero score mapped to +1.
inline Vector classify(const VectorRef& scores) {
  Vector labels(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) labels[i] = scores[i] < 0.0 ? -1.0 : 1.0;
  return labels;
}

// ---------------------------------------------------------------------------
// Random numbers
//
// Draws come from std::mt19937_64, whose output sequence is fixed by the
// standard. Uniforms take the top 53 bits; normals use the Marsaglia polar
// method. Both are spelled out here because the std distributions are
// implementation-defined.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

  /// -1 or +1 with equal probability (top bit of one engine draw).
  double sign() { return (engine_() >> 63) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Toy problem

struct ToyConfig {
  int d_signal = 15;
  int d_noise = 50;
  int n_train = 50;
  int n_val = 50;
  int n_test = 250;
  double signal_sigma = 1.0;
  double noise_sigma = 1.0;
  double background_sigma = 1.0;
  std::uint64_t seed = 0;

  int dimensions() const { return d_signal + d_noise; }

  void validate() const {
    if (d_signal < 0 || d_noise < 0 || d_signal + d_noise < 1)
      throw ParameterError("toy: need at least one feature and no negative counts");
    if (n_train < 1 || n_val < 1 || n_test < 1) throw ParameterError("toy: sample counts must be positive");
    if (!(signal_sigma >= 0.0) || !(noise_sigma >= 0.0) || !(background_sigma >= 0.0))
      throw ParameterError("toy: standard deviations must be nonnegative");
  }
};

struct ToyProblem {
  Dataset train;
  Dataset val;
  Dataset test;
  Vector w;  // shared signal direction
};

/// Binary problem whose first d_signal features carry y * w plus noise and
/// whose remaining d_noise features are pure noise.
///
/// Stream order for one seed: w (d_signal normals), then the train, val and
/// test samples. Each sample draws its label, then d_signal noise normals,
/// then d_noise background normals.
inline ToyProblem generate_toy(const ToyConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int d = cfg.dimensions();

  ToyProblem out;
  out.w.resize(cfg.d_signal);
  for (int j = 0; j < cfg.d_signal; ++j) out.w[j] = cfg.signal_sigma * rng.normal();

  auto draw = [&](int n) {
    Matrix X(n, d);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      y[i] = rng.sign();
      for (int j = 0; j < cfg.d_signal; ++j) X(i, j) = y[i] * out.w[j] + cfg.noise_sigma * rng.normal();
      for (int j = cfg.d_signal; j < d; ++j) X(i, j) = cfg.background_sigma * rng.normal();
    }
    return Dataset::make(std::move(X), std::move(y), TargetKind::binary);
  };
  out.train = draw(cfg.n_train);
  out.val = draw(cfg.n_val);
  out.test = draw(cfg.n_test);
  return out;
}

// ---------------------------------------------------------------------------
// CSV: comma separated, no quoting, last column is the target.

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view cell, long row, long col) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
    throw ParseError("not a number: '" + std::string(cell) + "'", row, col);
  if (!std::isfinite(value)) throw ParseError("non-finite value", row, col);
  return value;
}

inline std::vector<std::vector<double>> parse_rows(std::string_view text, bool has_header) {
  std::vector<std::vector<double>> rows;
  long line_no = 0;
  bool header_pending = has_header;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::vector<double> row;
    std::size_t start = 0;
    long col = 1;
    while (true) {
      const auto comma = line.find(',', start);
      const auto cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      row.push_back(parse_double(cell, line_no, col));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
      ++col;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("ragged row: expected " + std::to_string(rows.front().size()) + " columns, got " +
                           std::to_string(row.size()),
                       line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty file: no data rows");
  return rows;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline Dataset parse_csv(std::string_view text, bool has_header, TargetKind kind) {
  const auto rows = detail::parse_rows(text, has_header);
  const auto cols = rows.front().size();
  if (cols < 2) throw ParseError("need at least one feature column and a target column", 1);
  Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols - 1));
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j + 1 < cols; ++j) X(i, j) = rows[i][j];
    y[i] = rows[i][cols - 1];
  }
  return Dataset::make(std::move(X), std::move(y), kind);
}

inline Dataset read_csv(const std::filesystem::path& path, bool has_header, TargetKind kind) {
  try {
    return parse_csv(read_file(path), has_header, kind);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline std::string format_csv(const Dataset& data) {
  std::string out;
  for (Eigen::Index i = 0; i < data.samples(); ++i) {
    for (Eigen::Index j = 0; j < data.features(); ++j) {
      out += detail::format_double(data.X(i, j));
      out += ',';
    }
    out += detail::format_double(data.y[i]);
    out += '\n';
  }
  return out;
}

inline void write_csv(const Dataset& data, const std::filesystem::path& path) {
  write_file_atomic(path, format_csv(data));
}

/// Reads a vector stored as one CSV row (or one value per row).
inline Vector read_vector_csv(const std::filesystem::path& path) {
  const auto rows = detail::parse_rows(read_file(path), false);
  std::vector<double> flat;
  if (rows.size() == 1) {
    flat = rows.front();
  } else {
    for (const auto& row : rows) {
      if (row.size() != 1) throw ParseError(path.string() + ": expected a single row or a single column");
      flat.push_back(row.front());
    }
  }
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

}  // namespace ksupport
