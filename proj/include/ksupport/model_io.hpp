#pragma once

// JSON persistence of fitted models and toy-problem metadata.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ksupport/data.hpp"
#include "ksupport/errors.hpp"
#include "ksupport/fileio.hpp"
#include "ksupport/losses.hpp"
#include "ksupport/solver.hpp"
#include "ksupport/version.hpp"

namespace ksupport {

/// A fitted coefficient vector together with how it was obtained.
struct Model {
  Vector beta;
  int k = 1;
  double lambda = 0.0;
  LossSpec loss;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string version = kVersion;

  static Model from_fit(const FitResult& fit, const LossSpec& loss, int k, double lambda) {
    return Model{fit.beta, k, lambda, loss, fit.objective, fit.iterations, fit.converged, kVersion};
  }
};

inline nlohmann::json to_json(const Model& m) {
  nlohmann::json j;
  j["beta"] = std::vector<double>(m.beta.data(), m.beta.data() + m.beta.size());
  j["k"] = m.k;
  j["lambda"] = m.lambda;
  j["loss"] = std::string(to_string(m.loss.kind));
  const auto h = m.loss.huber();
  const auto eps = m.loss.epsilon();
  j["h"] = h ? nlohmann::json(*h) : nlohmann::json(nullptr);
  j["eps"] = eps ? nlohmann::json(*eps) : nlohmann::json(nullptr);
  j["objective"] = m.objective;
  j["iterations"] = m.iterations;
  j["converged"] = m.converged;
  j["version"] = m.version;
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    Model m;
    const auto beta = j.at("beta").get<std::vector<double>>();
    m.beta = Eigen::Map<const Vector>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    m.k = j.at("k").get<int>();
    m.lambda = j.at("lambda").get<double>();
    const auto kind = parse_loss_kind(j.at("loss").get<std::string>());
    const double h = j.contains("h") && !j["h"].is_null() ? j["h"].get<double>() : kDefaultHuber;
    const double eps = j.contains("eps") && !j["eps"].is_null() ? j["eps"].get<double>() : kDefaultEpsilon;
    m.loss = LossSpec::make(kind, h, eps);
    m.objective = j.at("objective").get<double>();
    m.iterations = j.at("iterations").get<int>();
    m.converged = j.at("converged").get<bool>();
    m.version = j.value("version", std::string());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model json: ") + e.what());
  }
}

inline void write_model(const Model& m, const std::filesystem::path& path) {
  write_file_atomic(path, to_json(m).dump(2) + "\n");
}

inline Model read_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

inline nlohmann::json to_json(const ToyConfig& cfg) {
  return {{"d_signal", cfg.d_signal},         {"d_noise", cfg.d_noise},
          {"n_train", cfg.n_train},           {"n_val", cfg.n_val},
          {"n_test", cfg.n_test},             {"signal_sigma", cfg.signal_sigma},
          {"noise_sigma", cfg.noise_sigma},   {"background_sigma", cfg.background_sigma},
          {"seed", cfg.seed}};
}

/// Writes <prefix>.train.csv, <prefix>.val.csv, <prefix>.test.csv and
/// <prefix>.meta.json (config plus the signal vector w).
inline void write_toy(const ToyProblem& toy, const ToyConfig& cfg, const std::string& prefix) {
  write_csv(toy.train, prefix + ".train.csv");
  write_csv(toy.val, prefix + ".val.csv");
  write_csv(toy.test, prefix + ".test.csv");
  nlohmann::json meta;
  meta["config"] = to_json(cfg);
  meta["w"] = std::vector<double>(toy.w.data(), toy.w.data() + toy.w.size());
  meta["version"] = kVersion;
  write_file_atomic(prefix + ".meta.json", meta.dump(2) + "\n");
}

}  // namespace ksupport
