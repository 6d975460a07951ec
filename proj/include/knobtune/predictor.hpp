#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "knobtune/forest.hpp"
#include "knobtune/gpr.hpp"
#include "knobtune/ingest.hpp"
#include "knobtune/mlp.hpp"
#include "knobtune/scaler.hpp"

namespace knobtune {

enum class PredictorKind { gpr, rf, nn };

std::string_view to_string(PredictorKind kind);
PredictorKind parse_predictor_kind(std::string_view name);

struct PredictorConfig {
  PredictorKind kind = PredictorKind::gpr;
  double alpha = 1e-1;
  std::size_t trees = 200;
  std::size_t depth = 50;
  std::size_t hidden = 64;
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

/// fit(features, targets) then predict(features): the contract shared by
/// the three latency models. Features are already scaled; targets are raw
/// milliseconds.
class Predictor {
 public:
  using Model = std::variant<std::monostate, GprModel, RfModel, MlpModel>;

  explicit Predictor(PredictorConfig config = {});

  void fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets);
  /// Throws UsageError before fit.
  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;

  bool fitted() const { return !std::holds_alternative<std::monostate>(model_); }
  const PredictorConfig& config() const { return config_; }
  const Model& model() const { return model_; }

  static Predictor from_model(PredictorConfig config, Model model);

 private:
  PredictorConfig config_;
  Model model_;
};

/// A predictor bundled with the feature layout and scaler it was trained with.
struct TrainedModel {
  FeatureLayout layout;
  StandardScaler scaler;
  Predictor predictor;

  Eigen::VectorXd predict(std::span<const Observation> rows) const;
};

inline constexpr int kModelFormatVersion = 1;

/// JSON container with a `format_version` field; doubles round-trip exactly.
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view text);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace knobtune
