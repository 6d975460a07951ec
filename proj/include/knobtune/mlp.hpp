#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace knobtune {

struct MlpConfig {
  std::size_t hidden_units = 64;
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-7;
  std::uint64_t seed = 0;
};

/// inputs -> hidden (rectifier) -> one linear output, multiplied by
/// target_scale. The scale is fixed before training (mean |target|) and
/// leaves the percentage-error objective unchanged.
struct MlpModel {
  MlpConfig config;
  Eigen::MatrixXd w1;      // hidden x inputs
  Eigen::VectorXd b1;      // hidden
  Eigen::RowVectorXd w2;   // 1 x hidden
  double b2 = 0.0;
  double target_scale = 1.0;
  std::vector<double> loss_trace;  // full-batch loss after each epoch

  std::size_t n_inputs() const { return static_cast<std::size_t>(w1.cols()); }
};

struct MlpGradient {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::RowVectorXd w2;
  double b2 = 0.0;
};

/// Glorot-uniform weights from config.seed, zero biases.
MlpModel mlp_init(std::size_t n_inputs, const MlpConfig& config);

/// Adam on seeded mini-batches minimizing mean absolute percentage error.
/// Throws NumericalError naming the epoch if the loss becomes non-finite.
MlpModel mlp_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const MlpConfig& config = {});

Eigen::VectorXd mlp_predict(const MlpModel& model, const Eigen::MatrixXd& features);

/// 100/n * sum |y - yhat| / max(|y|, 1e-6)
double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& features, const Eigen::VectorXd& targets);
double mlp_loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                             MlpGradient& grad);

}  // namespace knobtune
