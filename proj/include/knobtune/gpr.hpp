#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace knobtune {

// Gaussian process regression with an RBF kernel
//   k(x, x') = signal_variance * exp(-|x - x'|^2 / (2 length_scale^2))
// and alpha added to the training kernel diagonal. Targets are centered
// before fitting; the mean is added back at prediction time.

struct GprModel {
  double alpha = 0.0;            // diagonal noise actually used (may exceed the request)
  double requested_alpha = 0.0;
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double target_mean = 0.0;
  double log_marginal_likelihood = 0.0;
  Eigen::MatrixXd training_inputs;   // n x d
  Eigen::VectorXd training_targets;  // centered
  Eigen::MatrixXd cholesky_factor;   // lower factor of K + alpha I
  Eigen::VectorXd weights;           // (K + alpha I)^{-1} y
};

struct GprPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  Eigen::VectorXd raw_variance;  // before clamping at 0
};

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double length_scale,
                           double signal_variance);

/// log p(y | X) for centered targets; -infinity when K + alpha I is not
/// positive definite.
double gpr_log_marginal_likelihood(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& centered_targets,
                                   double length_scale, double signal_variance, double alpha);

/// (length_scale, signal_variance) candidates: 2^-5..2^5 times the median
/// pairwise distance crossed with {0.1, 1, 10} times the target variance.
std::vector<std::pair<double, double>> gpr_hyperparameter_grid(const Eigen::MatrixXd& inputs,
                                                                const Eigen::VectorXd& targets);

/// Grid search over gpr_hyperparameter_grid, then a coordinate search in
/// log space. If the kernel matrix cannot be factored, alpha is retried at
/// 10x and 100x before throwing NumericalError.
GprModel gpr_fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, double alpha);

/// Fit with fixed kernel hyperparameters.
GprModel gpr_fit_fixed(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, double alpha,
                       double length_scale, double signal_variance);

GprPrediction gpr_predict(const GprModel& model, const Eigen::MatrixXd& inputs);

}  // namespace knobtune
