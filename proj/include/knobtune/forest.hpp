#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace knobtune {

struct RfOptions {
  std::size_t n_trees = 200;
  std::size_t max_depth = 50;
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t depth = 0;

  double predict(const Eigen::RowVectorXd& x) const;
};

struct RfModel {
  std::size_t n_trees = 0;
  std::size_t max_depth = 0;
  std::uint64_t seed = 0;
  std::size_t n_features = 0;
  std::vector<RegressionTree> trees;
};

/// Bagged regression trees. Tree t draws its bootstrap sample and feature
/// candidates from seed + t. Each node searches floor(sqrt(d)) random
/// features (more if none of them splits) for the split with the lowest
/// summed child squared error; nodes with fewer than 2 samples, zero
/// variance, or depth max_depth become mean-valued leaves.
RfModel rf_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const RfOptions& options = {});

Eigen::VectorXd rf_predict(const RfModel& model, const Eigen::MatrixXd& features);

}  // namespace knobtune
