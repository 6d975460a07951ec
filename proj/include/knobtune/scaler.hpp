#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "knobtune/ingest.hpp"

namespace knobtune {

/// Which observation columns form a feature vector: every knob, then the
/// selected metrics in the given order. Latency is never a feature.
struct FeatureLayout {
  std::vector<std::string> knob_names;
  std::vector<std::string> metric_names;
  std::vector<std::size_t> metric_columns;  // indices into Observation::metrics

  std::size_t size() const { return knob_names.size() + metric_names.size(); }
  bool operator==(const FeatureLayout&) const = default;
};

FeatureLayout feature_layout(const Schema& schema, std::span<const std::string> metric_names);
FeatureLayout full_layout(const Schema& schema);

Eigen::RowVectorXd raw_features(const Observation& obs, const FeatureLayout& layout);
/// One row per observation.
Eigen::MatrixXd raw_features(std::span<const Observation> rows, const FeatureLayout& layout);

/// Per-feature mean and population standard deviation. Features whose std
/// is below 1e-12 are only centered and are marked in `passthrough`.
struct StandardScaler {
  Eigen::VectorXd means;
  Eigen::VectorXd stds;
  std::vector<bool> passthrough;

  Eigen::MatrixXd transform(const Eigen::MatrixXd& raw) const;
  Eigen::RowVectorXd transform(const Eigen::RowVectorXd& raw) const;
  std::size_t size() const { return static_cast<std::size_t>(means.size()); }
};

StandardScaler fit_scaler(const Eigen::MatrixXd& raw);
StandardScaler fit_scaler(std::span<const Observation> rows, const FeatureLayout& layout);

}  // namespace knobtune
