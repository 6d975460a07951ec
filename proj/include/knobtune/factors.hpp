#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "knobtune/ingest.hpp"

namespace knobtune {

/// Standardized metrics-by-configurations matrix. Row i is metric i over
/// every offline observation (workload id order, then row order).
struct MetricMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> metric_names;
  std::size_t n_configs = 0;
  std::vector<std::string> zero_variance;  // rows removed before standardizing
};

/// Loadings are metrics x retained factors; eigenvalues cover every
/// extracted factor, descending.
struct FactorModel {
  Eigen::MatrixXd loadings;
  Eigen::VectorXd eigenvalues;
  std::size_t retained = 0;
};

MetricMatrix build_metric_matrix(std::span<const WorkloadTable> offline);

/// SVD of X / sqrt(n_configs): eigenvalue j = s_j^2, loading column j = u_j * s_j.
/// All factors are kept; the largest-magnitude entry of each column is positive.
FactorModel fit_factors(const MetricMatrix& x);

/// Keep min(cap, #{eigenvalue > 1}) leading factors, or one factor (with a
/// warning) when no eigenvalue exceeds 1.
FactorModel retain_significant(const FactorModel& model, std::size_t cap = 30);

void write_loadings_csv(const FactorModel& model, std::span<const std::string> metric_names,
                        const std::filesystem::path& path);
void write_eigenvalues_csv(const FactorModel& model, const std::filesystem::path& path);

}  // namespace knobtune
