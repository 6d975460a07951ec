#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "knobtune/factors.hpp"

namespace knobtune {

// Points are matrix rows throughout: one row per metric, one column per
// retained factor.

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
};

struct KMeansModel {
  std::size_t k = 0;
  Eigen::MatrixXd centroids;             // k x d
  std::vector<std::size_t> assignments;  // one per point
  double inertia = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_trace;     // best restart, one entry per Lloyd iteration
};

/// k-means++ seeding, Lloyd iterations to an assignment fixpoint, then
/// single-point transfers while any lowers the inertia. Restart r uses
/// seed + r; the lowest inertia wins (earliest on ties). An empty cluster
/// takes over the point farthest from its centroid.
KMeansModel fit_kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                       const KMeansOptions& options = {});

/// Mean silhouette over points. Points alone in their cluster score 0, as do
/// points with a(i) = b(i) = 0. Throws UsageError with fewer than 2 clusters.
double silhouette_score(const Eigen::MatrixXd& points, std::span<const std::size_t> assignments);

struct GmmOptions {
  std::size_t max_iterations = 200;
  double tolerance = 1e-6;       // relative log-likelihood gain
  double regularization = 1e-6;  // added to every covariance diagonal
};

struct GmmModel {
  std::size_t k = 0;
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;                     // k x d
  std::vector<Eigen::MatrixXd> covariances;  // k full d x d
  std::vector<double> log_likelihood_trace;  // initial parameters first
  std::uint64_t seed = 0;
  bool converged = false;
  std::size_t rejected_steps = 0;
};

/// Full-covariance EM started from fit_kmeans(points, k, seed). A step that
/// would lower the log-likelihood is discarded and ends the fit.
GmmModel fit_gmm_em(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                    const GmmOptions& options = {});

/// n x k posterior membership probabilities; rows sum to 1.
Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::MatrixXd& points);
double log_likelihood(const GmmModel& model, const Eigen::MatrixXd& points);
/// argmax responsibility per point, lowest component index on ties.
std::vector<std::size_t> hard_assignments(const GmmModel& model, const Eigen::MatrixXd& points);

/// (k - 1) + k d + k d (d + 1) / 2
std::size_t gmm_parameter_count(std::size_t k, std::size_t d);
double bic_from_log_likelihood(double log_likelihood, std::size_t k, std::size_t d, std::size_t n);
/// Lower is better.
double bic_score(const GmmModel& model, const Eigen::MatrixXd& points);

enum class ClusterMethod { kmeans, gmm };

std::string_view to_string(ClusterMethod method);
ClusterMethod parse_cluster_method(std::string_view name);

struct ClusterSelection {
  ClusterMethod method = ClusterMethod::kmeans;
  std::vector<std::size_t> candidate_ks;
  std::vector<double> silhouette_by_k;
  std::vector<double> bic_by_k;  // gmm only; empty for kmeans
  std::size_t chosen_k = 0;
  std::variant<KMeansModel, GmmModel> model;  // fit at chosen_k
};

/// Highest silhouette wins. Silhouettes within 1e-12 of each other tie; ties
/// go to the smaller k (kmeans) or the lower BIC, then smaller k (gmm).
std::size_t choose_k(ClusterMethod method, std::span<const std::size_t> ks,
                     std::span<const double> silhouettes, std::span<const double> bics);

std::vector<std::size_t> default_k_range(std::size_t lo = 2, std::size_t hi = 15);

ClusterSelection sweep_k(const Eigen::MatrixXd& points, ClusterMethod method,
                         std::span<const std::size_t> ks, std::uint64_t seed);

struct PrunedMetricSet {
  std::vector<std::string> metric_names;
  std::vector<std::size_t> cluster_of;
};

/// Per cluster, the member whose row is closest to the centroid; equal
/// distances go to the lexicographically smaller name. Ordered by cluster.
PrunedMetricSet select_representatives(const KMeansModel& model, const Eigen::MatrixXd& points,
                                       std::span<const std::string> metric_names);
/// Membership by hard_assignments; distance to the component mean. A
/// component with no members takes the nearest metric not already chosen.
PrunedMetricSet select_representatives(const GmmModel& model, const Eigen::MatrixXd& points,
                                       std::span<const std::string> metric_names);
PrunedMetricSet select_representatives(const ClusterSelection& selection,
                                       const FactorModel& factors,
                                       std::span<const std::string> metric_names);

/// CSV: k,silhouette,bic,chosen (bic empty for kmeans).
void write_cluster_report(const ClusterSelection& selection, const std::filesystem::path& path);

}  // namespace knobtune
