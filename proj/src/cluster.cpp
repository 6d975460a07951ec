#include "knobtune/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "knobtune/csv.hpp"
#include "knobtune/error.hpp"
#include "knobtune/log.hpp"

namespace knobtune {

using Eigen::Index;

double silhouette_score(const Eigen::MatrixXd& points, std::span<const std::size_t> assignments) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (assignments.size() != n) throw UsageError("silhouette: one assignment per point required");
  const std::set<std::size_t> labels(assignments.begin(), assignments.end());
  if (labels.size() < 2) throw UsageError("silhouette: needs at least 2 clusters");

  const std::size_t max_label = *labels.rbegin();
  std::vector<std::size_t> size(max_label + 1, 0);
  for (auto a : assignments) ++size[a];

  Eigen::MatrixXd dist(points.rows(), points.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    dist(i, i) = 0.0;
    for (Index j = i + 1; j < points.rows(); ++j) dist(i, j) = dist(j, i) = (points.row(i) - points.row(j)).norm();
  }

  double total = 0.0;
  std::vector<double> sum_to(max_label + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = assignments[i];
    if (size[own] == 1) continue;  // contributes 0
    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) sum_to[assignments[j]] += dist(static_cast<Index>(i), static_cast<Index>(j));
    const double a = sum_to[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (auto c : labels)
      if (c != own) b = std::min(b, sum_to[c] / static_cast<double>(size[c]));
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

std::string_view to_string(ClusterMethod method) {
  return method == ClusterMethod::kmeans ? "kmeans" : "gmm";
}

ClusterMethod parse_cluster_method(std::string_view name) {
  if (name == "kmeans") return ClusterMethod::kmeans;
  if (name == "gmm") return ClusterMethod::gmm;
  throw UsageError("unknown clustering method '" + std::string(name) + "' (expected kmeans or gmm)");
}

std::size_t choose_k(ClusterMethod method, std::span<const std::size_t> ks,
                     std::span<const double> silhouettes, std::span<const double> bics) {
  if (ks.empty() || silhouettes.size() != ks.size()) throw UsageError("choose_k: inconsistent inputs");
  if (method == ClusterMethod::gmm && bics.size() != ks.size())
    throw UsageError("choose_k: gmm selection needs one BIC per k");
  constexpr double tie = 1e-12;

  std::vector<std::size_t> order(ks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ks[a] < ks[b]; });

  std::size_t best = order.front();
  for (std::size_t idx : order) {
    if (idx == best) continue;
    const double ds = silhouettes[idx] - silhouettes[best];
    if (ds > tie) {
      best = idx;
    } else if (std::abs(ds) <= tie && method == ClusterMethod::gmm && bics[idx] < bics[best]) {
      best = idx;
    }
  }
  return ks[best];
}

std::vector<std::size_t> default_k_range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> ks;
  for (std::size_t k = lo; k <= hi; ++k) ks.push_back(k);
  return ks;
}

ClusterSelection sweep_k(const Eigen::MatrixXd& points, ClusterMethod method,
                         std::span<const std::size_t> ks, std::uint64_t seed) {
  if (ks.empty()) throw UsageError("cluster sweep: no candidate k");
  for (auto k : ks) {
    if (k < 2) throw UsageError("cluster sweep: candidate k must be at least 2");
    if (k > static_cast<std::size_t>(points.rows()))
      throw UsageError("cluster sweep: k = " + std::to_string(k) + " exceeds " +
                       std::to_string(points.rows()) + " points");
  }

  ClusterSelection sel;
  sel.method = method;
  sel.candidate_ks.assign(ks.begin(), ks.end());
  std::vector<std::variant<KMeansModel, GmmModel>> models;
  for (auto k : ks) {
    if (method == ClusterMethod::kmeans) {
      KMeansModel m = fit_kmeans(points, k, seed);
      sel.silhouette_by_k.push_back(silhouette_score(points, m.assignments));
      models.emplace_back(std::move(m));
    } else {
      GmmModel m = fit_gmm_em(points, k, seed);
      const auto hard = hard_assignments(m, points);
      const std::set<std::size_t> used(hard.begin(), hard.end());
      if (used.size() < 2) {
        log::warn("gmm k = " + std::to_string(k) + ": fewer than 2 occupied components");
        sel.silhouette_by_k.push_back(-1.0);
      } else {
        sel.silhouette_by_k.push_back(silhouette_score(points, hard));
      }
      sel.bic_by_k.push_back(bic_score(m, points));
      models.emplace_back(std::move(m));
    }
  }
  sel.chosen_k = choose_k(method, sel.candidate_ks, sel.silhouette_by_k, sel.bic_by_k);
  const auto pos = static_cast<std::size_t>(
      std::find(sel.candidate_ks.begin(), sel.candidate_ks.end(), sel.chosen_k) - sel.candidate_ks.begin());
  sel.model = std::move(models[pos]);
  return sel;
}

namespace {

void check_alignment(const Eigen::MatrixXd& points, std::span<const std::string> names) {
  if (names.size() != static_cast<std::size_t>(points.rows()))
    throw UsageError("representatives: one metric name per point required");
}

// Closest candidate to center; equal distances resolved by name.
std::size_t closest(const Eigen::MatrixXd& points, const Eigen::RowVectorXd& center,
                    const std::vector<std::size_t>& candidates, std::span<const std::string> names) {
  std::size_t best = candidates.front();
  double best_d = (points.row(static_cast<Index>(best)) - center).norm();
  for (std::size_t idx : candidates) {
    const double d = (points.row(static_cast<Index>(idx)) - center).norm();
    if (d < best_d || (d == best_d && names[idx] < names[best])) {
      best = idx;
      best_d = d;
    }
  }
  return best;
}

PrunedMetricSet representatives(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers,
                                const std::vector<std::size_t>& membership,
                                std::span<const std::string> names) {
  const auto k = static_cast<std::size_t>(centers.rows());
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < membership.size(); ++i) members[membership[i]].push_back(i);

  std::vector<std::size_t> chosen(k, static_cast<std::size_t>(points.rows()));
  std::vector<bool> taken(static_cast<std::size_t>(points.rows()), false);
  for (std::size_t c = 0; c < k; ++c) {
    if (members[c].empty()) continue;
    chosen[c] = closest(points, centers.row(static_cast<Index>(c)), members[c], names);
    taken[chosen[c]] = true;
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (!members[c].empty()) continue;
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < taken.size(); ++i)
      if (!taken[i]) free.push_back(i);
    if (free.empty()) throw DataError("representatives: more clusters than metrics");
    log::warn("cluster " + std::to_string(c) + " has no members; using the nearest unselected metric");
    chosen[c] = closest(points, centers.row(static_cast<Index>(c)), free, names);
    taken[chosen[c]] = true;
  }

  PrunedMetricSet out;
  for (std::size_t c = 0; c < k; ++c) {
    out.metric_names.push_back(names[chosen[c]]);
    out.cluster_of.push_back(c);
  }
  return out;
}

}  // namespace

PrunedMetricSet select_representatives(const KMeansModel& model, const Eigen::MatrixXd& points,
                                       std::span<const std::string> metric_names) {
  check_alignment(points, metric_names);
  if (model.assignments.size() != metric_names.size())
    throw UsageError("representatives: model was fit on different points");
  return representatives(points, model.centroids, model.assignments, metric_names);
}

PrunedMetricSet select_representatives(const GmmModel& model, const Eigen::MatrixXd& points,
                                       std::span<const std::string> metric_names) {
  check_alignment(points, metric_names);
  return representatives(points, model.means, hard_assignments(model, points), metric_names);
}

PrunedMetricSet select_representatives(const ClusterSelection& selection, const FactorModel& factors,
                                       std::span<const std::string> metric_names) {
  return std::visit(
      [&](const auto& m) { return select_representatives(m, factors.loadings, metric_names); },
      selection.model);
}

void write_cluster_report(const ClusterSelection& selection, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "k,silhouette,bic,chosen\n";
  for (std::size_t i = 0; i < selection.candidate_ks.size(); ++i) {
    out << selection.candidate_ks[i] << ',' << csv::format_double(selection.silhouette_by_k[i]) << ',';
    if (!selection.bic_by_k.empty()) out << csv::format_double(selection.bic_by_k[i]);
    out << ',' << (selection.candidate_ks[i] == selection.chosen_k ? 1 : 0) << '\n';
  }
}

}  // namespace knobtune
