#include <algorithm>
#include <limits>
#include <random>

#include "knobtune/cluster.hpp"
#include "knobtune/error.hpp"

namespace knobtune {
namespace {

using Eigen::Index;

struct Run {
  Eigen::MatrixXd centroids;
  std::vector<std::size_t> assignments;
  double inertia = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
};

Eigen::MatrixXd plus_plus_init(const Eigen::MatrixXd& points, std::size_t k, std::mt19937_64& rng) {
  const Index n = points.rows();
  Eigen::MatrixXd centroids(static_cast<Index>(k), points.cols());
  std::uniform_int_distribution<Index> pick(0, n - 1);
  centroids.row(0) = points.row(pick(rng));

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    d2[static_cast<std::size_t>(i)] = (points.row(i) - centroids.row(0)).squaredNorm();

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double cum = 0.0;
      chosen = -1;
      for (Index i = 0; i < n; ++i) {
        const double w = d2[static_cast<std::size_t>(i)];
        if (w <= 0.0) continue;
        cum += w;
        chosen = i;
        if (cum > target) break;
      }
    } else {
      chosen = pick(rng);  // every point already coincides with a centroid
    }
    centroids.row(static_cast<Index>(c)) = points.row(chosen);
    for (Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)],
                   (points.row(i) - centroids.row(static_cast<Index>(c))).squaredNorm());
  }
  return centroids;
}

double total_inertia(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                     const std::vector<std::size_t>& assignments) {
  double sum = 0.0;
  for (Index i = 0; i < points.rows(); ++i)
    sum += (points.row(i) - centroids.row(static_cast<Index>(assignments[static_cast<std::size_t>(i)])))
               .squaredNorm();
  return sum;
}

// Single-point transfers (Hartigan) from a Lloyd fixpoint. Moving x from a
// to b changes the inertia by n_b/(n_b+1)|x-c_b|^2 - n_a/(n_a-1)|x-c_a|^2.
void refine_transfers(const Eigen::MatrixXd& points, std::size_t k, Run& run, std::size_t max_passes) {
  const auto un = static_cast<std::size_t>(points.rows());
  std::vector<double> counts(k, 0.0);
  for (auto a : run.assignments) counts[a] += 1.0;
  for (std::size_t pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < un; ++i) {
      const std::size_t a = run.assignments[i];
      if (counts[a] < 2.0) continue;
      const auto x = points.row(static_cast<Index>(i));
      const double cost_out = counts[a] / (counts[a] - 1.0) * (x - run.centroids.row(static_cast<Index>(a))).squaredNorm();
      double best = 0.0;
      std::size_t to = a;
      for (std::size_t b = 0; b < k; ++b) {
        if (b == a) continue;
        const double delta =
            counts[b] / (counts[b] + 1.0) * (x - run.centroids.row(static_cast<Index>(b))).squaredNorm() - cost_out;
        if (delta < best - 1e-12 * std::max(1.0, cost_out)) {
          best = delta;
          to = b;
        }
      }
      if (to == a) continue;
      run.centroids.row(static_cast<Index>(a)) =
          (run.centroids.row(static_cast<Index>(a)) * counts[a] - x) / (counts[a] - 1.0);
      run.centroids.row(static_cast<Index>(to)) =
          (run.centroids.row(static_cast<Index>(to)) * counts[to] + x) / (counts[to] + 1.0);
      counts[a] -= 1.0;
      counts[to] += 1.0;
      run.assignments[i] = to;
      moved = true;
    }
    if (!moved) break;
  }
}

Run lloyd(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, std::size_t max_iterations) {
  std::mt19937_64 rng(seed);
  const Index n = points.rows();
  const auto un = static_cast<std::size_t>(n);

  Run run;
  run.centroids = plus_plus_init(points, k, rng);
  run.assignments.assign(un, std::numeric_limits<std::size_t>::max());

  std::vector<std::size_t> next(un);
  std::vector<double> dist(un);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    for (Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (points.row(i) - run.centroids.row(static_cast<Index>(c))).squaredNorm();
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      next[static_cast<std::size_t>(i)] = arg;
      dist[static_cast<std::size_t>(i)] = best;
    }

    std::fill(counts.begin(), counts.end(), 0);
    for (auto a : next) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = un;
      for (std::size_t i = 0; i < un; ++i) {
        if (counts[next[i]] < 2) continue;
        if (far == un || dist[i] > dist[far]) far = i;
      }
      if (far == un) break;  // cannot happen while n >= k
      --counts[next[far]];
      next[far] = c;
      dist[far] = 0.0;
      counts[c] = 1;
    }

    const bool changed = next != run.assignments;
    run.assignments = next;

    run.centroids.setZero();
    for (std::size_t i = 0; i < un; ++i) run.centroids.row(static_cast<Index>(next[i])) += points.row(static_cast<Index>(i));
    for (std::size_t c = 0; c < k; ++c) run.centroids.row(static_cast<Index>(c)) /= static_cast<double>(counts[c]);

    run.trace.push_back(total_inertia(points, run.centroids, run.assignments));
    if (!changed) break;
  }
  const double before = run.trace.back();
  refine_transfers(points, k, run, max_iterations);
  // exact centroids again, then record the refined inertia if it improved
  std::vector<std::size_t> counts_final(k, 0);
  run.centroids.setZero();
  for (std::size_t i = 0; i < un; ++i) {
    run.centroids.row(static_cast<Index>(run.assignments[i])) += points.row(static_cast<Index>(i));
    ++counts_final[run.assignments[i]];
  }
  for (std::size_t c = 0; c < k; ++c) run.centroids.row(static_cast<Index>(c)) /= static_cast<double>(counts_final[c]);
  const double after = total_inertia(points, run.centroids, run.assignments);
  if (after < before) run.trace.push_back(after);
  run.inertia = run.trace.back();
  return run;
}

}  // namespace

KMeansModel fit_kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                       const KMeansOptions& options) {
  if (k == 0) throw UsageError("k-means: k must be at least 1");
  if (points.cols() == 0) throw UsageError("k-means: points have zero dimensions");
  if (static_cast<std::size_t>(points.rows()) < k)
    throw UsageError("k-means: k = " + std::to_string(k) + " exceeds " +
                     std::to_string(points.rows()) + " points");
  if (!points.allFinite()) throw NumericalError("k-means: non-finite points");

  Run best;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, options.restarts); ++r) {
    Run run = lloyd(points, k, seed + r, std::max<std::size_t>(1, options.max_iterations));
    if (run.inertia < best.inertia) best = std::move(run);
  }

  KMeansModel model;
  model.k = k;
  model.seed = seed;
  model.centroids = std::move(best.centroids);
  model.assignments = std::move(best.assignments);
  model.inertia = best.inertia;
  model.inertia_trace = std::move(best.trace);
  return model;
}

}  // namespace knobtune
