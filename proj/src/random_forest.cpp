#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "knobtune/error.hpp"
#include "knobtune/forest.hpp"

namespace knobtune {
namespace {

using Eigen::Index;

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double cost = std::numeric_limits<double>::infinity();
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t max_depth, std::uint64_t seed)
      : x_(x), y_(y), max_depth_(max_depth), rng_(seed) {
    const auto d = static_cast<std::size_t>(x.cols());
    mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));
    features_.resize(d);
    std::iota(features_.begin(), features_.end(), 0);
  }

  RegressionTree build() {
    const auto n = static_cast<std::size_t>(x_.rows());
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = draw(rng_);
    tree_.nodes.clear();
    tree_.depth = 0;
    grow(sample, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.depth = std::max(tree_.depth, depth);

    double lo = y_(static_cast<Index>(idx.front())), hi = lo, sum = 0.0;
    for (auto i : idx) {
      const double v = y_(static_cast<Index>(i));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    // the mean of a subset lies in its range; clamp away rounding drift
    tree_.nodes[static_cast<std::size_t>(id)].value = std::clamp(sum / static_cast<double>(idx.size()), lo, hi);

    if (idx.size() < 2 || lo == hi || depth >= max_depth_) return id;
    const Split split = best_split(idx);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx)
      (x_(static_cast<Index>(i), split.feature) <= split.threshold ? left : right).push_back(i);
    std::vector<std::size_t>().swap(idx);

    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  Split best_split(const std::vector<std::size_t>& idx) {
    std::shuffle(features_.begin(), features_.end(), rng_);
    Split best;
    std::vector<std::pair<double, double>> col(idx.size());
    std::size_t visited = 0;
    for (std::size_t f : features_) {
      if (visited >= mtry_ && best.feature >= 0) break;
      ++visited;
      for (std::size_t k = 0; k < idx.size(); ++k)
        col[k] = {x_(static_cast<Index>(idx[k]), static_cast<Index>(f)), y_(static_cast<Index>(idx[k]))};
      std::sort(col.begin(), col.end());

      double total = 0.0, total_sq = 0.0;
      for (const auto& [xv, yv] : col) {
        total += yv;
        total_sq += yv * yv;
      }
      double left = 0.0, left_sq = 0.0;
      const auto n = static_cast<double>(col.size());
      for (std::size_t k = 0; k + 1 < col.size(); ++k) {
        left += col[k].second;
        left_sq += col[k].second * col[k].second;
        if (!(col[k].first < col[k + 1].first)) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = n - nl;
        const double sse_l = left_sq - left * left / nl;
        const double sse_r = (total_sq - left_sq) - (total - left) * (total - left) / nr;
        const double cost = sse_l + sse_r;
        if (cost < best.cost) {
          double thr = 0.5 * (col[k].first + col[k + 1].first);
          if (!(thr < col[k + 1].first)) thr = col[k].first;
          best = {static_cast<int>(f), thr, cost};
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  std::size_t max_depth_;
  std::mt19937_64 rng_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> features_;
  RegressionTree tree_;
};

}  // namespace

double RegressionTree::predict(const Eigen::RowVectorXd& x) const {
  std::size_t at = 0;
  while (nodes[at].feature >= 0) {
    const auto& node = nodes[at];
    at = static_cast<std::size_t>(x(node.feature) <= node.threshold ? node.left : node.right);
  }
  return nodes[at].value;
}

RfModel rf_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const RfOptions& options) {
  if (features.rows() == 0) throw DataError("random forest: empty training set");
  if (features.rows() != targets.size()) throw DataError("random forest: one target per training row required");
  if (features.cols() == 0) throw DataError("random forest: no features");
  if (options.n_trees == 0) throw UsageError("random forest: needs at least one tree");
  if (!features.allFinite() || !targets.allFinite()) throw NumericalError("random forest: non-finite training data");

  RfModel model;
  model.n_trees = options.n_trees;
  model.max_depth = options.max_depth;
  model.seed = options.seed;
  model.n_features = static_cast<std::size_t>(features.cols());
  model.trees.reserve(options.n_trees);
  for (std::size_t t = 0; t < options.n_trees; ++t)
    model.trees.push_back(TreeBuilder(features, targets, options.max_depth, options.seed + t).build());
  return model;
}

Eigen::VectorXd rf_predict(const RfModel& model, const Eigen::MatrixXd& features) {
  if (static_cast<std::size_t>(features.cols()) != model.n_features)
    throw DataError("random forest: expected " + std::to_string(model.n_features) + " features, got " +
                    std::to_string(features.cols()));
  if (model.trees.empty()) throw UsageError("random forest: model has no trees");
  Eigen::VectorXd out(features.rows());
  for (Index i = 0; i < features.rows(); ++i) {
    const Eigen::RowVectorXd row = features.row(i);
    double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& tree : model.trees) {
      const double v = tree.predict(row);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out(i) = std::clamp(sum / static_cast<double>(model.trees.size()), lo, hi);
  }
  return out;
}

}  // namespace knobtune
