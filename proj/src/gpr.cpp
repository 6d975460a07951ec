#include "knobtune/gpr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "knobtune/error.hpp"

namespace knobtune {

namespace {

using Eigen::Index;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double median_pairwise_distance(const Eigen::MatrixXd& x) {
  std::vector<double> d;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = i + 1; j < x.rows(); ++j) d.push_back((x.row(i) - x.row(j)).norm());
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
  return med > 0.0 ? med : 1.0;
}

double target_variance(const Eigen::VectorXd& y) {
  if (y.size() < 2) return 1.0;
  const double var = (y.array() - y.mean()).square().mean();
  return var > 0.0 ? var : 1.0;
}

std::optional<Eigen::LLT<Eigen::MatrixXd>> factor_kernel(const Eigen::MatrixXd& x, double length_scale,
                                                         double signal_variance, double alpha) {
  Eigen::MatrixXd k = rbf_kernel(x, x, length_scale, signal_variance);
  k.diagonal().array() += alpha;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto diag = llt.matrixLLT().diagonal();
  if (!diag.allFinite() || (diag.array() <= 0.0).any()) return std::nullopt;
  return llt;
}

struct Search {
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double lml = kNegInf;
};

Search search_hyperparameters(const Eigen::MatrixXd& x, const Eigen::VectorXd& yc,
                              const std::vector<std::pair<double, double>>& grid, double alpha) {
  Search best;
  for (const auto& [ell, sf2] : grid) {
    const double v = gpr_log_marginal_likelihood(x, yc, ell, sf2, alpha);
    if (v > best.lml) best = {ell, sf2, v};
  }
  if (!std::isfinite(best.lml)) return best;

  std::array<double, 2> pos{std::log(best.length_scale), std::log(best.signal_variance)};
  std::array<double, 2> step{0.5 * std::numbers::ln2, 0.5 * std::numbers::ln10};
  for (int iter = 0; iter < 60 && std::max(step[0], step[1]) > 1e-3; ++iter) {
    bool moved = false;
    for (std::size_t dim = 0; dim < 2; ++dim) {
      for (double dir : {1.0, -1.0}) {
        auto cand = pos;
        cand[dim] += dir * step[dim];
        const double v = gpr_log_marginal_likelihood(x, yc, std::exp(cand[0]), std::exp(cand[1]), alpha);
        if (v > best.lml) {
          pos = cand;
          best = {std::exp(cand[0]), std::exp(cand[1]), v};
          moved = true;
          break;
        }
      }
    }
    if (!moved) {
      step[0] *= 0.5;
      step[1] *= 0.5;
    }
  }
  return best;
}

void check_inputs(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, double alpha) {
  if (inputs.rows() == 0) throw DataError("gpr: empty training set");
  if (inputs.rows() != targets.size()) throw DataError("gpr: one target per training row required");
  if (!(alpha > 0.0)) throw UsageError("gpr: alpha must be positive");
  if (!inputs.allFinite() || !targets.allFinite()) throw NumericalError("gpr: non-finite training data");
}

}  // namespace

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double length_scale,
                           double signal_variance) {
  const Eigen::VectorXd an = a.rowwise().squaredNorm();
  const Eigen::VectorXd bn = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * a * b.transpose()).colwise() + an;
  d2.rowwise() += bn.transpose();
  d2 = d2.cwiseMax(0.0);
  return signal_variance * (-0.5 / (length_scale * length_scale) * d2.array()).exp().matrix();
}

double gpr_log_marginal_likelihood(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& centered_targets,
                                   double length_scale, double signal_variance, double alpha) {
  const auto llt = factor_kernel(inputs, length_scale, signal_variance, alpha);
  if (!llt) return kNegInf;
  const Eigen::VectorXd w = llt->solve(centered_targets);
  const double log_det = 2.0 * llt->matrixLLT().diagonal().array().log().sum();
  const double n = static_cast<double>(inputs.rows());
  const double v = -0.5 * centered_targets.dot(w) - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
  return std::isfinite(v) ? v : kNegInf;
}

std::vector<std::pair<double, double>> gpr_hyperparameter_grid(const Eigen::MatrixXd& inputs,
                                                                const Eigen::VectorXd& targets) {
  const double med = median_pairwise_distance(inputs);
  const double var = target_variance(targets);
  std::vector<std::pair<double, double>> grid;
  for (int e = -5; e <= 5; ++e)
    for (double f : {0.1, 1.0, 10.0}) grid.emplace_back(std::ldexp(med, e), f * var);
  return grid;
}

GprModel gpr_fit_fixed(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, double alpha,
                       double length_scale, double signal_variance) {
  check_inputs(inputs, targets, alpha);
  const double mean = targets.mean();
  const Eigen::VectorXd yc = targets.array() - mean;
  for (double jitter : {alpha, 10.0 * alpha, 100.0 * alpha}) {
    const auto llt = factor_kernel(inputs, length_scale, signal_variance, jitter);
    if (!llt) continue;
    GprModel m;
    m.alpha = jitter;
    m.requested_alpha = alpha;
    m.length_scale = length_scale;
    m.signal_variance = signal_variance;
    m.target_mean = mean;
    m.training_inputs = inputs;
    m.training_targets = yc;
    m.cholesky_factor = llt->matrixL();
    m.weights = llt->solve(yc);
    m.log_marginal_likelihood = gpr_log_marginal_likelihood(inputs, yc, length_scale, signal_variance, jitter);
    return m;
  }
  throw NumericalError("gpr: kernel matrix is not positive definite even with 100x alpha");
}

GprModel gpr_fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, double alpha) {
  check_inputs(inputs, targets, alpha);
  const Eigen::VectorXd yc = targets.array() - targets.mean();
  const auto grid = gpr_hyperparameter_grid(inputs, targets);
  for (double jitter : {alpha, 10.0 * alpha, 100.0 * alpha}) {
    const Search best = search_hyperparameters(inputs, yc, grid, jitter);
    if (!std::isfinite(best.lml)) continue;
    GprModel m = gpr_fit_fixed(inputs, targets, jitter, best.length_scale, best.signal_variance);
    m.requested_alpha = alpha;
    return m;
  }
  throw NumericalError("gpr: kernel matrix is not positive definite even with 100x alpha");
}

GprPrediction gpr_predict(const GprModel& model, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != model.training_inputs.cols())
    throw DataError("gpr: expected " + std::to_string(model.training_inputs.cols()) + " features, got " +
                    std::to_string(inputs.cols()));
  const Eigen::MatrixXd k_star = rbf_kernel(inputs, model.training_inputs, model.length_scale, model.signal_variance);
  GprPrediction p;
  p.mean = (k_star * model.weights).array() + model.target_mean;
  const Eigen::MatrixXd v =
      model.cholesky_factor.triangularView<Eigen::Lower>().solve(k_star.transpose());
  p.raw_variance = model.signal_variance - v.colwise().squaredNorm().transpose().array();
  p.std = p.raw_variance.cwiseMax(0.0).cwiseSqrt();
  return p;
}

}  // namespace knobtune
