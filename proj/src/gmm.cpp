#include <cmath>
#include <limits>
#include <numbers>

#include "knobtune/cluster.hpp"
#include "knobtune/error.hpp"

namespace knobtune {
namespace {

using Eigen::Index;

struct Component {
  Eigen::LLT<Eigen::MatrixXd> chol;
  double log_det = 0.0;
};

Component factor(const Eigen::MatrixXd& cov) {
  Component c;
  c.chol.compute(cov);
  if (c.chol.info() != Eigen::Success) throw NumericalError("gmm: covariance is not positive definite");
  c.log_det = 2.0 * c.chol.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return c;
}

// Per-point, per-component log(w_j N(x_i | mu_j, Sigma_j)).
Eigen::MatrixXd weighted_log_densities(const GmmModel& model, const Eigen::MatrixXd& points) {
  const Index n = points.rows();
  const Index d = points.cols();
  const auto k = static_cast<Index>(model.k);
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  Eigen::MatrixXd out(n, k);
  for (Index j = 0; j < k; ++j) {
    const Component comp = factor(model.covariances[static_cast<std::size_t>(j)]);
    const double log_w = model.weights(j) > 0.0 ? std::log(model.weights(j))
                                                : -std::numeric_limits<double>::infinity();
    Eigen::MatrixXd centered = (points.rowwise() - model.means.row(j)).transpose();
    comp.chol.matrixL().solveInPlace(centered);
    const Eigen::VectorXd maha = centered.colwise().squaredNorm().transpose();
    out.col(j) = (-0.5 * (static_cast<double>(d) * log_2pi + comp.log_det + maha.array())).matrix();
    out.col(j).array() += log_w;
  }
  return out;
}

// Row-wise log-sum-exp.
Eigen::VectorXd log_normalizer(const Eigen::MatrixXd& log_dens) {
  Eigen::VectorXd out(log_dens.rows());
  for (Index i = 0; i < log_dens.rows(); ++i) {
    const double m = log_dens.row(i).maxCoeff();
    out(i) = std::isinf(m) ? m : m + std::log((log_dens.row(i).array() - m).exp().sum());
  }
  return out;
}

struct EStep {
  Eigen::MatrixXd resp;
  double log_likelihood = 0.0;
};

EStep expectation(const GmmModel& model, const Eigen::MatrixXd& points) {
  const Eigen::MatrixXd log_dens = weighted_log_densities(model, points);
  const Eigen::VectorXd lse = log_normalizer(log_dens);
  EStep e;
  e.log_likelihood = lse.sum();
  e.resp = (log_dens.colwise() - lse).array().exp();
  return e;
}

GmmModel maximization(const GmmModel& prev, const Eigen::MatrixXd& points, const Eigen::MatrixXd& resp,
                      double reg) {
  GmmModel next = prev;
  const Eigen::VectorXd nk =
      resp.colwise().sum().transpose().array() + 10.0 * std::numeric_limits<double>::epsilon();
  next.weights = nk / nk.sum();
  next.means = (resp.transpose() * points).array().colwise() / nk.array();
  for (std::size_t j = 0; j < prev.k; ++j) {
    const auto jj = static_cast<Index>(j);
    const Eigen::MatrixXd centered = points.rowwise() - next.means.row(jj);
    Eigen::MatrixXd cov = (centered.array().colwise() * resp.col(jj).array()).matrix().transpose() * centered;
    cov /= nk(jj);
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal().array() += reg;
    next.covariances[j] = std::move(cov);
  }
  return next;
}

}  // namespace

std::size_t gmm_parameter_count(std::size_t k, std::size_t d) {
  return (k - 1) + k * d + k * d * (d + 1) / 2;
}

double bic_from_log_likelihood(double log_likelihood, std::size_t k, std::size_t d, std::size_t n) {
  return static_cast<double>(gmm_parameter_count(k, d)) * std::log(static_cast<double>(n)) -
         2.0 * log_likelihood;
}

Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::MatrixXd& points) {
  return expectation(model, points).resp;
}

double log_likelihood(const GmmModel& model, const Eigen::MatrixXd& points) {
  return log_normalizer(weighted_log_densities(model, points)).sum();
}

std::vector<std::size_t> hard_assignments(const GmmModel& model, const Eigen::MatrixXd& points) {
  const Eigen::MatrixXd log_dens = weighted_log_densities(model, points);
  std::vector<std::size_t> out(static_cast<std::size_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i) {
    Index arg = 0;
    log_dens.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arg);
  }
  return out;
}

double bic_score(const GmmModel& model, const Eigen::MatrixXd& points) {
  return bic_from_log_likelihood(log_likelihood(model, points), model.k,
                                 static_cast<std::size_t>(points.cols()),
                                 static_cast<std::size_t>(points.rows()));
}

GmmModel fit_gmm_em(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                    const GmmOptions& options) {
  if (k == 0) throw UsageError("gmm: k must be at least 1");
  if (points.cols() == 0) throw UsageError("gmm: points have zero dimensions");
  if (static_cast<std::size_t>(points.rows()) < k)
    throw UsageError("gmm: k = " + std::to_string(k) + " exceeds " + std::to_string(points.rows()) +
                     " points");

  const KMeansModel init = fit_kmeans(points, k, seed);
  const Index d = points.cols();

  GmmModel model;
  model.k = k;
  model.seed = seed;
  model.means = init.centroids;
  model.weights = Eigen::VectorXd::Zero(static_cast<Index>(k));
  model.covariances.assign(k, Eigen::MatrixXd::Zero(d, d));
  for (std::size_t i = 0; i < init.assignments.size(); ++i) {
    const auto j = init.assignments[i];
    const Eigen::RowVectorXd diff = points.row(static_cast<Index>(i)) - model.means.row(static_cast<Index>(j));
    model.covariances[j] += diff.transpose() * diff;
    model.weights(static_cast<Index>(j)) += 1.0;
  }
  for (std::size_t j = 0; j < k; ++j) {
    model.covariances[j] /= model.weights(static_cast<Index>(j));
    model.covariances[j].diagonal().array() += options.regularization;
  }
  model.weights /= static_cast<double>(points.rows());

  EStep e = expectation(model, points);
  if (!std::isfinite(e.log_likelihood)) throw NumericalError("gmm: non-finite initial log-likelihood");
  model.log_likelihood_trace.push_back(e.log_likelihood);

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    GmmModel candidate = maximization(model, points, e.resp, options.regularization);
    EStep next = expectation(candidate, points);
    if (!std::isfinite(next.log_likelihood)) throw NumericalError("gmm: non-finite log-likelihood");

    const double gain = next.log_likelihood - e.log_likelihood;
    if (gain < 0.0) {
      // the covariance floor can make the update overshoot near convergence
      ++model.rejected_steps;
      model.converged = true;
      break;
    }
    candidate.log_likelihood_trace.push_back(next.log_likelihood);
    model = std::move(candidate);
    const double scale = std::max(1.0, std::abs(e.log_likelihood));
    e = std::move(next);
    if (gain < options.tolerance * scale) {
      model.converged = true;
      break;
    }
  }
  return model;
}

}  // namespace knobtune
