#include "knobtune/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "knobtune/error.hpp"

namespace knobtune {
namespace {

using Eigen::Index;

constexpr double kPercentGuard = 1e-6;

struct Forward {
  Eigen::MatrixXd pre;   // n x hidden
  Eigen::MatrixXd act;   // n x hidden
  Eigen::VectorXd out;   // n
};

Forward forward(const MlpModel& m, const Eigen::MatrixXd& x) {
  Forward f;
  f.pre = (x * m.w1.transpose()).rowwise() + m.b1.transpose();
  f.act = f.pre.cwiseMax(0.0);
  f.out = m.target_scale * ((f.act * m.w2.transpose()).array() + m.b2);
  return f;
}

void check_features(const MlpModel& m, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != m.n_inputs())
    throw DataError("mlp: expected " + std::to_string(m.n_inputs()) + " features, got " + std::to_string(x.cols()));
}

struct AdamSlot {
  Eigen::ArrayXXd m, v;
  explicit AdamSlot(Index rows = 0, Index cols = 0) : m(Eigen::ArrayXXd::Zero(rows, cols)), v(m) {}

  template <typename Param, typename Grad>
  void step(Param& p, const Grad& g, const MlpConfig& c, double bias1, double bias2) {
    const Eigen::ArrayXXd ga = Eigen::MatrixXd(g).array();
    m = c.beta1 * m + (1.0 - c.beta1) * ga;
    v = c.beta2 * v + (1.0 - c.beta2) * ga.square();
    const Eigen::ArrayXXd update = c.learning_rate * (m / bias1) / ((v / bias2).sqrt() + c.adam_epsilon);
    p -= update.matrix().reshaped(p.rows(), p.cols());
  }
};

}  // namespace

MlpModel mlp_init(std::size_t n_inputs, const MlpConfig& config) {
  if (n_inputs == 0) throw DataError("mlp: no input features");
  if (config.hidden_units == 0) throw UsageError("mlp: hidden_units must be at least 1");
  const auto h = static_cast<Index>(config.hidden_units);
  const auto d = static_cast<Index>(n_inputs);
  std::mt19937_64 rng(config.seed);
  auto glorot = [&](Index fan_in, Index fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return std::uniform_real_distribution<double>(-limit, limit);
  };

  MlpModel m;
  m.config = config;
  m.w1.resize(h, d);
  auto u1 = glorot(d, h);
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < d; ++j) m.w1(i, j) = u1(rng);
  m.b1 = Eigen::VectorXd::Zero(h);
  m.w2.resize(h);
  auto u2 = glorot(h, 1);
  for (Index j = 0; j < h; ++j) m.w2(j) = u2(rng);
  m.b2 = 0.0;
  return m;
}

Eigen::VectorXd mlp_predict(const MlpModel& model, const Eigen::MatrixXd& features) {
  check_features(model, features);
  return forward(model, features).out;
}

double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& features, const Eigen::VectorXd& targets) {
  check_features(model, features);
  const Eigen::VectorXd pred = forward(model, features).out;
  const Eigen::ArrayXd denom = targets.array().abs().max(kPercentGuard);
  return 100.0 * ((targets - pred).array().abs() / denom).mean();
}

double mlp_loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                             MlpGradient& grad) {
  check_features(model, features);
  if (features.rows() != targets.size() || features.rows() == 0)
    throw DataError("mlp: one target per training row required");
  const Forward f = forward(model, features);
  const double n = static_cast<double>(features.rows());
  const Eigen::ArrayXd denom = targets.array().abs().max(kPercentGuard);
  const Eigen::ArrayXd resid = f.out.array() - targets.array();
  const double loss = 100.0 * (resid.abs() / denom).mean();

  // dL/d(out_i), then through the output scale
  const Eigen::VectorXd g = (100.0 / n * resid.sign() / denom * model.target_scale).matrix();
  grad.w2 = g.transpose() * f.act;
  grad.b2 = g.sum();
  Eigen::MatrixXd d_pre = g * model.w2;
  d_pre.array() *= (f.pre.array() > 0.0).cast<double>();
  grad.w1 = d_pre.transpose() * features;
  grad.b1 = d_pre.colwise().sum().transpose();
  return loss;
}

MlpModel mlp_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const MlpConfig& config) {
  if (features.rows() == 0) throw DataError("mlp: empty training set");
  if (features.rows() != targets.size()) throw DataError("mlp: one target per training row required");
  if (!features.allFinite() || !targets.allFinite()) throw NumericalError("mlp: non-finite training data");
  if (config.batch_size == 0) throw UsageError("mlp: batch_size must be at least 1");

  MlpModel m = mlp_init(static_cast<std::size_t>(features.cols()), config);
  const double scale = targets.array().abs().mean();
  m.target_scale = scale > 0.0 ? scale : 1.0;

  const auto n = static_cast<std::size_t>(features.rows());
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  AdamSlot s_w1(m.w1.rows(), m.w1.cols()), s_b1(m.b1.size(), 1), s_w2(1, m.w2.size()), s_b2(1, 1);
  std::size_t t = 0;
  MlpGradient grad;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const std::vector<Index> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop));
      const Eigen::MatrixXd xb = features(batch, Eigen::all);
      const Eigen::VectorXd yb = targets(batch);
      mlp_loss_and_gradient(m, xb, yb, grad);

      ++t;
      const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
      const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
      s_w1.step(m.w1, grad.w1, config, bias1, bias2);
      s_b1.step(m.b1, grad.b1, config, bias1, bias2);
      s_w2.step(m.w2, grad.w2, config, bias1, bias2);
      Eigen::Matrix<double, 1, 1> b2{m.b2};
      s_b2.step(b2, Eigen::Matrix<double, 1, 1>{grad.b2}, config, bias1, bias2);
      m.b2 = b2(0);
    }
    const double loss = mlp_loss(m, features, targets);
    if (!std::isfinite(loss)) throw NumericalError("mlp: non-finite loss at epoch " + std::to_string(epoch + 1));
    m.loss_trace.push_back(loss);
  }
  return m;
}

}  // namespace knobtune
