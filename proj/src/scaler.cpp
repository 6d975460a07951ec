#include "knobtune/scaler.hpp"

#include <cmath>

#include "knobtune/error.hpp"

namespace knobtune {

namespace {
constexpr double kMinStd = 1e-12;
}

FeatureLayout feature_layout(const Schema& schema, std::span<const std::string> metric_names) {
  FeatureLayout layout;
  layout.knob_names = schema.knob_names;
  for (const auto& name : metric_names) {
    layout.metric_columns.push_back(schema.metric_index(name));
    layout.metric_names.push_back(name);
  }
  return layout;
}

FeatureLayout full_layout(const Schema& schema) { return feature_layout(schema, schema.metric_names); }

Eigen::RowVectorXd raw_features(const Observation& obs, const FeatureLayout& layout) {
  if (obs.knobs.size() != layout.knob_names.size())
    throw DataError("feature layout expects " + std::to_string(layout.knob_names.size()) + " knobs, row has " +
                    std::to_string(obs.knobs.size()));
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(layout.size()));
  Eigen::Index c = 0;
  for (double v : obs.knobs) row(c++) = v;
  for (auto m : layout.metric_columns) {
    if (m >= obs.metrics.size()) throw DataError("feature layout refers to a missing metric column");
    row(c++) = obs.metrics[m];
  }
  return row;
}

Eigen::MatrixXd raw_features(std::span<const Observation> rows, const FeatureLayout& layout) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = raw_features(rows[i], layout);
  return out;
}

StandardScaler fit_scaler(const Eigen::MatrixXd& raw) {
  if (raw.rows() < 2) throw DataError("scaler needs at least 2 rows, got " + std::to_string(raw.rows()));
  StandardScaler s;
  s.means = raw.colwise().mean().transpose();
  s.stds.resize(raw.cols());
  s.passthrough.assign(static_cast<std::size_t>(raw.cols()), false);
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    s.stds(j) = std::sqrt((raw.col(j).array() - s.means(j)).square().mean());
    if (s.stds(j) < kMinStd) s.passthrough[static_cast<std::size_t>(j)] = true;
  }
  return s;
}

StandardScaler fit_scaler(std::span<const Observation> rows, const FeatureLayout& layout) {
  return fit_scaler(raw_features(rows, layout));
}

Eigen::MatrixXd StandardScaler::transform(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != means.size()) throw DataError("scaler: feature count mismatch");
  Eigen::MatrixXd out = raw.rowwise() - means.transpose();
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    if (!passthrough[static_cast<std::size_t>(j)]) out.col(j) /= stds(j);
  return out;
}

Eigen::RowVectorXd StandardScaler::transform(const Eigen::RowVectorXd& raw) const {
  return transform(Eigen::MatrixXd(raw)).row(0);
}

}  // namespace knobtune
