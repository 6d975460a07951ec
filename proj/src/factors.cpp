#include "knobtune/factors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "knobtune/csv.hpp"
#include "knobtune/error.hpp"
#include "knobtune/log.hpp"

namespace knobtune {

MetricMatrix build_metric_matrix(std::span<const WorkloadTable> offline) {
  std::vector<const WorkloadTable*> tables;
  for (const auto& t : offline) tables.push_back(&t);
  std::stable_sort(tables.begin(), tables.end(), [](const auto* a, const auto* b) {
    return a->workload_id < b->workload_id;
  });

  std::size_t n = 0;
  for (const auto* t : tables) n += t->size();
  if (n < 2) throw DataError("metric matrix needs at least 2 configurations, got " + std::to_string(n));
  const Schema& schema = *tables.front()->schema;
  const std::size_t m = schema.metric_names.size();
  if (m == 0) throw DataError("metric matrix needs at least one metric");

  Eigen::MatrixXd raw(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  Eigen::Index col = 0;
  for (const auto* t : tables)
    for (const auto& o : t->observations) {
      for (std::size_t i = 0; i < m; ++i) raw(static_cast<Eigen::Index>(i), col) = o.metrics[i];
      ++col;
    }

  MetricMatrix x;
  x.n_configs = n;
  std::vector<Eigen::Index> kept;
  std::vector<double> means, stds;
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = raw.row(static_cast<Eigen::Index>(i));
    const double mean = row.mean();
    const double var = (row.array() - mean).square().mean();
    if (!(var > 0.0)) {
      x.zero_variance.push_back(schema.metric_names[i]);
      continue;
    }
    kept.push_back(static_cast<Eigen::Index>(i));
    means.push_back(mean);
    stds.push_back(std::sqrt(var));
    x.metric_names.push_back(schema.metric_names[i]);
  }
  if (!x.zero_variance.empty())
    log::warn("metric matrix: removed " + std::to_string(x.zero_variance.size()) +
              " zero-variance metric(s)");
  if (kept.empty()) throw DataError("metric matrix: every metric has zero variance");

  x.values.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < kept.size(); ++r)
    x.values.row(static_cast<Eigen::Index>(r)) =
        (raw.row(kept[r]).array() - means[r]) / stds[r];
  return x;
}

FactorModel fit_factors(const MetricMatrix& x) {
  if (!x.values.allFinite()) throw NumericalError("factor extraction: non-finite input");
  if (x.n_configs == 0 || x.values.cols() != static_cast<Eigen::Index>(x.n_configs))
    throw DataError("factor extraction: matrix has inconsistent configuration count");

  const Eigen::MatrixXd scaled = x.values / std::sqrt(static_cast<double>(x.n_configs));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU);
  if (svd.info() != Eigen::Success) throw NumericalError("factor extraction: SVD failed");

  const Eigen::VectorXd& s = svd.singularValues();
  FactorModel model;
  model.eigenvalues = s.array().square();
  model.loadings = svd.matrixU() * s.asDiagonal();
  for (Eigen::Index j = 0; j < model.loadings.cols(); ++j) {
    Eigen::Index arg = 0;
    model.loadings.col(j).cwiseAbs().maxCoeff(&arg);
    if (model.loadings(arg, j) < 0.0) model.loadings.col(j) *= -1.0;
  }
  model.retained = static_cast<std::size_t>(model.loadings.cols());
  return model;
}

FactorModel retain_significant(const FactorModel& model, std::size_t cap) {
  if (cap == 0) throw UsageError("factor cap must be at least 1");
  std::size_t above = 0;
  for (Eigen::Index j = 0; j < model.eigenvalues.size(); ++j)
    if (model.eigenvalues(j) > 1.0) ++above;

  std::size_t keep = std::min(cap, above);
  if (above == 0) {
    log::warn("no factor has eigenvalue above 1; retaining the leading factor");
    keep = 1;
  }
  keep = std::min<std::size_t>(keep, static_cast<std::size_t>(model.loadings.cols()));

  FactorModel out;
  out.eigenvalues = model.eigenvalues;
  out.loadings = model.loadings.leftCols(static_cast<Eigen::Index>(keep));
  out.retained = keep;
  return out;
}

void write_loadings_csv(const FactorModel& model, std::span<const std::string> metric_names,
                        const std::filesystem::path& path) {
  if (metric_names.size() != static_cast<std::size_t>(model.loadings.rows()))
    throw DataError("loadings export: metric name count does not match loadings rows");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "metric";
  for (Eigen::Index j = 0; j < model.loadings.cols(); ++j) out << ",factor_" << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < model.loadings.rows(); ++i) {
    out << metric_names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < model.loadings.cols(); ++j)
      out << ',' << csv::format_double(model.loadings(i, j));
    out << '\n';
  }
}

void write_eigenvalues_csv(const FactorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "factor,eigenvalue,retained\n";
  for (Eigen::Index j = 0; j < model.eigenvalues.size(); ++j)
    out << j + 1 << ',' << csv::format_double(model.eigenvalues(j)) << ','
        << (static_cast<std::size_t>(j) < model.retained ? 1 : 0) << '\n';
}

}  // namespace knobtune
