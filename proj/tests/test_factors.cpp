#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "knobtune/error.hpp"
#include "knobtune/factors.hpp"

using namespace knobtune;
using testing_support::CaptureWarnings;
using testing_support::random_matrix;
using testing_support::to_mat;

namespace {

// raw: metrics x configs. Configs are spread over `workloads` tables in order.
std::vector<WorkloadTable> tables_from(const Eigen::MatrixXd& raw, std::size_t workloads = 1) {
  auto schema = std::make_shared<Schema>();
  schema->knob_names = {"k"};
  for (Eigen::Index i = 0; i < raw.rows(); ++i) schema->metric_names.push_back("m" + std::to_string(i));
  schema->latency_name = "lat";
  schema->workload_id_name = "wid";
  std::vector<WorkloadTable> out(workloads);
  for (std::size_t w = 0; w < workloads; ++w) {
    out[w].workload_id = "w" + std::to_string(w);
    out[w].schema = schema;
  }
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    Observation o{{0.0}, {}, 1.0};
    for (Eigen::Index i = 0; i < raw.rows(); ++i) o.metrics.push_back(raw(i, j));
    out[static_cast<std::size_t>(j) * workloads / static_cast<std::size_t>(raw.cols())].observations.push_back(o);
  }
  return out;
}

FactorModel with_eigenvalues(std::vector<double> ev) {
  FactorModel m;
  m.eigenvalues = Eigen::Map<Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
  m.loadings = Eigen::MatrixXd::Ones(3, static_cast<Eigen::Index>(ev.size()));
  m.retained = ev.size();
  return m;
}

}  // namespace

TEST(MetricMatrix, StandardizesRows) {
  Eigen::MatrixXd raw(1, 3);
  raw << 1, 2, 3;
  const MetricMatrix x = build_metric_matrix(tables_from(raw));
  EXPECT_EQ(x.n_configs, 3u);
  EXPECT_NEAR(x.values.row(0).mean(), 0.0, 1e-15);
  EXPECT_NEAR(x.values.row(0).squaredNorm() / 3.0, 1.0, 1e-15);
  EXPECT_NEAR(x.values(0, 2), std::sqrt(1.5), 1e-15);
}

TEST(MetricMatrix, ColumnsFollowWorkloadIdOrder) {
  Eigen::MatrixXd raw(1, 4);
  raw << 1, 2, 3, 4;
  auto tables = tables_from(raw, 2);
  std::swap(tables[0], tables[1]);  // w1 first in the input
  const MetricMatrix x = build_metric_matrix(tables);
  EXPECT_LT(x.values(0, 0), x.values(0, 3));
  EXPECT_LT(x.values(0, 1), x.values(0, 2));
}

TEST(MetricMatrix, ZeroVarianceRowsRemoved) {
  Eigen::MatrixXd raw(3, 4);
  raw << 1, 2, 3, 4, 5, 5, 5, 5, 4, 1, 2, 2;
  CaptureWarnings warnings;
  const MetricMatrix x = build_metric_matrix(tables_from(raw));
  EXPECT_EQ(x.metric_names, (std::vector<std::string>{"m0", "m2"}));
  EXPECT_EQ(x.zero_variance, (std::vector<std::string>{"m1"}));
  EXPECT_FALSE(warnings.messages.empty());
}

TEST(MetricMatrix, Errors) {
  Eigen::MatrixXd one(2, 1);
  one << 1, 2;
  EXPECT_THROW(build_metric_matrix(tables_from(one)), DataError);
  Eigen::MatrixXd flat(1, 3);
  flat << 2, 2, 2;
  CaptureWarnings quiet;
  EXPECT_THROW(build_metric_matrix(tables_from(flat)), DataError);
}

TEST(Factors, EigenvaluesMatchJacobiOnCorrelationMatrix) {
  const Eigen::MatrixXd raw = random_matrix(10, 50, 1);
  const MetricMatrix x = build_metric_matrix(tables_from(raw, 5));
  const FactorModel f = fit_factors(x);
  const auto expected = oracle::jacobi_eigenvalues(oracle::correlation(to_mat(raw)));
  ASSERT_EQ(f.eigenvalues.size(), 10);
  double sum = 0.0;
  for (int j = 0; j < 10; ++j) {
    EXPECT_NEAR(f.eigenvalues(j), expected[static_cast<std::size_t>(j)], 1e-9);
    if (j > 0) EXPECT_LE(f.eigenvalues(j), f.eigenvalues(j - 1));
    EXPECT_GE(f.eigenvalues(j), -1e-8);
    sum += f.eigenvalues(j);
  }
  EXPECT_NEAR(sum, 10.0, 1e-6);
}

TEST(Factors, ReconstructsCorrelationMatrix) {
  const Eigen::MatrixXd raw = random_matrix(10, 50, 2);
  const FactorModel f = fit_factors(build_metric_matrix(tables_from(raw)));
  const Eigen::MatrixXd rebuilt = f.loadings * f.loadings.transpose();
  const auto corr = oracle::correlation(to_mat(raw));
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) EXPECT_NEAR(rebuilt(i, j), corr[i][j], 1e-6);
}

TEST(Factors, MoreMetricsThanConfigs) {
  const Eigen::MatrixXd raw = random_matrix(12, 5, 3);
  const FactorModel f = fit_factors(build_metric_matrix(tables_from(raw)));
  const Eigen::MatrixXd rebuilt = f.loadings * f.loadings.transpose();
  const auto corr = oracle::correlation(to_mat(raw));
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) EXPECT_NEAR(rebuilt(i, j), corr[i][j], 1e-9);
  EXPECT_NEAR(f.eigenvalues.sum(), 12.0, 1e-9);
}

TEST(Factors, SignConvention) {
  const FactorModel f = fit_factors(build_metric_matrix(tables_from(random_matrix(6, 30, 4))));
  for (Eigen::Index j = 0; j < f.loadings.cols(); ++j) {
    Eigen::Index arg = 0;
    f.loadings.col(j).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(f.loadings(arg, j), 0.0);
  }
}

TEST(Factors, IdenticalAndCorrelatedMetricsCoincide) {
  Eigen::MatrixXd raw = random_matrix(5, 40, 5);
  raw.row(3) = raw.row(1);
  raw.row(4) = 3.5 * raw.row(0).array() + 2.0;
  const FactorModel f = fit_factors(build_metric_matrix(tables_from(raw)));
  EXPECT_LT((f.loadings.row(1) - f.loadings.row(3)).norm(), 1e-6);
  EXPECT_LT((f.loadings.row(0) - f.loadings.row(4)).norm(), 1e-6);
}

TEST(Factors, RankOneMatchesGramOracle) {
  Eigen::MatrixXd raw(2, 20);
  const Eigen::MatrixXd base = random_matrix(1, 20, 6);
  raw.row(0) = base;
  raw.row(1) = -2.0 * base.array() + 1.0;
  const MetricMatrix x = build_metric_matrix(tables_from(raw));
  const FactorModel f = fit_factors(x);
  // Independent 2x2 eigensolve of X Xᵀ / n.
  oracle::Mat gram = oracle::zeros(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) gram[i][j] = x.values.row(i).dot(x.values.row(j)) / 20.0;
  const auto ev = oracle::jacobi_eigenvalues(gram);
  EXPECT_NEAR(f.eigenvalues(0), ev[0], 1e-9);
  EXPECT_NEAR(f.eigenvalues(0), 2.0, 1e-9);
  EXPECT_LT(std::abs(f.eigenvalues(1)), 1e-8);
}

TEST(Factors, ScaleInvariance) {
  Eigen::MatrixXd raw = random_matrix(6, 25, 7);
  const FactorModel a = fit_factors(build_metric_matrix(tables_from(raw)));
  raw.row(2) *= 1234.5;
  raw.row(4) *= 0.001;
  const FactorModel b = fit_factors(build_metric_matrix(tables_from(raw)));
  EXPECT_LT((a.loadings - b.loadings).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Factors, NonFiniteInputRejected) {
  MetricMatrix x;
  x.values = Eigen::MatrixXd::Ones(2, 3);
  x.values(1, 1) = std::nan("");
  x.metric_names = {"a", "b"};
  x.n_configs = 3;
  EXPECT_THROW(fit_factors(x), NumericalError);
}

TEST(Retain, Threshold) {
  EXPECT_EQ(retain_significant(with_eigenvalues({5, 2, 1.1, 0.4})).retained, 3u);
  EXPECT_EQ(retain_significant(with_eigenvalues({5, 2, 1.1, 0.4})).loadings.cols(), 3);
  EXPECT_EQ(retain_significant(with_eigenvalues({3, 1.0, 0.5})).retained, 1u);  // exactly 1 is excluded
  EXPECT_EQ(retain_significant(with_eigenvalues({5, 2, 1.1, 0.4}), 2).retained, 2u);
  EXPECT_THROW(retain_significant(with_eigenvalues({5}), 0), UsageError);
}

TEST(Retain, CapAtThirty) {
  std::vector<double> ev;
  for (int i = 0; i < 40; ++i) ev.push_back(50.0 - i);
  const FactorModel r = retain_significant(with_eigenvalues(ev));
  EXPECT_EQ(r.retained, 30u);
  EXPECT_EQ(r.eigenvalues.size(), 40);
}

TEST(Retain, NoneAboveOneKeepsLeadingFactorWithWarning) {
  CaptureWarnings warnings;
  const FactorModel r = retain_significant(with_eigenvalues({0.9, 0.5}));
  EXPECT_EQ(r.retained, 1u);
  EXPECT_FALSE(warnings.messages.empty());
}

TEST(FactorsExport, Csv) {
  testing_support::TempDir dir;
  const Eigen::MatrixXd raw = random_matrix(3, 10, 8);
  const MetricMatrix x = build_metric_matrix(tables_from(raw));
  const FactorModel f = retain_significant(fit_factors(x));
  write_loadings_csv(f, x.metric_names, dir / "l.csv");
  write_eigenvalues_csv(f, dir / "e.csv");
  const std::string l = testing_support::read_file(dir / "l.csv");
  EXPECT_TRUE(l.starts_with("metric,factor_1")) << l;
  EXPECT_EQ(std::count(l.begin(), l.end(), '\n'), 4);
  const std::string e = testing_support::read_file(dir / "e.csv");
  EXPECT_EQ(e.substr(0, e.find('\n')), "factor,eigenvalue,retained");
  EXPECT_EQ(std::count(e.begin(), e.end(), '\n'), 4);
}
