#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace knobtune {

/// 100/n * sum |truth - pred| / max(|truth|, 1e-6), in percent.
double mape(std::span<const double> truth, std::span<const double> pred);
double mse(std::span<const double> truth, std::span<const double> pred);

struct PointPrediction {
  std::string workload_id;
  double truth = 0.0;
  double prediction = 0.0;

  bool operator==(const PointPrediction&) const = default;
};

struct EvalReport {
  std::string model_name;
  double mape = 0.0;
  double mse = 0.0;
  std::size_t n = 0;
  std::vector<PointPrediction> per_point;
};

/// Computes mape/mse from the points.
EvalReport make_report(std::string model_name, std::vector<PointPrediction> points);

/// Reports ordered by MAPE ascending, then by model name.
std::vector<EvalReport> compare_models(std::vector<EvalReport> reports);

/// model,mape,mse,n
std::string render_summary_csv(std::span<const EvalReport> sorted);
/// Column-aligned table for terminals.
std::string render_summary_text(std::span<const EvalReport> sorted);

/// workload_id,truth,prediction
void write_predictions_csv(const EvalReport& report, const std::filesystem::path& path);
/// The model name is taken from the file stem after "predictions_". Throws
/// DataError naming the file and line on malformed input.
EvalReport read_predictions_csv(const std::filesystem::path& path);

/// Reads every predictions_*.csv in dir (sorted by file name).
std::vector<EvalReport> read_prediction_dir(const std::filesystem::path& dir);

}  // namespace knobtune
