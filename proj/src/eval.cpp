#include "knobtune/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "knobtune/csv.hpp"
#include "knobtune/error.hpp"

namespace fs = std::filesystem;

namespace knobtune {

namespace {

constexpr double kPercentGuard = 1e-6;
constexpr std::string_view kPrefix = "predictions_";

void check_lengths(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size())
    throw UsageError("length mismatch: " + std::to_string(truth.size()) + " truths vs " +
                     std::to_string(pred.size()) + " predictions");
  if (truth.empty()) throw UsageError("empty vectors");
}

}  // namespace

double mape(std::span<const double> truth, std::span<const double> pred) {
  check_lengths(truth, pred);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    sum += std::abs(truth[i] - pred[i]) / std::max(std::abs(truth[i]), kPercentGuard);
  return 100.0 * sum / static_cast<double>(truth.size());
}

double mse(std::span<const double> truth, std::span<const double> pred) {
  check_lengths(truth, pred);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) sum += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  return sum / static_cast<double>(truth.size());
}

EvalReport make_report(std::string model_name, std::vector<PointPrediction> points) {
  std::vector<double> t, p;
  for (const auto& pt : points) {
    t.push_back(pt.truth);
    p.push_back(pt.prediction);
  }
  EvalReport r;
  r.model_name = std::move(model_name);
  r.mape = mape(t, p);
  r.mse = mse(t, p);
  r.n = points.size();
  r.per_point = std::move(points);
  return r;
}

std::vector<EvalReport> compare_models(std::vector<EvalReport> reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const EvalReport& a, const EvalReport& b) {
    if (a.mape != b.mape) return a.mape < b.mape;
    return a.model_name < b.model_name;
  });
  return reports;
}

std::string render_summary_csv(std::span<const EvalReport> sorted) {
  std::ostringstream out;
  out << "model,mape,mse,n\n";
  for (const auto& r : sorted)
    out << r.model_name << ',' << csv::format_double(r.mape) << ',' << csv::format_double(r.mse) << ',' << r.n
        << '\n';
  return out.str();
}

std::string render_summary_text(std::span<const EvalReport> sorted) {
  std::size_t width = 5;
  for (const auto& r : sorted) width = std::max(width, r.model_name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "model" << "  " << std::right << std::setw(10) << "MAPE"
      << "  " << std::setw(14) << "MSE" << "  " << std::setw(6) << "n" << '\n';
  out << std::fixed;
  for (const auto& r : sorted)
    out << std::left << std::setw(static_cast<int>(width)) << r.model_name << "  " << std::right
        << std::setprecision(2) << std::setw(10) << r.mape << "  " << std::setw(14) << r.mse << "  "
        << std::setw(6) << r.n << '\n';
  return out.str();
}

void write_predictions_csv(const EvalReport& report, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "workload_id,truth,prediction\n";
  for (const auto& p : report.per_point)
    out << p.workload_id << ',' << csv::format_double(p.truth) << ',' << csv::format_double(p.prediction) << '\n';
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

EvalReport read_predictions_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open predictions file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ":1: missing header");
  const auto header = csv::split_line(line);
  auto column = [&](std::string_view name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path.string() + ":1: header lacks column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_id = column("workload_id"), c_truth = column("truth"), c_pred = column("prediction");

  std::vector<PointPrediction> points;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != header.size()) throw DataError(where + ": wrong field count");
    const auto truth = csv::parse_double(fields[c_truth]);
    const auto pred = csv::parse_double(fields[c_pred]);
    if (!truth || !pred) throw DataError(where + ": non-numeric value");
    points.push_back({std::string(fields[c_id]), *truth, *pred});
  }
  if (points.empty()) throw DataError(path.string() + ": no predictions");

  std::string name = path.stem().string();
  if (name.starts_with(kPrefix)) name = name.substr(kPrefix.size());
  return make_report(std::move(name), std::move(points));
}

std::vector<EvalReport> read_prediction_dir(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("predictions directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with(kPrefix) && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no predictions_*.csv files in '" + dir.string() + "'");
  std::vector<EvalReport> reports;
  for (const auto& f : files) reports.push_back(read_predictions_csv(f));
  return reports;
}

}  // namespace knobtune
