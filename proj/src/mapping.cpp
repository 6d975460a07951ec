#include "knobtune/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "knobtune/csv.hpp"
#include "knobtune/error.hpp"

namespace knobtune {

namespace {

constexpr double kKnobTolerance = 1e-9;
constexpr double kPercentGuard = 1e-6;

bool same_knobs(const Observation& a, const Observation& b) {
  if (a.knobs.size() != b.knobs.size()) return false;
  for (std::size_t j = 0; j < a.knobs.size(); ++j)
    if (std::abs(a.knobs[j] - b.knobs[j]) > kKnobTolerance) return false;
  return true;
}

}  // namespace

std::string_view to_string(MapScore score) {
  switch (score) {
    case MapScore::euclid: return "euclid";
    case MapScore::mse: return "mse";
    case MapScore::mape: return "mape";
  }
  return "euclid";
}

MapScore parse_map_score(std::string_view name) {
  if (name == "euclid") return MapScore::euclid;
  if (name == "mse") return MapScore::mse;
  if (name == "mape") return MapScore::mape;
  throw UsageError("unknown map score '" + std::string(name) + "' (expected euclid, mse or mape)");
}

std::vector<WorkloadScore> score_workloads(const WorkloadTable& target, std::span<const WorkloadTable> sources,
                                           const FeatureLayout& layout, const StandardScaler& scaler,
                                           MapScore variant) {
  if (layout.metric_names.empty()) throw UsageError("workload mapping: empty pruned metric set");
  if (target.empty()) throw DataError("workload mapping: target '" + target.workload_id + "' has no rows");
  if (scaler.size() != layout.size()) throw UsageError("workload mapping: scaler does not match layout");

  const auto n_knobs = static_cast<Eigen::Index>(layout.knob_names.size());
  const auto n_metrics = static_cast<Eigen::Index>(layout.metric_names.size());
  const Eigen::MatrixXd t_raw = raw_features(target.observations, layout);
  const Eigen::MatrixXd t_scaled = scaler.transform(t_raw);

  std::vector<WorkloadScore> out;
  out.reserve(sources.size());
  for (const auto& source : sources) {
    if (source.empty()) throw DataError("workload mapping: source '" + source.workload_id + "' has no rows");
    const Eigen::MatrixXd s_raw = raw_features(source.observations, layout);
    const Eigen::MatrixXd s_scaled = scaler.transform(s_raw);

    WorkloadScore ws;
    ws.source_workload_id = source.workload_id;
    ws.pairing.resize(target.size());
    for (Eigen::Index i = 0; i < t_scaled.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      Eigen::Index arg = 0;
      for (Eigen::Index r = 0; r < s_scaled.rows(); ++r) {
        const double d = (t_scaled.row(i).head(n_knobs) - s_scaled.row(r).head(n_knobs)).squaredNorm();
        if (d < best) {
          best = d;
          arg = r;
        }
      }
      ws.pairing[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arg);
    }

    const auto rows = static_cast<double>(target.size());
    for (Eigen::Index m = 0; m < n_metrics; ++m) {
      const Eigen::Index c = n_knobs + m;
      double acc = 0.0;
      for (std::size_t i = 0; i < target.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(ws.pairing[i]);
        const auto ii = static_cast<Eigen::Index>(i);
        if (variant == MapScore::mape) {
          acc += std::abs(t_raw(ii, c) - s_raw(r, c)) / std::max(std::abs(t_raw(ii, c)), kPercentGuard);
        } else {
          const double diff = t_scaled(ii, c) - s_scaled(r, c);
          acc += diff * diff;
        }
      }
      double dist = 0.0;
      switch (variant) {
        case MapScore::euclid: dist = std::sqrt(acc); break;
        case MapScore::mse: dist = acc / rows; break;
        case MapScore::mape: dist = 100.0 * acc / rows; break;
      }
      ws.per_metric_distance.push_back(dist);
    }
    double sum = 0.0;
    for (double d : ws.per_metric_distance) sum += d;
    ws.score = sum / static_cast<double>(ws.per_metric_distance.size());
    out.push_back(std::move(ws));
  }
  return out;
}

std::string nearest_workload(std::span<const WorkloadScore> scores) {
  if (scores.empty()) throw UsageError("workload mapping: no candidate sources");
  const WorkloadScore* best = &scores.front();
  for (const auto& s : scores)
    if (s.score < best->score || (s.score == best->score && s.source_workload_id < best->source_workload_id))
      best = &s;
  return best->source_workload_id;
}

Augmented augment(const WorkloadTable& target, const WorkloadTable& source) {
  Augmented out;
  out.table = {target.workload_id, target.observations, target.schema};
  for (const auto& row : source.observations) {
    const bool conflict = std::any_of(target.observations.begin(), target.observations.end(),
                                      [&](const Observation& t) { return same_knobs(t, row); });
    if (conflict)
      ++out.conflicts_dropped;
    else
      out.table.observations.push_back(row);
  }
  return out;
}

MappingResult map_and_augment(std::span<const WorkloadTable> sources, const WorkloadTable& target,
                              const FeatureLayout& layout, const StandardScaler& scaler, MapScore variant) {
  MappingResult result;
  result.target_id = target.workload_id;
  result.scores = score_workloads(target, sources, layout, scaler, variant);
  result.chosen_source = nearest_workload(result.scores);
  const auto it = std::find_if(sources.begin(), sources.end(),
                               [&](const WorkloadTable& s) { return s.workload_id == result.chosen_source; });
  Augmented aug = augment(target, *it);
  result.augmented = std::move(aug.table);
  result.conflicts_dropped = aug.conflicts_dropped;
  return result;
}

void write_map_report(std::span<const MappingResult> results, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "target_id,source_id,score,chosen,conflicts_dropped\n";
  for (const auto& r : results)
    for (const auto& s : r.scores) {
      const bool chosen = s.source_workload_id == r.chosen_source;
      out << r.target_id << ',' << s.source_workload_id << ',' << csv::format_double(s.score) << ','
          << (chosen ? 1 : 0) << ',' << (chosen ? r.conflicts_dropped : 0) << '\n';
    }
}

}  // namespace knobtune
