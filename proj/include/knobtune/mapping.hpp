#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "knobtune/cluster.hpp"
#include "knobtune/ingest.hpp"
#include "knobtune/scaler.hpp"

namespace knobtune {

/// How per-metric differences between a target and a source are summarized.
/// euclid: Euclidean distance of scaled values; mse: mean squared scaled
/// difference; mape: mean absolute percentage difference of raw values.
enum class MapScore { euclid, mse, mape };

std::string_view to_string(MapScore score);
MapScore parse_map_score(std::string_view name);

struct WorkloadScore {
  std::string source_workload_id;
  std::vector<double> per_metric_distance;  // one per pruned metric
  double score = 0.0;                       // mean of per_metric_distance
  std::vector<std::size_t> pairing;         // source row paired with each target row
};

struct MappingResult {
  std::string target_id;
  std::vector<WorkloadScore> scores;  // input source order
  std::string chosen_source;
  WorkloadTable augmented;
  std::size_t conflicts_dropped = 0;
};

/// Pairs each target row with the source row whose scaled knob vector is
/// nearest, then compares each pruned metric across the paired rows.
/// `scaler` must be fit with `layout`, which holds every knob plus the pruned
/// metrics.
std::vector<WorkloadScore> score_workloads(const WorkloadTable& target, std::span<const WorkloadTable> sources,
                                           const FeatureLayout& layout, const StandardScaler& scaler,
                                           MapScore variant = MapScore::euclid);

/// Lowest score; ties go to the lexicographically smaller id.
std::string nearest_workload(std::span<const WorkloadScore> scores);

struct Augmented {
  WorkloadTable table;
  std::size_t conflicts_dropped = 0;
};

/// Target rows, then source rows whose knob vector differs from every target
/// knob vector by more than 1e-9 in some coordinate.
Augmented augment(const WorkloadTable& target, const WorkloadTable& source);

MappingResult map_and_augment(std::span<const WorkloadTable> sources, const WorkloadTable& target,
                              const FeatureLayout& layout, const StandardScaler& scaler,
                              MapScore variant = MapScore::euclid);

/// CSV: target_id,source_id,score,chosen,conflicts_dropped (one row per source).
void write_map_report(std::span<const MappingResult> results, const std::filesystem::path& path);

}  // namespace knobtune
