#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "knobtune/cluster.hpp"
#include "knobtune/eval.hpp"
#include "knobtune/factors.hpp"
#include "knobtune/ingest.hpp"
#include "knobtune/mapping.hpp"
#include "knobtune/predictor.hpp"

namespace knobtune {

struct PipelineConfig {
  std::filesystem::path manifest;
  ClusterMethod method = ClusterMethod::kmeans;
  std::size_t k_min = 2;
  std::size_t k_max = 15;
  std::size_t factor_cap = 30;
  PredictorKind predictor = PredictorKind::gpr;
  double alpha = 1e-1;
  MapScore map_score = MapScore::euclid;
  std::size_t n_map = 5;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  std::size_t trees = 200;
  std::size_t depth = 50;
  std::size_t hidden = 64;
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  std::size_t jobs = 0;  // 0: one per hardware thread

  void validate() const;
  /// Predictor settings with the seed replaced by `seed`.
  PredictorConfig predictor_config(std::uint64_t seed) const;
  /// "<method>-<predictor>", used in prediction file names.
  std::string model_name() const;
};

/// JSON object whose keys are the field names above. A relative manifest
/// path is resolved against the config file's directory.
PipelineConfig read_pipeline_config(const std::filesystem::path& path);

/// 64-bit FNV-1a over the seed's little-endian bytes followed by the id.
std::uint64_t workload_seed(std::uint64_t seed, std::string_view workload_id);

struct PruneResult {
  std::vector<std::string> dropped_columns;
  MetricMatrix matrix;
  FactorModel factors;  // retained loadings, every eigenvalue
  std::optional<ClusterSelection> selection;  // empty when the sweep degenerates
  PrunedMetricSet pruned;
};

/// Metric pruning on `corpus.offline`. The corpus should already have
/// constant columns removed.
PruneResult prune_metrics(const PipelineConfig& config, const Corpus& corpus);

/// Loads the manifest, drops constant columns, prunes and writes
/// pruned_metrics.txt, dropped_columns.txt, eigenvalues.csv, loadings.csv and
/// cluster_report.csv under config.out.
PruneResult run_prune(const PipelineConfig& config);

struct StageResult {
  EvalReport report;
  std::vector<MappingResult> mappings;  // workload id order
};

/// Every target is split into n_map mapping rows and one held-out row,
/// mapped against `repository`, and predicted by a model trained on its
/// augmented table. Failures are rethrown with the workload id prepended.
StageResult run_stage(const PipelineConfig& config, std::span<const WorkloadTable> repository,
                      std::span<const WorkloadTable> targets, const FeatureLayout& layout,
                      const StandardScaler& scaler, const std::string& report_name);

struct TwoStageResult {
  PruneResult prune;
  FeatureLayout layout;
  StageResult stage1;
  StageResult stage2;
};

/// Stage 1 maps online_b against offline. Stage 2 maps online_c against
/// offline plus every stage-1 augmented table. The scaler is fit once on
/// the offline rows. Writes the prune outputs, map_report_stage{1,2}.csv,
/// predictions_<model>-stage{1,2}.csv and summary.csv under config.out.
TwoStageResult run_two_stage(const PipelineConfig& config);

/// Reads predictions_*.csv from `dir`, writes out/summary.csv and returns the
/// sorted reports.
std::vector<EvalReport> run_eval(const std::filesystem::path& dir, const std::filesystem::path& out);

}  // namespace knobtune
