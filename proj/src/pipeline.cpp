#include "knobtune/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "knobtune/error.hpp"
#include "knobtune/log.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace knobtune {

namespace {

[[noreturn]] void rethrow_with(std::string_view prefix, const Error& e) {
  const std::string what = std::string(prefix) + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::usage: throw UsageError(what);
    case ErrorKind::data: throw DataError(what);
    case ErrorKind::numerical: throw NumericalError(what);
  }
  throw DataError(what);
}

template <typename F>
auto stage(std::string_view name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    rethrow_with(name, e);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir, ec)) throw DataError("cannot create output directory '" + dir.string() + "'");
}

void write_prune_outputs(const PruneResult& r, const fs::path& dir) {
  ensure_dir(dir);
  write_name_list(r.pruned.metric_names, dir / "pruned_metrics.txt");
  write_name_list(r.dropped_columns, dir / "dropped_columns.txt");
  write_eigenvalues_csv(r.factors, dir / "eigenvalues.csv");
  write_loadings_csv(r.factors, r.matrix.metric_names, dir / "loadings.csv");
  if (r.selection) write_cluster_report(*r.selection, dir / "cluster_report.csv");
}

std::vector<double> latencies(const WorkloadTable& t) {
  std::vector<double> v;
  for (const auto& o : t.observations) v.push_back(o.latency);
  return v;
}

}  // namespace

void PipelineConfig::validate() const {
  if (k_min < 2) throw UsageError("k range must start at 2 or more");
  if (k_max < k_min) throw UsageError("k range is empty");
  if (factor_cap == 0) throw UsageError("factor cap must be at least 1");
  if (!(alpha > 0.0)) throw UsageError("alpha must be positive");
  if (n_map == 0) throw UsageError("n_map must be at least 1");
  if (trees == 0 || depth == 0 || hidden == 0 || epochs == 0 || batch_size == 0)
    throw UsageError("predictor sizes must be at least 1");
}

PredictorConfig PipelineConfig::predictor_config(std::uint64_t s) const {
  PredictorConfig c;
  c.kind = predictor;
  c.alpha = alpha;
  c.trees = trees;
  c.depth = depth;
  c.hidden = hidden;
  c.epochs = epochs;
  c.batch_size = batch_size;
  c.seed = s;
  return c;
}

std::string PipelineConfig::model_name() const {
  return std::string(to_string(method)) + "-" + std::string(to_string(predictor));
}

PipelineConfig read_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config '" + path.string() + "': " + e.what());
  }
  if (!doc.is_object()) throw UsageError("config '" + path.string() + "': expected a JSON object");

  PipelineConfig c;
  const fs::path base = path.parent_path();
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "manifest") {
        c.manifest = v.get<std::string>();
        if (c.manifest.is_relative()) c.manifest = base / c.manifest;
      } else if (key == "method") c.method = parse_cluster_method(v.get<std::string>());
      else if (key == "k_min") c.k_min = v.get<std::size_t>();
      else if (key == "k_max") c.k_max = v.get<std::size_t>();
      else if (key == "factor_cap") c.factor_cap = v.get<std::size_t>();
      else if (key == "predictor") c.predictor = parse_predictor_kind(v.get<std::string>());
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "map_score") c.map_score = parse_map_score(v.get<std::string>());
      else if (key == "n_map") c.n_map = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "trees") c.trees = v.get<std::size_t>();
      else if (key == "depth") c.depth = v.get<std::size_t>();
      else if (key == "hidden") c.hidden = v.get<std::size_t>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "jobs") c.jobs = v.get<std::size_t>();
      else throw UsageError("config '" + path.string() + "': unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw UsageError("config '" + path.string() + "': " + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t workload_seed(std::uint64_t seed, std::string_view workload_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  for (char ch : workload_id) mix(static_cast<unsigned char>(ch));
  return h;
}

PruneResult prune_metrics(const PipelineConfig& config, const Corpus& corpus) {
  PruneResult r;
  r.matrix = stage("metric matrix", [&] { return build_metric_matrix(corpus.offline); });
  const FactorModel full = stage("factor analysis", [&] { return fit_factors(r.matrix); });
  r.factors = stage("factor retention", [&] { return retain_significant(full, config.factor_cap); });

  const auto n_points = static_cast<std::size_t>(r.factors.loadings.rows());
  std::vector<std::size_t> ks;
  for (std::size_t k = config.k_min; k <= config.k_max && k <= n_points; ++k) ks.push_back(k);
  if (ks.empty()) {
    log::warn("only " + std::to_string(n_points) + " metric(s) to cluster; keeping all of them");
    r.pruned.metric_names = r.matrix.metric_names;
    for (std::size_t i = 0; i < n_points; ++i) r.pruned.cluster_of.push_back(i);
    return r;
  }
  if (ks.back() < config.k_max)
    log::warn("k range truncated to " + std::to_string(ks.back()) + " (number of metrics)");

  r.selection = stage("clustering", [&] { return sweep_k(r.factors.loadings, config.method, ks, config.seed); });
  r.pruned = stage("representatives",
                   [&] { return select_representatives(*r.selection, r.factors, r.matrix.metric_names); });
  return r;
}

PruneResult run_prune(const PipelineConfig& config) {
  config.validate();
  const Corpus loaded = stage("ingest", [&] { return load_corpus(config.manifest); });
  ConstantDrop drop = stage("ingest", [&] { return drop_constant_columns(loaded); });
  PruneResult r = prune_metrics(config, drop.corpus);
  r.dropped_columns = std::move(drop.dropped);

  write_prune_outputs(r, config.out);
  return r;
}

StageResult run_stage(const PipelineConfig& config, std::span<const WorkloadTable> repository,
                      std::span<const WorkloadTable> targets, const FeatureLayout& layout,
                      const StandardScaler& scaler, const std::string& report_name) {
  if (targets.empty()) throw DataError(report_name + ": no target workloads");

  struct Slot {
    MappingResult mapping;
    PointPrediction point;
    std::exception_ptr error;
  };
  std::vector<Slot> slots(targets.size());

  auto work = [&](std::size_t i) {
    const WorkloadTable& target = targets[i];
    const MapValidationSplit split = split_map_validation(target, config.n_map);
    MappingResult m = map_and_augment(repository, split.map_part, layout, scaler, config.map_score);
    const Eigen::MatrixXd x = scaler.transform(raw_features(m.augmented.observations, layout));
    const std::vector<double> y = latencies(m.augmented);
    Predictor predictor(config.predictor_config(workload_seed(config.seed, target.workload_id)));
    predictor.fit(x, Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())));
    const Eigen::MatrixXd held = scaler.transform(raw_features(split.validation_part.observations, layout));
    const double truth = split.validation_part.observations.front().latency;
    slots[i].point = {target.workload_id, truth, predictor.predict(held)(0)};
    slots[i].mapping = std::move(m);
  };

  std::size_t n_threads = config.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.jobs;
  n_threads = std::min(n_threads, targets.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < targets.size(); i = next++) {
      try {
        work(i);
      } catch (...) {
        slots[i].error = std::current_exception();
      }
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  StageResult out;
  std::vector<PointPrediction> points;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].error) {
      try {
        std::rethrow_exception(slots[i].error);
      } catch (const Error& e) {
        rethrow_with(report_name + ", workload '" + targets[i].workload_id + "'", e);
      }
    }
    points.push_back(slots[i].point);
    out.mappings.push_back(std::move(slots[i].mapping));
  }
  out.report = make_report(report_name, std::move(points));
  return out;
}

TwoStageResult run_two_stage(const PipelineConfig& config) {
  config.validate();
  const Corpus loaded = stage("ingest", [&] { return load_corpus(config.manifest); });
  if (loaded.offline.empty()) throw DataError("ingest: no offline workloads");
  if (loaded.online_b.empty()) throw DataError("ingest: no online_b workloads");
  if (loaded.online_c.empty()) throw DataError("ingest: no online_c workloads");
  ConstantDrop drop = stage("ingest", [&] { return drop_constant_columns(loaded); });
  const Corpus& corpus = drop.corpus;

  TwoStageResult r;
  r.prune = prune_metrics(config, corpus);
  r.prune.dropped_columns = drop.dropped;
  r.layout = stage("features", [&] { return feature_layout(*corpus.schema, r.prune.pruned.metric_names); });

  std::vector<Observation> offline_rows;
  for (const auto& t : corpus.offline)
    offline_rows.insert(offline_rows.end(), t.observations.begin(), t.observations.end());
  const StandardScaler scaler = stage("features", [&] { return fit_scaler(offline_rows, r.layout); });

  const std::string name = config.model_name();
  r.stage1 = run_stage(config, corpus.offline, corpus.online_b, r.layout, scaler, name + "-stage1");

  std::vector<WorkloadTable> repository = corpus.offline;
  for (const auto& m : r.stage1.mappings) repository.push_back(m.augmented);
  r.stage2 = run_stage(config, repository, corpus.online_c, r.layout, scaler, name + "-stage2");

  write_prune_outputs(r.prune, config.out);
  write_map_report(r.stage1.mappings, config.out / "map_report_stage1.csv");
  write_map_report(r.stage2.mappings, config.out / "map_report_stage2.csv");
  write_predictions_csv(r.stage1.report, config.out / ("predictions_" + r.stage1.report.model_name + ".csv"));
  write_predictions_csv(r.stage2.report, config.out / ("predictions_" + r.stage2.report.model_name + ".csv"));
  const std::vector<EvalReport> sorted = compare_models({r.stage1.report, r.stage2.report});
  write_text(config.out / "summary.csv", render_summary_csv(sorted));
  return r;
}

std::vector<EvalReport> run_eval(const fs::path& dir, const fs::path& out) {
  std::vector<EvalReport> sorted = compare_models(read_prediction_dir(dir));
  ensure_dir(out);
  write_text(out / "summary.csv", render_summary_csv(sorted));
  return sorted;
}

}  // namespace knobtune
