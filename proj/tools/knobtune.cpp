#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "knobtune/error.hpp"
#include "knobtune/eval.hpp"
#include "knobtune/pipeline.hpp"
#include "knobtune/synth.hpp"

namespace fs = std::filesystem;
using namespace knobtune;

namespace {

// Flags shared by the pipeline-shaped subcommands. Only flags given on the
// command line override the --config file.
struct ConfigFlags {
  std::string config, manifest, method, predictor, map_score, out;
  std::size_t k_min = 0, k_max = 0, factor_cap = 0, n_map = 0, trees = 0, depth = 0, hidden = 0, epochs = 0,
              batch_size = 0, jobs = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> setters;

  template <typename T>
  void add(CLI::App* app, const std::string& name, T& field, const std::string& help,
           std::function<void(PipelineConfig&)> set) {
    setters.emplace_back(app->add_option(name, field, help), std::move(set));
  }

  void attach(CLI::App* app, bool predictor_flags) {
    app->add_option("--config", config, "JSON pipeline config");
    add(app, "--manifest", manifest, "corpus manifest", [this](PipelineConfig& c) { c.manifest = manifest; });
    add(app, "--out", out, "output directory", [this](PipelineConfig& c) { c.out = out; });
    add(app, "--seed", seed, "random seed", [this](PipelineConfig& c) { c.seed = seed; });
    add(app, "--method", method, "kmeans or gmm",
        [this](PipelineConfig& c) { c.method = parse_cluster_method(method); });
    add(app, "--k-min", k_min, "smallest k in the sweep", [this](PipelineConfig& c) { c.k_min = k_min; });
    add(app, "--k-max", k_max, "largest k in the sweep", [this](PipelineConfig& c) { c.k_max = k_max; });
    add(app, "--factor-cap", factor_cap, "maximum retained factors",
        [this](PipelineConfig& c) { c.factor_cap = factor_cap; });
    add(app, "--map-score", map_score, "euclid, mse or mape",
        [this](PipelineConfig& c) { c.map_score = parse_map_score(map_score); });
    add(app, "--n-map", n_map, "rows per target used for mapping", [this](PipelineConfig& c) { c.n_map = n_map; });
    add(app, "--jobs", jobs, "worker threads (0 = all cores)", [this](PipelineConfig& c) { c.jobs = jobs; });
    if (!predictor_flags) return;
    add(app, "--predictor", predictor, "gpr, rf or nn",
        [this](PipelineConfig& c) { c.predictor = parse_predictor_kind(predictor); });
    add(app, "--alpha", alpha, "GPR diagonal noise", [this](PipelineConfig& c) { c.alpha = alpha; });
    add(app, "--trees", trees, "random forest size", [this](PipelineConfig& c) { c.trees = trees; });
    add(app, "--depth", depth, "random forest depth limit", [this](PipelineConfig& c) { c.depth = depth; });
    add(app, "--hidden", hidden, "MLP hidden units", [this](PipelineConfig& c) { c.hidden = hidden; });
    add(app, "--epochs", epochs, "MLP epochs", [this](PipelineConfig& c) { c.epochs = epochs; });
    add(app, "--batch-size", batch_size, "MLP minibatch size",
        [this](PipelineConfig& c) { c.batch_size = batch_size; });
  }

  PipelineConfig resolve() const {
    PipelineConfig c = config.empty() ? PipelineConfig{} : read_pipeline_config(config);
    for (const auto& [opt, set] : setters)
      if (opt->count() > 0) set(c);
    if (c.manifest.empty()) throw UsageError("a manifest is required (--manifest or config key 'manifest')");
    c.validate();
    return c;
  }
};

const WorkloadTable& find_workload(const Corpus& corpus, const std::string& id) {
  for (const auto* group : {&corpus.offline, &corpus.online_b, &corpus.online_c})
    for (const auto& t : *group)
      if (t.workload_id == id) return t;
  throw DataError("workload '" + id + "' not in the corpus");
}

FeatureLayout layout_for(const Schema& schema, const std::string& pruned_path) {
  if (pruned_path.empty()) return full_layout(schema);
  const auto names = read_name_list(pruned_path);
  return feature_layout(schema, names);
}

void print_summary(std::span<const EvalReport> reports) { std::cout << render_summary_text(reports); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knob tuning pipeline: metric pruning, workload mapping and latency prediction"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string spec_path, synth_out;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--spec", spec_path, "JSON with SynthSpec fields")->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "override the spec seed");

  ConfigFlags factor_flags, prune_flags, map_flags, train_flags, pipe_flags;
  auto* factors = app.add_subcommand("factors", "factor analysis of the offline metrics");
  auto* factors_export = factors->add_subcommand("export", "write loadings.csv and eigenvalues.csv");
  factors->require_subcommand(1);
  factor_flags.attach(factors_export, false);

  auto* prune = app.add_subcommand("prune", "reduce the metric set to cluster representatives");
  prune_flags.attach(prune, false);

  auto* map = app.add_subcommand("map", "map online workloads to their nearest offline workload");
  map_flags.attach(map, false);
  std::string map_pruned, map_group = "b";
  map->add_option("--pruned", map_pruned, "pruned metric list (default: run prune)");
  map->add_option("--group", map_group, "target group: b or c")->check(CLI::IsMember({"b", "c"}));

  auto* train = app.add_subcommand("train", "fit a latency model");
  train_flags.attach(train, true);
  std::string train_pruned, train_workload;
  train->add_option("--pruned", train_pruned, "pruned metric list (default: every metric)");
  train->add_option("--workload", train_workload, "train on this workload only (default: all offline rows)");

  auto* predict = app.add_subcommand("predict", "predict latency for workload CSV rows");
  std::string model_path, predict_manifest, predict_out, predict_name = "model";
  std::vector<std::string> inputs;
  predict->add_option("--model", model_path, "model.json from train")->required();
  predict->add_option("--manifest", predict_manifest, "manifest giving the CSV schema")->required();
  predict->add_option("--input", inputs, "workload CSV files")->required();
  predict->add_option("--name", predict_name, "model name in the output file");
  predict->add_option("--out", predict_out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "summarize predictions_*.csv files");
  std::string predictions_dir, eval_out;
  eval->add_option("--predictions", predictions_dir, "directory of prediction files")->required();
  eval->add_option("--out", eval_out, "output directory")->required();

  auto* pipeline = app.add_subcommand("pipeline", "prune, then two-stage mapping and prediction");
  pipe_flags.attach(pipeline, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      SynthSpec spec = read_synth_spec(spec_path);
      if (synth_seed) spec.seed = *synth_seed;
      const fs::path manifest = write_corpus(generate_corpus(spec).corpus, synth_out);
      std::cout << manifest.string() << '\n';
    } else if (factors_export->parsed()) {
      const PipelineConfig c = factor_flags.resolve();
      const Corpus corpus = drop_constant_columns(load_corpus(c.manifest)).corpus;
      const MetricMatrix x = build_metric_matrix(corpus.offline);
      const FactorModel f = retain_significant(fit_factors(x), c.factor_cap);
      fs::create_directories(c.out);
      write_loadings_csv(f, x.metric_names, c.out / "loadings.csv");
      write_eigenvalues_csv(f, c.out / "eigenvalues.csv");
      std::cout << f.retained << " of " << f.eigenvalues.size() << " factors retained\n";
    } else if (prune->parsed()) {
      const PruneResult r = run_prune(prune_flags.resolve());
      for (const auto& name : r.pruned.metric_names) std::cout << name << '\n';
    } else if (map->parsed()) {
      const PipelineConfig c = map_flags.resolve();
      const Corpus corpus = drop_constant_columns(load_corpus(c.manifest)).corpus;
      std::vector<std::string> names;
      if (map_pruned.empty())
        names = prune_metrics(c, corpus).pruned.metric_names;
      else
        names = read_name_list(map_pruned);
      const FeatureLayout layout = feature_layout(*corpus.schema, names);
      std::vector<Observation> rows;
      for (const auto& t : corpus.offline) rows.insert(rows.end(), t.observations.begin(), t.observations.end());
      const StandardScaler scaler = fit_scaler(rows, layout);
      std::vector<MappingResult> results;
      for (const auto& target : map_group == "b" ? corpus.online_b : corpus.online_c) {
        const auto split = split_map_validation(target, c.n_map);
        results.push_back(map_and_augment(corpus.offline, split.map_part, layout, scaler, c.map_score));
        write_workload_csv(results.back().augmented, c.out / "augmented" / (target.workload_id + ".csv"));
        std::cout << target.workload_id << " -> " << results.back().chosen_source << '\n';
      }
      fs::create_directories(c.out);
      write_map_report(results, c.out / "map_report.csv");
    } else if (train->parsed()) {
      const PipelineConfig c = train_flags.resolve();
      const Corpus corpus = load_corpus(c.manifest);
      const FeatureLayout layout = layout_for(*corpus.schema, train_pruned);
      std::vector<Observation> rows;
      if (!train_workload.empty()) {
        rows = find_workload(corpus, train_workload).observations;
      } else {
        for (const auto& t : corpus.offline) rows.insert(rows.end(), t.observations.begin(), t.observations.end());
      }
      TrainedModel model{layout, fit_scaler(rows, layout), Predictor(c.predictor_config(c.seed))};
      Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = rows[i].latency;
      model.predictor.fit(model.scaler.transform(raw_features(rows, layout)), y);
      fs::create_directories(c.out);
      save_model(model, c.out / "model.json");
      std::cout << (c.out / "model.json").string() << '\n';
    } else if (predict->parsed()) {
      const TrainedModel model = load_model(model_path);
      const Manifest manifest = read_manifest(predict_manifest);
      const auto schema = std::make_shared<const Schema>(manifest.schema);
      const std::vector<fs::path> paths(inputs.begin(), inputs.end());
      std::vector<PointPrediction> points;
      for (const auto& table : load_tables(paths, schema)) {
        const Eigen::VectorXd pred = model.predict(table.observations);
        for (std::size_t i = 0; i < table.size(); ++i)
          points.push_back({table.workload_id, table.observations[i].latency, pred(static_cast<Eigen::Index>(i))});
      }
      const EvalReport report = make_report(predict_name, std::move(points));
      fs::create_directories(predict_out);
      write_predictions_csv(report, fs::path(predict_out) / ("predictions_" + predict_name + ".csv"));
      print_summary(std::span(&report, 1));
    } else if (eval->parsed()) {
      print_summary(run_eval(predictions_dir, eval_out));
    } else if (pipeline->parsed()) {
      const TwoStageResult r = run_two_stage(pipe_flags.resolve());
      print_summary(compare_models({r.stage1.report, r.stage2.report}));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(ErrorKind::data);
  }
  return 0;
}
