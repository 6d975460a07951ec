#include "knobtune/predictor.hpp"

#include <fstream>
#include <sstream>
#include <json.hpp>

#include "knobtune/error.hpp"

using nlohmann::json;

namespace knobtune {

std::string_view to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::gpr: return "gpr";
    case PredictorKind::rf: return "rf";
    case PredictorKind::nn: return "nn";
  }
  return "gpr";
}

PredictorKind parse_predictor_kind(std::string_view name) {
  if (name == "gpr") return PredictorKind::gpr;
  if (name == "rf") return PredictorKind::rf;
  if (name == "nn") return PredictorKind::nn;
  throw UsageError("unknown predictor '" + std::string(name) + "' (expected gpr, rf or nn)");
}

Predictor::Predictor(PredictorConfig config) : config_(config) {}

Predictor Predictor::from_model(PredictorConfig config, Model model) {
  Predictor p(config);
  p.model_ = std::move(model);
  return p;
}

void Predictor::fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets) {
  switch (config_.kind) {
    case PredictorKind::gpr:
      model_ = gpr_fit(features, targets, config_.alpha);
      break;
    case PredictorKind::rf:
      model_ = rf_fit(features, targets, RfOptions{config_.trees, config_.depth, config_.seed});
      break;
    case PredictorKind::nn: {
      MlpConfig c;
      c.hidden_units = config_.hidden;
      c.epochs = config_.epochs;
      c.batch_size = config_.batch_size;
      c.seed = config_.seed;
      model_ = mlp_fit(features, targets, c);
      break;
    }
  }
}

Eigen::VectorXd Predictor::predict(const Eigen::MatrixXd& features) const {
  struct Visitor {
    const Eigen::MatrixXd& x;
    Eigen::VectorXd operator()(std::monostate) const { throw UsageError("predictor used before fit"); }
    Eigen::VectorXd operator()(const GprModel& m) const { return gpr_predict(m, x).mean; }
    Eigen::VectorXd operator()(const RfModel& m) const { return rf_predict(m, x); }
    Eigen::VectorXd operator()(const MlpModel& m) const { return mlp_predict(m, x); }
  };
  return std::visit(Visitor{features}, model_);
}

Eigen::VectorXd TrainedModel::predict(std::span<const Observation> rows) const {
  return predictor.predict(scaler.transform(raw_features(rows, layout)));
}

// ---- serialization ----

namespace {

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Eigen::MatrixXd m(rows, cols);
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw DataError("model file: matrix row count mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = data.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(r.size()) != cols) throw DataError("model file: matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json gpr_json(const GprModel& m) {
  return {{"alpha", m.alpha},
          {"requested_alpha", m.requested_alpha},
          {"length_scale", m.length_scale},
          {"signal_variance", m.signal_variance},
          {"target_mean", m.target_mean},
          {"log_marginal_likelihood", m.log_marginal_likelihood},
          {"training_inputs", to_json(m.training_inputs)},
          {"training_targets", to_json(m.training_targets)},
          {"cholesky_factor", to_json(m.cholesky_factor)},
          {"weights", to_json(m.weights)}};
}

GprModel gpr_from(const json& j) {
  GprModel m;
  m.alpha = j.at("alpha").get<double>();
  m.requested_alpha = j.at("requested_alpha").get<double>();
  m.length_scale = j.at("length_scale").get<double>();
  m.signal_variance = j.at("signal_variance").get<double>();
  m.target_mean = j.at("target_mean").get<double>();
  m.log_marginal_likelihood = j.at("log_marginal_likelihood").get<double>();
  m.training_inputs = matrix_from(j.at("training_inputs"));
  m.training_targets = vector_from(j.at("training_targets"));
  m.cholesky_factor = matrix_from(j.at("cholesky_factor"));
  m.weights = vector_from(j.at("weights"));
  return m;
}

json rf_json(const RfModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back({{"depth", t.depth}, {"nodes", std::move(nodes)}});
  }
  return {{"n_trees", m.n_trees}, {"max_depth", m.max_depth}, {"seed", m.seed},
          {"n_features", m.n_features}, {"trees", std::move(trees)}};
}

RfModel rf_from(const json& j) {
  RfModel m;
  m.n_trees = j.at("n_trees").get<std::size_t>();
  m.max_depth = j.at("max_depth").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.n_features = j.at("n_features").get<std::size_t>();
  for (const auto& t : j.at("trees")) {
    RegressionTree tree;
    tree.depth = t.at("depth").get<std::size_t>();
    for (const auto& n : t.at("nodes"))
      tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                            n.at(4).get<double>()});
    const auto count = static_cast<int>(tree.nodes.size());
    for (const auto& n : tree.nodes)
      if (n.feature >= 0 && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count ||
                             n.feature >= static_cast<int>(m.n_features)))
        throw DataError("model file: malformed tree node");
    if (tree.nodes.empty()) throw DataError("model file: empty tree");
    m.trees.push_back(std::move(tree));
  }
  return m;
}

json mlp_json(const MlpModel& m) {
  const auto& c = m.config;
  return {{"config",
           {{"hidden_units", c.hidden_units}, {"epochs", c.epochs}, {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2},
            {"adam_epsilon", c.adam_epsilon}, {"seed", c.seed}}},
          {"w1", to_json(m.w1)},
          {"b1", to_json(m.b1)},
          {"w2", to_json(Eigen::VectorXd(m.w2.transpose()))},
          {"b2", m.b2},
          {"target_scale", m.target_scale},
          {"loss_trace", m.loss_trace}};
}

MlpModel mlp_from(const json& j) {
  MlpModel m;
  const auto& c = j.at("config");
  m.config.hidden_units = c.at("hidden_units").get<std::size_t>();
  m.config.epochs = c.at("epochs").get<std::size_t>();
  m.config.batch_size = c.at("batch_size").get<std::size_t>();
  m.config.learning_rate = c.at("learning_rate").get<double>();
  m.config.beta1 = c.at("beta1").get<double>();
  m.config.beta2 = c.at("beta2").get<double>();
  m.config.adam_epsilon = c.at("adam_epsilon").get<double>();
  m.config.seed = c.at("seed").get<std::uint64_t>();
  m.w1 = matrix_from(j.at("w1"));
  m.b1 = vector_from(j.at("b1"));
  m.w2 = vector_from(j.at("w2")).transpose();
  m.b2 = j.at("b2").get<double>();
  m.target_scale = j.at("target_scale").get<double>();
  m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  if (m.w1.rows() != m.b1.size() || m.w2.size() != m.b1.size()) throw DataError("model file: inconsistent mlp shapes");
  return m;
}

}  // namespace

std::string serialize_model(const TrainedModel& tm) {
  const auto& cfg = tm.predictor.config();
  json doc;
  doc["format"] = "knobtune-model";
  doc["format_version"] = kModelFormatVersion;
  doc["predictor"] = {{"kind", std::string(to_string(cfg.kind))}, {"alpha", cfg.alpha},   {"trees", cfg.trees},
                      {"depth", cfg.depth},  {"hidden", cfg.hidden}, {"epochs", cfg.epochs},
                      {"batch_size", cfg.batch_size}, {"seed", cfg.seed}};
  doc["layout"] = {{"knobs", tm.layout.knob_names},
                   {"metrics", tm.layout.metric_names},
                   {"metric_columns", tm.layout.metric_columns}};
  std::vector<int> pass(tm.scaler.passthrough.begin(), tm.scaler.passthrough.end());
  doc["scaler"] = {{"means", to_json(tm.scaler.means)}, {"stds", to_json(tm.scaler.stds)}, {"passthrough", pass}};

  struct Visitor {
    json operator()(std::monostate) const { throw UsageError("cannot save an unfitted predictor"); }
    json operator()(const GprModel& m) const { return gpr_json(m); }
    json operator()(const RfModel& m) const { return rf_json(m); }
    json operator()(const MlpModel& m) const { return mlp_json(m); }
  };
  doc["model"] = std::visit(Visitor{}, tm.predictor.model());
  return doc.dump(1);
}

TrainedModel deserialize_model(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.value("format", std::string{}) != "knobtune-model") throw DataError("model file: unrecognized format");
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw DataError("model file: unsupported format_version " + std::to_string(version));

    const auto& p = doc.at("predictor");
    PredictorConfig cfg;
    cfg.kind = parse_predictor_kind(p.at("kind").get<std::string>());
    cfg.alpha = p.at("alpha").get<double>();
    cfg.trees = p.at("trees").get<std::size_t>();
    cfg.depth = p.at("depth").get<std::size_t>();
    cfg.hidden = p.at("hidden").get<std::size_t>();
    cfg.epochs = p.at("epochs").get<std::size_t>();
    cfg.batch_size = p.at("batch_size").get<std::size_t>();
    cfg.seed = p.at("seed").get<std::uint64_t>();

    FeatureLayout layout;
    layout.knob_names = doc.at("layout").at("knobs").get<std::vector<std::string>>();
    layout.metric_names = doc.at("layout").at("metrics").get<std::vector<std::string>>();
    layout.metric_columns = doc.at("layout").at("metric_columns").get<std::vector<std::size_t>>();

    StandardScaler scaler;
    scaler.means = vector_from(doc.at("scaler").at("means"));
    scaler.stds = vector_from(doc.at("scaler").at("stds"));
    for (int v : doc.at("scaler").at("passthrough").get<std::vector<int>>()) scaler.passthrough.push_back(v != 0);
    if (scaler.size() != layout.size() || scaler.stds.size() != scaler.means.size() ||
        scaler.passthrough.size() != scaler.size())
      throw DataError("model file: scaler does not match feature layout");

    const auto& m = doc.at("model");
    Predictor::Model model;
    switch (cfg.kind) {
      case PredictorKind::gpr: model = gpr_from(m); break;
      case PredictorKind::rf: model = rf_from(m); break;
      case PredictorKind::nn: model = mlp_from(m); break;
    }
    return TrainedModel{std::move(layout), std::move(scaler), Predictor::from_model(cfg, std::move(model))};
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << serialize_model(model) << '\n';
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace knobtune
