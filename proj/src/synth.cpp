#include "knobtune/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <random>

#include "knobtune/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace knobtune {

namespace {

constexpr double kKnobEffect = 0.3;
constexpr double kProfileJitter = 0.1;
constexpr double kLawJitter = 0.02;

std::string numbered(std::string_view prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, i);
  return std::string(prefix) + buf;
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double sd = 1.0) { return sd == 0.0 ? 0.0 : std::normal_distribution<double>(0.0, sd)(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Offline profiles with exactly uncorrelated, unit-variance columns when
// there are enough workloads; plain Gaussian draws otherwise.
Eigen::MatrixXd offline_profiles(std::size_t n, std::size_t latent, Sampler& s) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(latent));
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) = s.normal();
  if (n <= latent) return p;
  const Eigen::MatrixXd centered = p.rowwise() - p.colwise().mean();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(centered);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p.rows(), p.cols());
  // Keep each column's orientation aligned with the original draw.
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (q.col(j).dot(centered.col(j)) < 0.0) q.col(j) *= -1.0;
  return q * std::sqrt(static_cast<double>(n));
}

struct KnobEffect {
  std::vector<double> weights;
  double phase = 0.0;
};

struct Generator {
  const SynthSpec& spec;
  Sampler s;
  std::vector<KnobEffect> effects;
  std::vector<double> loadings, offsets;
  GroundTruth truth;
  std::shared_ptr<Schema> schema;

  Generator(const SynthSpec& sp) : spec(sp), s(sp.seed), schema(std::make_shared<Schema>()) {}

  double latent_signal(std::size_t l, const std::vector<double>& profile, const std::vector<double>& knobs) const {
    const auto& e = effects[l];
    double arg = e.phase;
    for (std::size_t j = 0; j < knobs.size(); ++j) arg += e.weights[j] * knobs[j];
    return profile[l] + kKnobEffect * std::sin(arg);
  }

  WorkloadTable table(const std::string& id, const std::vector<double>& profile, const LatencyLaw& law) {
    WorkloadTable t;
    t.workload_id = id;
    t.schema = schema;
    for (std::size_t r = 0; r < spec.rows_per_workload; ++r) {
      Observation o;
      for (std::size_t j = 0; j < spec.n_knobs; ++j) o.knobs.push_back(s.uniform(0.0, 1.0));
      std::vector<double> latent(spec.n_latent);
      for (std::size_t l = 0; l < spec.n_latent; ++l) latent[l] = latent_signal(l, profile, o.knobs);
      for (std::size_t m = 0; m < spec.n_metrics(); ++m)
        o.metrics.push_back(loadings[m] * latent[truth.latent_of_metric[m]] + offsets[m] + s.normal(spec.noise_std));
      o.latency = std::max(1.0, law(o.knobs) * (1.0 + s.normal(spec.noise_std)));
      t.observations.push_back(std::move(o));
    }
    truth.profiles[id] = profile;
    truth.latency_params[id] = law;
    return t;
  }

  LatencyLaw fresh_law() {
    LatencyLaw law;
    law.base = s.uniform(80.0, 120.0);
    for (std::size_t j = 0; j < spec.n_knobs; ++j) {
      law.optimum.push_back(s.uniform(0.1, 0.9));
      law.curvature.push_back(s.uniform(10.0, 40.0));
    }
    return law;
  }

  LatencyLaw perturbed(const LatencyLaw& src) {
    LatencyLaw law = src;
    law.base *= 1.0 + s.normal(kLawJitter / 2.0);
    for (std::size_t j = 0; j < spec.n_knobs; ++j) {
      law.optimum[j] = std::clamp(law.optimum[j] + s.normal(kLawJitter), 0.0, 1.0);
      law.curvature[j] *= 1.0 + s.normal(kLawJitter);
    }
    return law;
  }
};

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_offline == 0 || n_online == 0 || rows_per_workload == 0 || n_knobs == 0 || n_latent == 0 ||
      metrics_per_latent == 0)
    throw UsageError("synth spec: every count must be at least 1");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw UsageError("synth spec: noise_std must be >= 0");
}

SynthSpec read_synth_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open synth spec '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("synth spec '" + path.string() + "': " + e.what());
  }
  if (!doc.is_object()) throw DataError("synth spec '" + path.string() + "': expected a JSON object");
  SynthSpec spec;
  auto count = [&](const std::string& key, std::size_t& field) {
    if (!doc.contains(key)) return;
    if (!doc[key].is_number_unsigned()) throw UsageError("synth spec: '" + key + "' must be a non-negative integer");
    field = doc[key].get<std::size_t>();
  };
  for (const auto& [key, value] : doc.items()) {
    static const std::vector<std::string> known{"n_offline", "n_online", "rows_per_workload", "n_knobs",
                                                "n_latent", "metrics_per_latent", "noise_std", "seed"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw UsageError("synth spec: unknown key '" + key + "'");
  }
  count("n_offline", spec.n_offline);
  count("n_online", spec.n_online);
  count("rows_per_workload", spec.rows_per_workload);
  count("n_knobs", spec.n_knobs);
  count("n_latent", spec.n_latent);
  count("metrics_per_latent", spec.metrics_per_latent);
  if (doc.contains("noise_std")) {
    if (!doc["noise_std"].is_number()) throw UsageError("synth spec: 'noise_std' must be a number");
    spec.noise_std = doc["noise_std"].get<double>();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer()) throw UsageError("synth spec: 'seed' must be an integer");
    spec.seed = doc["seed"].get<std::uint64_t>();
  }
  spec.validate();
  return spec;
}

double LatencyLaw::operator()(const std::vector<double>& knobs) const {
  double v = base;
  for (std::size_t j = 0; j < knobs.size(); ++j) v += curvature[j] * (knobs[j] - optimum[j]) * (knobs[j] - optimum[j]);
  return v;
}

SyntheticCorpus generate_corpus(const SynthSpec& spec) {
  spec.validate();
  Generator g(spec);
  Sampler& s = g.s;

  for (std::size_t j = 0; j < spec.n_knobs; ++j) g.schema->knob_names.push_back(numbered("k", j, 2));
  for (std::size_t m = 0; m < spec.n_metrics(); ++m) g.schema->metric_names.push_back(numbered("m", m, 3));
  g.schema->latency_name = "latency";
  g.schema->workload_id_name = "workload_id";

  // Metric-to-latent assignment is shuffled so groups are not contiguous.
  for (std::size_t m = 0; m < spec.n_metrics(); ++m) g.truth.latent_of_metric.push_back(m % spec.n_latent);
  std::shuffle(g.truth.latent_of_metric.begin(), g.truth.latent_of_metric.end(), s.engine());
  for (std::size_t m = 0; m < spec.n_metrics(); ++m) {
    g.loadings.push_back(s.uniform(0.5, 2.0));
    g.offsets.push_back(s.uniform(-5.0, 5.0));
  }
  for (std::size_t l = 0; l < spec.n_latent; ++l) {
    KnobEffect e;
    for (std::size_t j = 0; j < spec.n_knobs; ++j) e.weights.push_back(s.normal(2.0));
    e.phase = s.uniform(0.0, 2.0 * std::numbers::pi);
    g.effects.push_back(std::move(e));
  }

  SyntheticCorpus out;
  const Eigen::MatrixXd profiles = offline_profiles(spec.n_offline, spec.n_latent, s);
  std::vector<std::string> offline_ids;
  for (std::size_t w = 0; w < spec.n_offline; ++w) {
    std::vector<double> profile(spec.n_latent);
    for (std::size_t l = 0; l < spec.n_latent; ++l)
      profile[l] = profiles(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(l));
    offline_ids.push_back(numbered("offline_", w, 3));
    const LatencyLaw law = g.fresh_law();
    out.corpus.offline.push_back(g.table(offline_ids.back(), profile, law));
  }

  auto online = [&](std::string_view prefix, std::vector<WorkloadTable>& dest) {
    for (std::size_t w = 0; w < spec.n_online; ++w) {
      const std::string& plant = offline_ids[s.index(offline_ids.size())];
      std::vector<double> profile = g.truth.profiles.at(plant);
      for (double& p : profile) p += s.normal(kProfileJitter);
      const LatencyLaw law = g.perturbed(g.truth.latency_params.at(plant));
      const std::string id = numbered(prefix, w, 3);
      g.truth.planted_source_of[id] = plant;
      dest.push_back(g.table(id, profile, law));

      std::string nearest = offline_ids.front();
      double best = squared_distance(profile, g.truth.profiles.at(nearest));
      for (const auto& oid : offline_ids) {
        const double d = squared_distance(profile, g.truth.profiles.at(oid));
        if (d < best) {
          best = d;
          nearest = oid;
        }
      }
      g.truth.nearest_source_of[id] = nearest;
    }
  };
  online("b_", out.corpus.online_b);
  online("c_", out.corpus.online_c);

  out.corpus.schema = g.schema;
  out.truth = std::move(g.truth);
  return out;
}

fs::path write_corpus(const Corpus& corpus, const fs::path& dir) {
  if (!corpus.schema) throw UsageError("write_corpus: corpus has no schema");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory '" + dir.string() + "'");

  Manifest manifest;
  manifest.schema = *corpus.schema;
  auto emit = [&](const std::vector<WorkloadTable>& tables, const std::string& sub, std::vector<fs::path>& files) {
    for (const auto& t : tables) {
      const fs::path p = dir / sub / (t.workload_id + ".csv");
      write_workload_csv(t, p);
      files.push_back(p);
    }
  };
  emit(corpus.offline, "offline", manifest.files.offline);
  emit(corpus.online_b, "online_b", manifest.files.online_b);
  emit(corpus.online_c, "online_c", manifest.files.online_c);
  const fs::path manifest_path = dir / "manifest.json";
  write_manifest(manifest, manifest_path);
  return manifest_path;
}

}  // namespace knobtune
