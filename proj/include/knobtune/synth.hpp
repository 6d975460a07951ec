#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "knobtune/ingest.hpp"

namespace knobtune {

struct SynthSpec {
  std::size_t n_offline = 20;
  std::size_t n_online = 5;  // per online group (B and C)
  std::size_t rows_per_workload = 20;
  std::size_t n_knobs = 4;
  std::size_t n_latent = 8;
  std::size_t metrics_per_latent = 4;
  double noise_std = 0.05;
  std::uint64_t seed = 0;

  std::size_t n_metrics() const { return n_latent * metrics_per_latent; }
  /// Throws UsageError when a count is zero or noise_std is negative.
  void validate() const;
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
SynthSpec read_synth_spec(const std::filesystem::path& path);

/// latency = base + sum_j curvature_j (x_j - optimum_j)^2
struct LatencyLaw {
  double base = 0.0;
  std::vector<double> optimum;
  std::vector<double> curvature;

  double operator()(const std::vector<double>& knobs) const;
};

struct GroundTruth {
  std::vector<std::size_t> latent_of_metric;
  std::map<std::string, std::string> planted_source_of;  // online id -> offline id it copies
  std::map<std::string, std::string> nearest_source_of;  // by exhaustive profile distance
  std::map<std::string, LatencyLaw> latency_params;
  std::map<std::string, std::vector<double>> profiles;
};

struct SyntheticCorpus {
  Corpus corpus;
  GroundTruth truth;
};

/// Ids are offline_NNN, b_NNN and c_NNN; metrics m000.., knobs k00..
/// Each metric is a positive loading times one latent signal plus an offset
/// and Gaussian noise. A latent signal is the workload's profile coordinate
/// plus a small smooth function of the knobs. Online workloads copy the
/// profile and latency law of a planted offline workload with small
/// perturbations. Same spec gives the same corpus.
SyntheticCorpus generate_corpus(const SynthSpec& spec);

/// One CSV per workload under dir/{offline,online_b,online_c} plus
/// dir/manifest.json, whose path is returned.
std::filesystem::path write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace knobtune
