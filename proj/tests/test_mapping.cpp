#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "knobtune/error.hpp"
#include "knobtune/mapping.hpp"
#include "knobtune/synth.hpp"

using namespace knobtune;

namespace {

std::shared_ptr<const Schema> schema2() {
  auto s = std::make_shared<Schema>();
  s->knob_names = {"k0", "k1"};
  s->metric_names = {"m0", "m1"};
  s->latency_name = "lat";
  s->workload_id_name = "wid";
  return s;
}

WorkloadTable table(const std::string& id, const std::vector<std::array<double, 4>>& rows) {
  WorkloadTable t{id, {}, schema2()};
  for (const auto& r : rows) t.observations.push_back({{r[0], r[1]}, {r[2], r[3]}, 100.0});
  return t;
}

StandardScaler identity_scaler(std::size_t n) {
  StandardScaler s;
  s.means = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  s.stds = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  s.passthrough.assign(n, false);
  return s;
}

WorkloadScore score_of(std::span<const WorkloadScore> scores, const std::string& id) {
  for (const auto& s : scores)
    if (s.source_workload_id == id) return s;
  throw std::runtime_error("missing " + id);
}

}  // namespace

TEST(ScoreWorkloads, SelfScoreIsZero) {
  const WorkloadTable t = table("t", {{0, 0, 1, 2}, {1, 1, 3, 4}, {0.5, 0.2, -1, 0}});
  const FeatureLayout layout = full_layout(*t.schema);
  const StandardScaler scaler = fit_scaler(t.observations, layout);
  const std::vector<WorkloadTable> sources{t};
  const auto scores = score_workloads(t, sources, layout, scaler);
  EXPECT_EQ(scores[0].score, 0.0);
  EXPECT_EQ(scores[0].pairing, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(ScoreWorkloads, HandEvaluatedSingleMetric) {
  const WorkloadTable t = table("t", {{0, 0, 3, 0}});
  const std::vector<WorkloadTable> sources{table("s", {{0, 0, 0, 0}})};
  const FeatureLayout layout = feature_layout(*t.schema, std::vector<std::string>{"m0"});
  const auto scores = score_workloads(t, sources, layout, identity_scaler(3));
  EXPECT_EQ(scores[0].per_metric_distance, (std::vector<double>{3.0}));
  EXPECT_EQ(scores[0].score, 3.0);
}

TEST(ScoreWorkloads, PairsByNearestKnobsAndAveragesMetrics) {
  const WorkloadTable t = table("t", {{0, 0, 1, 1}, {1, 1, 2, 2}});
  // Source rows in reverse knob order; pairing must follow knobs, not position.
  const std::vector<WorkloadTable> sources{table("s", {{0.9, 1, 2, 5}, {0.1, 0, 1, -3}})};
  const FeatureLayout layout = full_layout(*t.schema);
  const auto s = score_workloads(t, sources, layout, identity_scaler(4))[0];
  EXPECT_EQ(s.pairing, (std::vector<std::size_t>{1, 0}));
  EXPECT_DOUBLE_EQ(s.per_metric_distance[0], 0.0);
  EXPECT_DOUBLE_EQ(s.per_metric_distance[1], 5.0);  // sqrt(4^2 + 3^2)
  EXPECT_DOUBLE_EQ(s.score, 2.5);

  const auto mse = score_workloads(t, sources, layout, identity_scaler(4), MapScore::mse)[0];
  EXPECT_DOUBLE_EQ(mse.per_metric_distance[1], 12.5);
  const auto mape = score_workloads(t, sources, layout, identity_scaler(4), MapScore::mape)[0];
  EXPECT_DOUBLE_EQ(mape.per_metric_distance[1], 100.0 * (4.0 / 1.0 + 3.0 / 2.0) / 2.0);
}

TEST(ScoreWorkloads, MetricsAreScaledBeforeComparison) {
  const WorkloadTable t = table("t", {{0, 0, 10, 0}});
  const std::vector<WorkloadTable> sources{table("s", {{0, 0, 0, 0}})};
  StandardScaler scaler = identity_scaler(4);
  scaler.stds(2) = 5.0;
  const auto s = score_workloads(t, sources, full_layout(*t.schema), scaler)[0];
  EXPECT_DOUBLE_EQ(s.per_metric_distance[0], 2.0);
}

TEST(ScoreWorkloads, CopyBeatsPerturbed) {
  const WorkloadTable t = table("t", {{0, 0, 1, 2}, {1, 0, 2, 3}});
  WorkloadTable perturbed = t;
  perturbed.workload_id = "p";
  perturbed.observations[1].metrics[0] += 0.01;
  WorkloadTable copy = t;
  copy.workload_id = "z";
  const std::vector<WorkloadTable> sources{perturbed, copy};
  const auto scores = score_workloads(t, sources, full_layout(*t.schema), identity_scaler(4));
  EXPECT_LT(score_of(scores, "z").score, score_of(scores, "p").score);
  EXPECT_EQ(nearest_workload(scores), "z");
}

TEST(ScoreWorkloads, ScoreIsMeanOfDistances) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  auto random_table = [&](const std::string& id) {
    std::vector<std::array<double, 4>> rows(6);
    for (auto& r : rows)
      for (double& v : r) v = nd(rng);
    return table(id, rows);
  };
  const WorkloadTable t = random_table("t");
  const std::vector<WorkloadTable> sources{random_table("a"), random_table("b")};
  for (auto v : {MapScore::euclid, MapScore::mse, MapScore::mape})
    for (const auto& s : score_workloads(t, sources, full_layout(*t.schema), identity_scaler(4), v))
      EXPECT_NEAR(s.score, (s.per_metric_distance[0] + s.per_metric_distance[1]) / 2.0, 1e-9);
}

TEST(ScoreWorkloads, Errors) {
  const WorkloadTable t = table("t", {{0, 0, 1, 2}});
  const std::vector<WorkloadTable> sources{t};
  const FeatureLayout knobs_only = feature_layout(*t.schema, std::vector<std::string>{});
  EXPECT_THROW(score_workloads(t, sources, knobs_only, identity_scaler(2)), UsageError);
  const WorkloadTable empty{"e", {}, t.schema};
  EXPECT_THROW(score_workloads(empty, sources, full_layout(*t.schema), identity_scaler(4)), DataError);
  const std::vector<WorkloadTable> bad_sources{empty};
  EXPECT_THROW(score_workloads(t, bad_sources, full_layout(*t.schema), identity_scaler(4)), DataError);
  EXPECT_THROW(parse_map_score("cosine"), UsageError);
  EXPECT_EQ(parse_map_score("mse"), MapScore::mse);
}

TEST(NearestWorkload, ArgminAndTies) {
  std::vector<WorkloadScore> s(2);
  s[0].source_workload_id = "A";
  s[1].source_workload_id = "B";
  s[0].score = 2.0;
  s[1].score = 1.0;
  EXPECT_EQ(nearest_workload(s), "B");
  s[0].score = 1.0;
  EXPECT_EQ(nearest_workload(s), "A");
  std::swap(s[0], s[1]);
  EXPECT_EQ(nearest_workload(s), "A");
  EXPECT_THROW(nearest_workload(std::vector<WorkloadScore>{}), UsageError);
}

TEST(Augment, ConflictRules) {
  const WorkloadTable t = table("t", {{0, 0, 1, 1}, {1, 1, 2, 2}});
  const WorkloadTable disjoint = table("s", {{2, 2, 0, 0}, {3, 3, 0, 0}});
  Augmented a = augment(t, disjoint);
  EXPECT_EQ(a.table.size(), 4u);
  EXPECT_EQ(a.conflicts_dropped, 0u);
  EXPECT_EQ(a.table.workload_id, "t");

  const WorkloadTable clash = table("s", {{2, 2, 0, 0}, {1, 1 + 1e-12, 9, 9}, {3, 3, 5, 5}});
  a = augment(t, clash);
  EXPECT_EQ(a.conflicts_dropped, 1u);
  ASSERT_EQ(a.table.size(), 4u);
  EXPECT_EQ(a.table.observations[1].metrics, (std::vector<double>{2, 2}));  // target row kept
  EXPECT_EQ(a.table.observations[2].knobs, (std::vector<double>{2, 2}));
  EXPECT_EQ(a.table.observations[3].knobs, (std::vector<double>{3, 3}));

  a = augment(t, t);
  EXPECT_EQ(a.table.observations, t.observations);
  EXPECT_EQ(a.conflicts_dropped, 2u);
}

TEST(Augment, SurvivorsDropNothingFurther) {
  const WorkloadTable t = table("t", {{0, 0, 1, 1}, {1, 1, 2, 2}});
  const WorkloadTable s = table("s", {{2, 2, 0, 0}, {1, 1, 9, 9}, {0, 0, 5, 5}, {3, 3, 5, 5}});
  const Augmented first = augment(t, s);
  WorkloadTable survivors{"s", {first.table.observations.begin() + 2, first.table.observations.end()}, s.schema};
  EXPECT_EQ(augment(t, survivors).conflicts_dropped, 0u);
}

TEST(MapAndAugment, ComposesAndIsOrderIndependent) {
  const WorkloadTable t = table("t", {{0, 0, 1, 1}, {0.5, 0.5, 2, 2}});
  std::vector<WorkloadTable> sources{table("far", {{0, 0, 50, 50}}),
                                     table("near", {{0.1, 0, 1.1, 1}, {0.4, 0.6, 2, 2.1}, {3, 3, 0, 0}})};
  const FeatureLayout layout = full_layout(*t.schema);
  const MappingResult r = map_and_augment(sources, t, layout, identity_scaler(4));
  EXPECT_EQ(r.chosen_source, "near");
  EXPECT_EQ(r.augmented.size(), 5u);
  EXPECT_EQ(r.scores.size(), 2u);
  std::reverse(sources.begin(), sources.end());
  EXPECT_EQ(map_and_augment(sources, t, layout, identity_scaler(4)).chosen_source, "near");
  sources.push_back(table("distant", {{0, 0, 1e6, 1e6}}));
  EXPECT_EQ(map_and_augment(sources, t, layout, identity_scaler(4)).chosen_source, "near");
  const std::vector<WorkloadTable> only{sources.front()};
  EXPECT_EQ(map_and_augment(only, t, layout, identity_scaler(4)).chosen_source, only.front().workload_id);
}

TEST(MapAndAugment, FiveTargetRowsPlusTwelveSourceRows) {
  std::vector<std::array<double, 4>> trows, srows;
  for (int i = 0; i < 5; ++i) trows.push_back({double(i), 0, 1, 1});
  for (int i = 0; i < 12; ++i) srows.push_back({double(i) + 0.5, 1, 1, 1});
  const std::vector<WorkloadTable> sources{table("s", srows)};
  const WorkloadTable t = table("t", trows);
  EXPECT_EQ(map_and_augment(sources, t, full_layout(*t.schema), identity_scaler(4)).augmented.size(), 17u);
}

TEST(MapAndAugment, MatchesGeneratorGroundTruth) {
  SynthSpec spec;
  spec.n_offline = 100;
  spec.n_online = 10;
  spec.rows_per_workload = 6;
  spec.seed = 21;
  const SyntheticCorpus sc = generate_corpus(spec);
  const FeatureLayout layout = full_layout(*sc.corpus.schema);
  std::vector<Observation> rows;
  for (const auto& t : sc.corpus.offline) rows.insert(rows.end(), t.observations.begin(), t.observations.end());
  const StandardScaler scaler = fit_scaler(rows, layout);
  int hits = 0;
  for (const auto& target : sc.corpus.online_b) {
    const auto r = map_and_augment(sc.corpus.offline, target, layout, scaler);
    hits += r.chosen_source == sc.truth.nearest_source_of.at(target.workload_id);
  }
  EXPECT_GE(hits, 9);
}

TEST(MapReport, Csv) {
  testing_support::TempDir dir;
  const WorkloadTable t = table("t", {{0, 0, 1, 1}});
  const std::vector<WorkloadTable> sources{table("a", {{0, 0, 1, 1}}), table("b", {{0, 0, 2, 2}})};
  const std::vector<MappingResult> results{map_and_augment(sources, t, full_layout(*t.schema), identity_scaler(4))};
  write_map_report(results, dir / "m.csv");
  EXPECT_EQ(testing_support::read_file(dir / "m.csv"),
            "target_id,source_id,score,chosen,conflicts_dropped\nt,a,0,1,1\nt,b,1,0,0\n");
}
