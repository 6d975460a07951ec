#include <gtest/gtest.h>

#include <set>

#include "helpers.hpp"
#include "knobtune/error.hpp"
#include "knobtune/factors.hpp"
#include "knobtune/synth.hpp"

using namespace knobtune;
using testing_support::TempDir;

namespace {

// metrics x configs over every offline observation
oracle::Mat offline_metric_rows(const Corpus& c) {
  oracle::Mat rows(c.schema->metric_names.size());
  for (const auto& t : c.offline)
    for (const auto& o : t.observations)
      for (std::size_t m = 0; m < o.metrics.size(); ++m) rows[m].push_back(o.metrics[m]);
  return rows;
}

std::string dir_digest(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(std::filesystem::relative(e.path(), root));
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += f.string() + "\n" + testing_support::read_file(root / f);
  return all;
}

}  // namespace

TEST(SynthSpec, Validation) {
  SynthSpec s;
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.n_metrics(), 32u);
  s.n_latent = 0;
  EXPECT_THROW(s.validate(), UsageError);
  s = {};
  s.noise_std = -1.0;
  EXPECT_THROW(s.validate(), UsageError);
}

TEST(SynthSpec, ReadJson) {
  TempDir dir;
  testing_support::write_file(dir / "s.json", R"({"n_offline": 7, "noise_std": 0.5, "seed": 3})");
  const SynthSpec s = read_synth_spec(dir / "s.json");
  EXPECT_EQ(s.n_offline, 7u);
  EXPECT_EQ(s.noise_std, 0.5);
  EXPECT_EQ(s.seed, 3u);
  EXPECT_EQ(s.n_latent, SynthSpec{}.n_latent);
  testing_support::write_file(dir / "bad.json", R"({"n_ofline": 7})");
  EXPECT_THROW(read_synth_spec(dir / "bad.json"), UsageError);
  testing_support::write_file(dir / "neg.json", R"({"n_offline": -2})");
  EXPECT_THROW(read_synth_spec(dir / "neg.json"), UsageError);
}

TEST(Synth, ShapeAndIds) {
  SynthSpec s;
  s.n_offline = 6;
  s.n_online = 3;
  s.rows_per_workload = 4;
  s.n_knobs = 2;
  s.n_latent = 3;
  s.metrics_per_latent = 2;
  const SyntheticCorpus sc = generate_corpus(s);
  ASSERT_EQ(sc.corpus.offline.size(), 6u);
  EXPECT_EQ(sc.corpus.online_b.size(), 3u);
  EXPECT_EQ(sc.corpus.online_c.size(), 3u);
  EXPECT_EQ(sc.corpus.offline[0].workload_id, "offline_000");
  EXPECT_EQ(sc.corpus.online_c[2].workload_id, "c_002");
  EXPECT_EQ(sc.corpus.schema->metric_names.size(), 6u);
  EXPECT_EQ(sc.truth.latent_of_metric.size(), 6u);
  std::vector<int> per(3, 0);
  for (auto l : sc.truth.latent_of_metric) ++per[l];
  EXPECT_EQ(per, (std::vector<int>{2, 2, 2}));
  for (const auto& t : sc.corpus.offline) {
    EXPECT_EQ(t.size(), 4u);
    for (const auto& o : t.observations)
      for (double k : o.knobs) {
        EXPECT_GE(k, 0.0);
        EXPECT_LE(k, 1.0);
      }
  }
}

TEST(Synth, ZeroNoisePairsPerfectlyCorrelated) {
  SynthSpec s;
  s.noise_std = 0.0;
  s.metrics_per_latent = 2;
  const SyntheticCorpus sc = generate_corpus(s);
  const auto corr = oracle::correlation(offline_metric_rows(sc.corpus));
  for (std::size_t i = 0; i < corr.size(); ++i)
    for (std::size_t j = i + 1; j < corr.size(); ++j)
      if (sc.truth.latent_of_metric[i] == sc.truth.latent_of_metric[j]) EXPECT_NEAR(corr[i][j], 1.0, 1e-9);
}

TEST(Synth, EightLatentsGiveEightEigenvaluesAboveOne) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SynthSpec s;
    s.noise_std = 0.05;
    s.seed = seed;
    const SyntheticCorpus sc = generate_corpus(s);
    // Independent path: Jacobi on the sample correlation matrix.
    const auto ev = oracle::jacobi_eigenvalues(oracle::correlation(offline_metric_rows(sc.corpus)));
    EXPECT_EQ(std::count_if(ev.begin(), ev.end(), [](double v) { return v > 1.0; }), 8) << "seed " << seed;
    const FactorModel f = retain_significant(fit_factors(build_metric_matrix(sc.corpus.offline)));
    EXPECT_EQ(f.retained, 8u);
  }
}

TEST(Synth, LatenciesPositiveAndLawConsistent) {
  SynthSpec s;
  s.noise_std = 0.0;
  const SyntheticCorpus sc = generate_corpus(s);
  for (const auto* group : {&sc.corpus.offline, &sc.corpus.online_b, &sc.corpus.online_c})
    for (const auto& t : *group) {
      const LatencyLaw& law = sc.truth.latency_params.at(t.workload_id);
      for (const auto& o : t.observations) {
        EXPECT_GT(o.latency, 0.0);
        EXPECT_NEAR(o.latency, law(o.knobs), 1e-9 * o.latency);
      }
    }
  s.noise_std = 0.3;
  for (const auto& t : generate_corpus(s).corpus.offline)
    for (const auto& o : t.observations) EXPECT_GT(o.latency, 0.0);
}

TEST(Synth, NearestSourceIsExhaustiveArgmin) {
  SynthSpec s;
  s.n_online = 20;
  const SyntheticCorpus sc = generate_corpus(s);
  for (const auto& [id, nearest] : sc.truth.nearest_source_of) {
    const auto& p = sc.truth.profiles.at(id);
    double best = 1e300;
    std::string arg;
    for (const auto& t : sc.corpus.offline) {
      const double d = oracle::sqdist(p, sc.truth.profiles.at(t.workload_id));
      if (d < best) {
        best = d;
        arg = t.workload_id;
      }
    }
    EXPECT_EQ(nearest, arg);
    EXPECT_EQ(nearest, sc.truth.planted_source_of.at(id));
  }
}

TEST(Synth, DeterministicBytes) {
  TempDir a, b;
  SynthSpec s;
  s.seed = 99;
  write_corpus(generate_corpus(s).corpus, a.path());
  write_corpus(generate_corpus(s).corpus, b.path());
  EXPECT_EQ(dir_digest(a.path()), dir_digest(b.path()));
  TempDir c;
  s.seed = 100;
  write_corpus(generate_corpus(s).corpus, c.path());
  EXPECT_NE(dir_digest(a.path()), dir_digest(c.path()));
}

TEST(Synth, WriteThenLoadReproducesCorpus) {
  TempDir dir;
  SynthSpec s;
  s.n_offline = 58;
  s.rows_per_workload = 3;
  const SyntheticCorpus sc = generate_corpus(s);
  const auto manifest = write_corpus(sc.corpus, dir / "corpus");
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "corpus" / "offline")) files += e.is_regular_file();
  EXPECT_EQ(files, 58u);
  const Corpus back = load_corpus(manifest);
  EXPECT_EQ(*back.schema, *sc.corpus.schema);
  auto same = [](const std::vector<WorkloadTable>& x, const std::vector<WorkloadTable>& y) {
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_EQ(x[i].workload_id, y[i].workload_id);
      EXPECT_EQ(x[i].observations, y[i].observations);
    }
  };
  same(back.offline, sc.corpus.offline);
  same(back.online_b, sc.corpus.online_b);
  same(back.online_c, sc.corpus.online_c);
}

TEST(Synth, UnwritableDirectoryNamesPath) {
  TempDir dir;
  testing_support::write_file(dir / "blocker", "x");
  try {
    write_corpus(generate_corpus(SynthSpec{}).corpus, dir / "blocker" / "out");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("blocker"), std::string::npos);
  }
}
