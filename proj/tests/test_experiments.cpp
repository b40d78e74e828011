#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rskpca/experiments.hpp"
#include "support.hpp"

namespace rskpca {
namespace {

namespace fs = std::filesystem;

ExperimentSpec small_spec(ExperimentKind kind) {
  ExperimentSpec s;
  s.experiment = kind;
  s.sigma = 1.0;
  s.ell_min = 3.0;
  s.ell_max = 3.4;
  s.ell_step = 0.2;
  s.methods = default_methods(kind);
  s.repetitions = 2;
  s.rank = 3;
  s.folds = 3;
  s.timing_repeats = 0;
  s.seed = 11;
  return s;
}

DataSet blobs(Index n, Index clusters, double spread, std::uint64_t seed) {
  return synth_blobs(n, 2, clusters, spread, seed, 5.0);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("rskpca_exp_" + std::to_string(::getpid()) + "_" + tag)) {
    fs::remove_all(path_);
  }
  ~ScratchDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(SpecGrid, DefaultSweepHasTwentyOnePoints) {
  const ExperimentSpec s;
  const auto grid = s.ell_grid();
  ASSERT_EQ(grid.size(), 21u);
  EXPECT_EQ(grid.front(), 3.0);
  EXPECT_EQ(grid[5], 3.5);
  EXPECT_EQ(grid.back(), 5.0);
  EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end()));
}

TEST(ParseSpec, DefaultsAndOverrides) {
  const auto s = parse_spec(nlohmann::json{{"experiment", "classification"},
                                           {"dataset.synthetic", "blobs"},
                                           {"kernel.sigma", 2.5},
                                           {"knn.k", 5},
                                           {"seed", 7}});
  EXPECT_EQ(s.experiment, ExperimentKind::Classification);
  EXPECT_EQ(s.methods, default_methods(ExperimentKind::Classification));
  EXPECT_EQ(s.sigma, 2.5);
  EXPECT_EQ(s.knn_k, 5);
  EXPECT_EQ(s.rank, 5);
  EXPECT_EQ(s.folds, 10);
  EXPECT_EQ(s.seed, 7u);
}

TEST(ParseSpec, RejectsUnknownKey) {
  EXPECT_THROW(parse_spec(nlohmann::json{{"sweep.ell_mn", 3.0}}), InputError);
}

TEST(ParseSpec, RejectsUnknownMethod) {
  EXPECT_THROW(parse_spec(nlohmann::json{{"methods", {"shadow", "pca"}}}), InputError);
}

TEST(ParseSpec, RejectsBadValues) {
  EXPECT_THROW(parse_spec(nlohmann::json{{"repetitions", 0}}), InputError);
  EXPECT_THROW(parse_spec(nlohmann::json{{"sweep.ell_min", 5.0}, {"sweep.ell_max", 3.0}}), InputError);
  EXPECT_THROW(parse_spec(nlohmann::json{{"rank", "five"}}), InputError);
  EXPECT_THROW(parse_spec(nlohmann::json::array()), InputError);
}

TEST(ParseSpec, MissingSigmaForUnknownDatasetIsAnError) {
  ExperimentSpec s;
  EXPECT_THROW(s.kernel(blobs(10, 1, 1.0, 1)), InputError);
  DataSet named = blobs(10, 1, 1.0, 1);
  named.name = "german";
  EXPECT_EQ(s.kernel(named).sigma(), 30.0);
}

TEST(EmbeddingExperiment, FullAgainstItselfHasZeroError) {
  ExperimentSpec s = small_spec(ExperimentKind::Embedding);
  s.methods = {"full"};
  const auto r = run_embedding_experiment(s, blobs(120, 4, 0.5, 1));
  ASSERT_EQ(r.rows.size(), s.ell_grid().size());
  for (const auto& row : r.rows) {
    EXPECT_LT(row.embedding_error, 1e-10);
    EXPECT_EQ(row.eigenvalue_error, 0.0);
    EXPECT_EQ(row.retained_fraction, 1.0);
  }
}

TEST(EmbeddingExperiment, RowCountIsGridTimesMethods) {
  const ExperimentSpec s = small_spec(ExperimentKind::Embedding);
  const auto r = run_embedding_experiment(s, blobs(150, 5, 0.3, 2));
  EXPECT_EQ(r.rows.size(), s.ell_grid().size() * s.methods.size());
  EXPECT_EQ(r.records.size(), r.rows.size() * static_cast<std::size_t>(s.repetitions));
  for (const auto& row : r.rows) {
    EXPECT_GT(row.retained_fraction, 0.0);
    EXPECT_LE(row.retained_fraction, 1.0);
  }
}

TEST(EmbeddingExperiment, ComparisonMethodsUseTheMeanShadowCount) {
  const ExperimentSpec s = small_spec(ExperimentKind::Embedding);
  const auto r = run_embedding_experiment(s, blobs(150, 5, 0.3, 2));
  for (const double ell : r.ells) {
    const double shadow_m = r.row("shadow", ell)->m;
    for (const char* method : {"subsampled", "nystrom", "wnystrom"}) {
      EXPECT_NEAR(r.row(method, ell)->m, shadow_m, 0.5 + 1e-12) << method << " ell=" << ell;
    }
  }
}

TEST(EmbeddingExperiment, ShadowBeatsSubsamplingOnDuplicatedData) {
  // Every point appears four times: shadow collapses duplicates, a uniform
  // subsample of the same size keeps redundant copies and misses regions.
  const DataSet base = blobs(100, 6, 0.6, 3);
  DataSet dup;
  dup.name = "dup";
  dup.points.resize(400, 2);
  for (Index i = 0; i < 400; ++i) dup.points.row(i) = base.points.row(i % 100);
  ExperimentSpec s = small_spec(ExperimentKind::Embedding);
  s.ell_min = s.ell_max = 5.0;
  s.methods = {"shadow", "subsampled"};
  s.repetitions = 4;
  const auto r = run_embedding_experiment(s, dup);
  EXPECT_LT(r.row("shadow", 5.0)->embedding_error, r.row("subsampled", 5.0)->embedding_error);
}

TEST(EmbeddingExperiment, ShadowRetentionNonDecreasingOnClusteredData) {
  ExperimentSpec s = small_spec(ExperimentKind::Embedding);
  s.ell_max = 5.0;
  s.methods = {"shadow"};
  const auto r = run_embedding_experiment(s, blobs(300, 8, 0.4, 4));
  for (std::size_t e = 1; e < r.ells.size(); ++e) {
    EXPECT_GE(r.rows[e].retained_fraction, r.rows[e - 1].retained_fraction);
  }
}

TEST(ClassificationExperiment, ConstantLabelsGiveFullAccuracy) {
  DataSet ds = blobs(90, 3, 0.5, 5);
  std::fill(ds.labels->begin(), ds.labels->end(), 4);
  const auto r = run_classification_experiment(small_spec(ExperimentKind::Classification), ds);
  for (const auto& row : r.rows) EXPECT_EQ(row.accuracy, 1.0) << row.method;
}

TEST(ClassificationExperiment, IdentityReductionMatchesFullPipeline) {
  const DataSet ds = synth_blobs(90, 2, 3, 1.0, 6, 4.0);
  ExperimentSpec s = small_spec(ExperimentKind::Classification);
  const double ell = testing::identity_ell(KernelConfig(KernelFamily::Gaussian, 1.0), ds.points);
  s.ell_min = s.ell_max = ell;
  s.methods = {"full", "shadow"};
  const auto r = run_classification_experiment(s, ds);
  EXPECT_EQ(r.row("shadow", r.ells[0])->retained_fraction, 1.0);
  EXPECT_EQ(r.row("shadow", r.ells[0])->accuracy, r.row("full", r.ells[0])->accuracy);
}

TEST(ClassificationExperiment, AccuracyIsAProportion) {
  const DataSet ds = synth_blobs(120, 2, 4, 2.0, 7, 3.0);
  const auto r = run_classification_experiment(small_spec(ExperimentKind::Classification), ds);
  EXPECT_EQ(r.rows.size(), r.ells.size() * 4);
  for (const auto& row : r.rows) {
    EXPECT_GE(row.accuracy, 0.0);
    EXPECT_LE(row.accuracy, 1.0);
  }
}

TEST(ClassificationExperiment, MissingLabelsIsAnError) {
  DataSet ds = blobs(40, 2, 0.5, 8);
  ds.labels.reset();
  EXPECT_THROW(run_classification_experiment(small_spec(ExperimentKind::Classification), ds), InputError);
}

TEST(RsdeCompare, AllSelectorsComplete) {
  ExperimentSpec s = small_spec(ExperimentKind::RsdeCompare);
  const auto r = run_experiment(s, synth_blobs(120, 2, 4, 0.5, 9, 4.0));
  ASSERT_EQ(r.methods, (std::vector<std::string>{"shadow", "kmeans", "paring", "herding"}));
  for (const auto& row : r.rows) {
    EXPECT_GT(row.accuracy, 0.5) << row.method;
    EXPECT_NEAR(row.m, r.row("shadow", row.ell)->m, 0.5 + 1e-12) << row.method;
  }
}

TEST(BoundsExperiment, RandomDataSatisfiesEveryBound) {
  ExperimentSpec s = small_spec(ExperimentKind::Bounds);
  s.ell_min = 1.0;
  s.ell_max = 6.0;
  s.ell_step = 1.0;
  DataSet ds;
  ds.points = testing::random_points(60, 3, 10);
  const auto r = run_bounds_experiment(s, ds);
  EXPECT_EQ(r.bounds.size(), 4 * r.ells.size());
  for (const auto& b : r.bounds) {
    if (b.precondition_met) {
      ASSERT_TRUE(b.satisfied.has_value());
      EXPECT_TRUE(*b.satisfied) << to_string(b.theorem) << " ell=" << b.ell;
    } else {
      EXPECT_FALSE(b.satisfied.has_value());
    }
  }
  EXPECT_FALSE(r.any_violation());
}

TEST(BoundsExperiment, IdentityReductionRowIsAllZero) {
  DataSet ds;
  ds.points = testing::random_points(25, 2, 11);
  ExperimentSpec s = small_spec(ExperimentKind::Bounds);
  s.ell_min = s.ell_max = testing::identity_ell(KernelConfig(KernelFamily::Gaussian, 1.0), ds.points);
  const auto r = run_bounds_experiment(s, ds);
  ASSERT_EQ(r.bounds.size(), 4u);
  for (const auto& b : r.bounds) {
    EXPECT_EQ(b.m, 25);
    EXPECT_NEAR(b.empirical, 0.0, 1e-7) << to_string(b.theorem);
  }
}

TEST(EmitReport, EmptyTableWritesHeaderOnlyCsv) {
  ScratchDir dir("empty");
  ExperimentResult r;
  r.experiment = ExperimentKind::Classification;
  const auto files = emit_report(r, dir.path());
  ASSERT_FALSE(files.empty());
  EXPECT_EQ(files.front().filename(), "classification.csv");
  EXPECT_EQ(slurp(files.front()), trial_csv_header() + "\n");

  ExperimentResult b;
  b.experiment = ExperimentKind::Bounds;
  EXPECT_EQ(slurp(emit_report(b, dir.path()).front()), bound_csv_header() + "\n");
}

TEST(EmitReport, OnePlotFilePerPanel) {
  ScratchDir dir("panels");
  ExperimentSpec s = small_spec(ExperimentKind::Classification);
  s.timing_repeats = 1;
  s.timing_warmup = false;
  s.repetitions = 1;
  s.methods = {"full", "shadow"};
  const auto r = run_classification_experiment(s, blobs(60, 2, 0.5, 12));
  std::set<std::string> names;
  for (const auto& f : emit_report(r, dir.path())) names.insert(f.filename().string());
  const std::set<std::string> expected = {
      "classification.csv",           "classification_timing.csv",     "classification_accuracy.dat",
      "classification_retained.dat",  "classification_train_speedup.dat",
      "classification_test_speedup.dat", "classification_total_speedup.dat"};
  EXPECT_EQ(names, expected);
  const std::string acc = slurp(dir.path() / "classification_accuracy.dat");
  EXPECT_EQ(acc.substr(0, acc.find('\n')), "# ell full shadow");
  EXPECT_EQ(std::count(acc.begin(), acc.end(), '\n'), static_cast<long>(1 + r.ells.size()));
}

TEST(EmitReport, BoundsPanelsPerTheorem) {
  ScratchDir dir("bounds");
  DataSet ds;
  ds.points = testing::random_points(20, 2, 13);
  ExperimentSpec s = small_spec(ExperimentKind::Bounds);
  std::set<std::string> names;
  for (const auto& f : emit_report(run_bounds_experiment(s, ds), dir.path())) names.insert(f.filename().string());
  EXPECT_EQ(names, (std::set<std::string>{"bounds.csv", "bounds_mmd.dat", "bounds_eigen.dat", "bounds_hs.dat",
                                          "bounds_projection.dat"}));
  const std::string csv = slurp(dir.path() / "bounds.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "theorem_id,ell,sigma,n,m,D,empirical,bound,satisfied");
}

TEST(EmitReport, RerunsAreByteIdentical) {
  ScratchDir a("rerun_a"), b("rerun_b");
  const DataSet ds = blobs(100, 3, 0.5, 14);
  for (const ExperimentKind kind : {ExperimentKind::Embedding, ExperimentKind::RsdeCompare}) {
    ExperimentSpec s = small_spec(kind);
    s.threads = 3;
    const auto fa = emit_report(run_experiment(s, ds), a.path());
    s.threads = 1;
    const auto fb = emit_report(run_experiment(s, ds), b.path());
    ASSERT_EQ(fa.size(), fb.size());
    for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_EQ(slurp(fa[i]), slurp(fb[i])) << fa[i];
  }
}

TEST(EmitReport, UnwritablePathIsAnInputError) {
  ScratchDir dir("blocked");
  fs::create_directories(dir.path());
  const fs::path file = dir.path() / "plain_file";
  std::ofstream(file) << "x";
  ExperimentResult r;
  EXPECT_THROW(emit_report(r, file / "sub"), InputError);
}

TEST(LoadDataset, SyntheticBlobsFromSpec) {
  DatasetSpec d;
  d.synthetic = "blobs";
  d.n = 30;
  d.d = 3;
  d.clusters = 3;
  const DataSet ds = load_dataset(d, 1);
  EXPECT_EQ(ds.size(), 30);
  EXPECT_EQ(ds.dim(), 3);
  EXPECT_TRUE(ds.labeled());
  EXPECT_EQ(load_dataset(d, 1).points, ds.points);
}

}  // namespace
}  // namespace rskpca
