#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ultr/errors.h"
#include "ultr/experiment.h"

namespace ultr {
namespace {

namespace fs = std::filesystem;

ExperimentSpec tiny_spec() {
  ExperimentSpec spec;
  spec.dataset.n_train = 60;
  spec.dataset.n_validation = 15;
  spec.dataset.n_test = 60;
  spec.dataset.synthetic.seed = 3;
  spec.dataset.synthetic.n_candidates = 10;
  spec.dataset.synthetic.feature_dim = 5;
  spec.prod_fraction = 0.1;
  spec.n_clicks = {300, 600};
  spec.average_below = 500;
  spec.n_seeds = 2;
  spec.c_grid = {0.1, 1.0};
  spec.tau_grid = {1.0, 0.1, 0.0};
  spec.etas = {0.0, 1.0};
  spec.eps_minus_values = {0.0, 0.2};
  spec.assumed_etas = {0.0, 1.0};
  return spec;
}

std::string csv_of(const ExperimentResult& r) {
  std::ostringstream out;
  write_results_csv(r.rows, out);
  return out.str();
}

TEST(CsvTest, Rfc4180Quoting) {
  std::ostringstream out;
  write_csv_row(out, {"plain", "a,b", "say \"hi\"", "two\nlines", ""});
  EXPECT_EQ(out.str(), "plain,\"a,b\",\"say \"\"hi\"\"\",\"two\nlines\",\r\n");
}

TEST(SpecTest, Validation) {
  ExperimentSpec spec = tiny_spec();
  EXPECT_NO_THROW(spec.validate());
  spec.c_grid.clear();
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = tiny_spec();
  spec.tau_grid = {1.5};
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = tiny_spec();
  spec.prod_fraction = 0.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = tiny_spec();
  spec.eps_minus_values = {1.0};
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = tiny_spec();
  spec.n_clicks = {0};
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(SpecTest, ConfigHashTracksContent) {
  ExperimentSpec a = tiny_spec();
  ExperimentSpec b = tiny_spec();
  EXPECT_EQ(a.config_hash(), b.config_hash());
  EXPECT_EQ(a.config_hash().size(), 16u);
  b.seed = 2;
  EXPECT_NE(a.config_hash(), b.config_hash());
}

class HarnessTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    spec_ = new ExperimentSpec(tiny_spec());
    corpus_ = new Corpus(load_corpus(spec_->dataset));
    baselines_ = new Baselines(train_baselines(*corpus_, *spec_));
  }
  static void TearDownTestSuite() {
    delete baselines_;
    delete corpus_;
    delete spec_;
  }

  static ExperimentSpec* spec_;
  static Corpus* corpus_;
  static Baselines* baselines_;
};

ExperimentSpec* HarnessTest::spec_ = nullptr;
Corpus* HarnessTest::corpus_ = nullptr;
Baselines* HarnessTest::baselines_ = nullptr;

TEST_F(HarnessTest, LearningCurveRowsAndDeterminism) {
  const auto a = learning_curve(*spec_, *corpus_, *baselines_);
  const auto b = learning_curve(*spec_, *corpus_, *baselines_);
  EXPECT_EQ(csv_of(a), csv_of(b));
  ASSERT_EQ(a.rows.size(), 10u);
  const auto* sky300 = a.find("skyline", "300");
  const auto* sky600 = a.find("skyline", "600");
  ASSERT_TRUE(sky300 && sky600);
  EXPECT_EQ(sky300->test_risk, sky600->test_risk);
  EXPECT_EQ(a.find("prod_baseline", "300")->test_risk, a.find("prod_baseline", "600")->test_risk);
  const auto* naive = a.find("naive", "300");
  ASSERT_TRUE(naive);
  EXPECT_EQ(naive->n_seeds, 2);
  EXPECT_EQ(a.find("naive", "600")->n_seeds, 1);
  EXPECT_GE(naive->clicks, 300u);
  EXPECT_GT(naive->impressions, 0u);
  EXPECT_GE(naive->noisy_click_fraction, 0.0);
  EXPECT_NE(naive->c.find(';'), std::string::npos);
  for (const auto& row : a.rows) {
    EXPECT_GE(row.test_risk, 0.0);
    EXPECT_EQ(row.config_hash, spec_->config_hash());
    EXPECT_EQ(row.seed, spec_->seed);
  }
}

TEST_F(HarnessTest, ThreadedRunMatchesSerial) {
  ExperimentSpec threaded = *spec_;
  threaded.threads = 3;
  const auto serial = learning_curve(*spec_, *corpus_, *baselines_);
  const auto parallel = learning_curve(threaded, *corpus_, *baselines_);
  ASSERT_EQ(serial.rows.size(), parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    EXPECT_EQ(serial.rows[i].test_risk, parallel.rows[i].test_risk);
    EXPECT_EQ(serial.rows[i].c, parallel.rows[i].c);
  }
}

TEST_F(HarnessTest, BiasSweepAtZeroEtaMethodsCoincide) {
  const auto r = bias_sweep(*spec_, *corpus_, *baselines_);
  for (std::uint64_t n : {300ULL, 600ULL}) {
    const auto* naive = r.find("naive", "0", n);
    const auto* prop = r.find("propensity", "0", n);
    ASSERT_TRUE(naive && prop);
    EXPECT_EQ(naive->test_risk, prop->test_risk);
  }
  EXPECT_EQ(r.find("propensity_clipped"), nullptr);
}

TEST_F(HarnessTest, NoiseSweepReportsNoisyFraction) {
  const auto r = noise_sweep(*spec_, *corpus_, *baselines_);
  const auto* clean = r.find("naive", "0", 600);
  const auto* noisy = r.find("naive", "0.2", 600);
  ASSERT_TRUE(clean && noisy);
  EXPECT_EQ(clean->noisy_click_fraction, 0.0);
  EXPECT_GT(noisy->noisy_click_fraction, 0.0);
}

TEST_F(HarnessTest, MisspecZeroEtaEqualsNaive) {
  const auto r = misspec_sweep(*spec_, *corpus_, *baselines_);
  for (std::uint64_t n : {300ULL, 600ULL}) {
    const auto* naive = r.find("naive", "", n);
    const auto* zero = r.find("propensity", "0", n);
    ASSERT_TRUE(naive && zero);
    EXPECT_EQ(naive->test_risk, zero->test_risk);
    EXPECT_EQ(naive->c, zero->c);
    ASSERT_TRUE(r.find("propensity", "1", n));
  }
}

TEST_F(HarnessTest, GnuplotBlocksPerMethod) {
  const auto r = learning_curve(*spec_, *corpus_, *baselines_);
  std::ostringstream out;
  write_gnuplot_data(r.rows, out);
  const std::string text = out.str();
  EXPECT_NE(text.find("# prod_baseline"), std::string::npos);
  EXPECT_NE(text.find("\n\n\n# skyline"), std::string::npos);
}

TEST_F(HarnessTest, PropensityEstimationSmoothingEndpoints) {
  PropensityEstimationSpec pe;
  pe.swap.swap_ranks = {1, 2, 3, 4};
  pe.swap.impressions_per_arm = 20000;
  pe.swap.seed = 5;
  pe.smoothing = 1.0;
  const auto est = estimate_propensities(corpus_->train, baselines_->prod, BiasProfile{1.0},
                                         NoiseParams{}, pe);
  const auto& ctr = est.experiment.no_swap_ctr_by_rank;
  for (int r = 1; r <= 4; ++r) {
    EXPECT_DOUBLE_EQ(est.model.propensity(r), std::clamp(ctr[r - 1] / ctr[0], 1e-6, 1.0));
  }
  EXPECT_DOUBLE_EQ(est.experiment.arm(1)->ratio, 1.0);
  std::ostringstream table;
  write_swap_table(est, table);
  EXPECT_NE(table.str().find("std_error"), std::string::npos);
}

TEST(CorpusTest, LetorDirectory) {
  const fs::path dir = fs::temp_directory_path() / "ultr_corpus_test";
  fs::create_directories(dir);
  {
    std::ofstream(dir / "train.txt") << "3 qid:1 1:1 2:0.5\n0 qid:1 1:0.1\n";
    std::ofstream(dir / "vali.txt") << "4 qid:2 1:1\n1 qid:2 3:1\n";
    std::ofstream(dir / "test.txt") << "0 qid:3 1:1\n3 qid:3 2:1\n";
  }
  DatasetSource src;
  src.letor_dir = dir.string();
  const Corpus c = load_corpus(src);
  EXPECT_EQ(c.train.feature_dim, 3u);
  EXPECT_EQ(c.test.queries[0].candidates[0].features.size(), 3u);
  EXPECT_TRUE(c.validation.queries[0].candidates[0].relevant);
  fs::remove(dir / "test.txt");
  EXPECT_THROW(load_corpus(src), DataError);
  fs::remove_all(dir);
  EXPECT_THROW(load_corpus(src), DataError);
}

}  // namespace
}  // namespace ultr
