#include <gtest/gtest.h>

#include <cstdio>
#include <set>
#include <sstream>

#include "ultr/dataset.h"
#include "ultr/errors.h"

namespace ultr {
namespace {

double round6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return std::stod(buf);
}

TEST(LetorTest, ParsesSparseLineAndBinarizesRelevant) {
  std::istringstream in("3 qid:1 1:0.5 3:1.0\n");
  const Dataset ds = parse_letor(in, 3);
  ASSERT_EQ(ds.queries.size(), 1u);
  ASSERT_EQ(ds.feature_dim, 3u);
  const Document& d = ds.queries[0].candidates[0];
  EXPECT_EQ(d.features, (FeatureVector{0.5, 0.0, 1.0}));
  EXPECT_EQ(d.grade, 3);
  EXPECT_TRUE(d.relevant);
}

TEST(LetorTest, GradeBelowThresholdIsIrrelevant) {
  std::istringstream in("2 qid:1 1:0.5\n");
  const Dataset ds = parse_letor(in, 3);
  EXPECT_FALSE(ds.queries[0].candidates[0].relevant);
}

TEST(LetorTest, EmptyInputGivesNoQueries) {
  std::istringstream in("");
  const Dataset ds = parse_letor(in);
  EXPECT_TRUE(ds.queries.empty());
}

TEST(LetorTest, CommentsAndInterleavedQueries) {
  std::istringstream in(
      "# header comment\n"
      "4 qid:a 2:1.5 # doc a0\n"
      "0 qid:b 1:-1\n"
      "\n"
      "1 qid:a 1:2 5:3\n");
  const Dataset ds = parse_letor(in);
  ASSERT_EQ(ds.queries.size(), 2u);
  EXPECT_EQ(ds.feature_dim, 5u);
  EXPECT_EQ(ds.queries[0].query_id, "a");
  EXPECT_EQ(ds.queries[0].size(), 2u);
  EXPECT_EQ(ds.queries[1].query_id, "b");
  EXPECT_EQ(ds.queries[0].candidates[0].features, (FeatureVector{0.0, 1.5, 0.0, 0.0, 0.0}));
  EXPECT_EQ(ds.queries[1].candidates[0].features.size(), 5u);
  EXPECT_NE(ds.queries[0].candidates[0].doc_id, ds.queries[0].candidates[1].doc_id);
}

TEST(LetorTest, MalformedLinesReportLineNumber) {
  const char* bad[] = {"x qid:1 1:0.5\n", "1 q:1 1:0.5\n", "1 qid:1 0:0.5\n", "1 qid:1 1:abc\n",
                       "-1 qid:1 1:0.5\n", "1 qid:1 1\n"};
  for (const char* line : bad) {
    std::istringstream in(std::string("0 qid:1 1:1\n") + line);
    try {
      parse_letor(in);
      ADD_FAILURE() << "no error for " << line;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2u) << line;
    }
  }
}

TEST(LetorTest, MissingFileIsDataError) {
  EXPECT_THROW(load_letor("/nonexistent/train.txt"), DataError);
}

TEST(LetorTest, RoundTrip) {
  SyntheticConfig cfg;
  cfg.seed = 3;
  cfg.n_queries = 20;
  cfg.feature_dim = 7;
  Dataset ds = synthesize_dataset(cfg);
  // Six significant digits is the declared precision.
  for (auto& q : ds.queries) {
    for (auto& d : q.candidates) {
      for (auto& x : d.features) x = round6(x);
    }
  }
  std::stringstream buf;
  write_letor(ds, buf);
  const Dataset back = parse_letor(buf);
  ASSERT_EQ(back.queries.size(), ds.queries.size());
  std::stringstream again;
  write_letor(back, again);
  EXPECT_EQ(buf.str(), again.str());
  for (std::size_t i = 0; i < ds.queries.size(); ++i) {
    EXPECT_EQ(back.queries[i].query_id, ds.queries[i].query_id);
    ASSERT_EQ(back.queries[i].size(), ds.queries[i].size());
    for (std::size_t j = 0; j < ds.queries[i].size(); ++j) {
      const auto& a = ds.queries[i].candidates[j];
      const auto& b = back.queries[i].candidates[j];
      EXPECT_EQ(a.grade, b.grade);
      EXPECT_EQ(a.relevant, b.relevant);
      ASSERT_EQ(b.features.size(), a.features.size());
      for (std::size_t k = 0; k < a.features.size(); ++k) {
        EXPECT_EQ(a.features[k], b.features[k]);
      }
    }
  }
}

TEST(BinarizeTest, MonotoneInThreshold) {
  SyntheticConfig cfg;
  cfg.seed = 5;
  cfg.n_queries = 30;
  const Dataset base = synthesize_dataset(cfg);
  for (int t = 0; t < 5; ++t) {
    Dataset lo = base, hi = base;
    binarize(lo, t);
    binarize(hi, t + 1);
    for (std::size_t i = 0; i < lo.queries.size(); ++i) {
      for (std::size_t j = 0; j < lo.queries[i].size(); ++j) {
        EXPECT_LE(hi.queries[i].candidates[j].relevant, lo.queries[i].candidates[j].relevant);
      }
    }
  }
}

TEST(SyntheticTest, DeterministicGivenSeed) {
  SyntheticConfig cfg;
  cfg.seed = 11;
  cfg.n_queries = 50;
  const auto a = synthesize(cfg);
  const auto b = synthesize(cfg);
  ASSERT_EQ(a.dataset.queries.size(), b.dataset.queries.size());
  EXPECT_EQ(a.true_weights, b.true_weights);
  for (std::size_t i = 0; i < a.dataset.queries.size(); ++i) {
    for (std::size_t j = 0; j < a.dataset.queries[i].size(); ++j) {
      EXPECT_EQ(a.dataset.queries[i].candidates[j].features,
                b.dataset.queries[i].candidates[j].features);
      EXPECT_EQ(a.dataset.queries[i].candidates[j].relevant,
                b.dataset.queries[i].candidates[j].relevant);
    }
  }
}

TEST(SyntheticTest, RelevantFractionNearTarget) {
  SyntheticConfig cfg;
  cfg.seed = 2;
  cfg.n_queries = 1000;
  cfg.n_candidates = 30;
  cfg.relevant_fraction = 0.1;
  const Dataset ds = synthesize_dataset(cfg);
  const double frac =
      static_cast<double>(ds.num_relevant()) / static_cast<double>(ds.num_documents());
  EXPECT_NEAR(frac, 0.1, 0.02);
}

TEST(SyntheticTest, NoiselessRelevanceIsLinearThreshold) {
  SyntheticConfig cfg;
  cfg.seed = 4;
  cfg.n_queries = 40;
  cfg.noise_scale = 0.0;
  const auto syn = synthesize(cfg);
  for (const auto& q : syn.dataset.queries) {
    for (const auto& d : q.candidates) {
      double s = 0.0;
      for (std::size_t k = 0; k < d.features.size(); ++k) s += syn.true_weights[k] * d.features[k];
      EXPECT_EQ(d.relevant, s > syn.threshold);
    }
  }
}

TEST(SyntheticTest, RejectsDegenerateConfig) {
  SyntheticConfig cfg;
  cfg.n_candidates = 1;
  EXPECT_THROW(synthesize(cfg), ConfigError);
  cfg = SyntheticConfig{};
  cfg.relevant_fraction = 1.0;
  EXPECT_THROW(synthesize(cfg), ConfigError);
  cfg = SyntheticConfig{};
  cfg.feature_dim = 0;
  EXPECT_THROW(synthesize(cfg), ConfigError);
}

TEST(SyntheticTest, SplitsAreDisjoint) {
  SyntheticConfig cfg;
  cfg.seed = 9;
  const auto s = synthesize_splits(cfg, 40, 10, 20);
  EXPECT_EQ(s.train.queries.size(), 40u);
  EXPECT_EQ(s.validation.queries.size(), 10u);
  EXPECT_EQ(s.test.queries.size(), 20u);
  std::set<std::string> ids;
  for (const Dataset* ds : {&s.train, &s.validation, &s.test}) {
    for (const auto& q : ds->queries) EXPECT_TRUE(ids.insert(q.query_id).second) << q.query_id;
  }
  validate(s.train);
}

TEST(SubsampleTest, Sizes) {
  SyntheticConfig cfg;
  cfg.n_queries = 10000;
  cfg.n_candidates = 2;
  cfg.feature_dim = 1;
  const Dataset ds = synthesize_dataset(cfg);
  EXPECT_EQ(subsample_queries(ds, 0.01, 1).queries.size(), 100u);
  EXPECT_EQ(subsample_queries(ds, 1e-9, 1).queries.size(), 1u);
  const Dataset all = subsample_queries(ds, 1.0, 1);
  ASSERT_EQ(all.queries.size(), ds.queries.size());
  for (std::size_t i = 0; i < ds.queries.size(); ++i) {
    EXPECT_EQ(all.queries[i].query_id, ds.queries[i].query_id);
  }
  EXPECT_THROW(subsample_queries(ds, 0.0, 1), ConfigError);
  EXPECT_THROW(subsample_queries(ds, 1.5, 1), ConfigError);
}

TEST(SubsampleTest, DeterministicAndWithoutReplacement) {
  SyntheticConfig cfg;
  cfg.n_queries = 500;
  cfg.n_candidates = 2;
  cfg.feature_dim = 1;
  const Dataset ds = synthesize_dataset(cfg);
  const Dataset a = subsample_queries(ds, 0.1, 42);
  const Dataset b = subsample_queries(ds, 0.1, 42);
  std::set<std::string> seen;
  ASSERT_EQ(a.queries.size(), b.queries.size());
  for (std::size_t i = 0; i < a.queries.size(); ++i) {
    EXPECT_EQ(a.queries[i].query_id, b.queries[i].query_id);
    EXPECT_TRUE(seen.insert(a.queries[i].query_id).second);
  }
}

TEST(DatasetTest, DuplicateQueryIdsRejected) {
  std::istringstream in("1 qid:1 1:1\n");
  Dataset ds = parse_letor(in);
  ds.queries.push_back(ds.queries[0]);
  EXPECT_THROW(index_queries(ds), DataError);
}

}  // namespace
}  // namespace ultr
