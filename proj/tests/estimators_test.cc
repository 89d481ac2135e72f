#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "test_util.h"
#include "ultr/errors.h"
#include "ultr/estimators.h"
#include "ultr/propensity.h"

namespace ultr {
namespace {

using test_util::make_dataset;
using test_util::make_query;
using test_util::random_dataset;
using test_util::random_model;
using test_util::random_query;

ClickLog one_click_log(const QueryInstance& q, DocId doc, double propensity) {
  ClickLog log;
  log.n_query_impressions = 1;
  ClickRecord rec;
  rec.query_id = q.query_id;
  rec.presented = std::make_shared<Ranking>(rank_candidates(LinearModel(q.candidates[0].features.size()), q));
  rec.clicked_doc_id = doc;
  rec.presented_rank = rank_of(*rec.presented, doc);
  rec.propensity = propensity;
  log.records.push_back(rec);
  return log;
}

TEST(EstimateRiskTest, EmptyLogIsZero) {
  const Dataset ds = make_dataset({make_query("q", {{1}, {2}}, {true, false})});
  const auto est = estimate_risk(LinearModel(1), ClickLog{}, ds, EstimatorConfig::ips());
  EXPECT_EQ(est.value, 0.0);
  EXPECT_EQ(est.n_clicks, 0u);
}

TEST(EstimateRiskTest, SingleClickExample) {
  const Dataset ds = make_dataset({make_query("q", {{3}, {2}, {1}, {0}}, {false, false, true, false})});
  const LinearModel w(std::vector<double>{1.0});  // doc 2 at rank 3
  const ClickLog log = one_click_log(ds.queries[0], 2, 0.5);
  EXPECT_DOUBLE_EQ(estimate_risk(w, log, ds, EstimatorConfig::ips()).value, 6.0);
  EXPECT_DOUBLE_EQ(estimate_risk(w, log, ds, EstimatorConfig::naive()).value, 3.0);
  EXPECT_DOUBLE_EQ(estimate_risk(w, log, ds, EstimatorConfig::clipped(0.8)).value, 3.75);
}

TEST(EstimateRiskTest, Errors) {
  const Dataset ds = make_dataset({make_query("q", {{3}, {2}}, {true, false})});
  const LinearModel w(1);
  EXPECT_THROW(estimate_risk(w, one_click_log(ds.queries[0], 0, 0.0), ds, EstimatorConfig::ips()),
               DataError);
  ClickLog unknown = one_click_log(ds.queries[0], 0, 0.5);
  unknown.records[0].query_id = "nope";
  EXPECT_THROW(estimate_risk(w, unknown, ds, EstimatorConfig::ips()), DataError);
  EXPECT_THROW(EstimatorConfig::clipped(1.5), ConfigError);
  EXPECT_EQ(EstimatorConfig::clipped(0.0).kind, EstimatorKind::kIps);
}

class LogFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    SplitMix64 rng(17);
    ds_ = random_dataset(rng, 30, 10, 3);
    log_ = simulate_clicks(ds_, random_model(rng, 3), BiasProfile{1.0}, NoiseParams{1.0, 0.1},
                           3000, 5);
    for (int i = 0; i < 20; ++i) models_.push_back(random_model(rng, 3));
  }

  Dataset ds_;
  ClickLog log_;
  std::vector<LinearModel> models_;
};

TEST_F(LogFixture, BoundaryIdentities) {
  double min_q = 1.0;
  for (const auto& rec : log_.records) min_q = std::min(min_q, rec.propensity);
  const ClickLog flat = relabel_log(log_, BiasProfile{0.0});
  for (const auto& m : models_) {
    const double naive = estimate_risk(m, log_, ds_, EstimatorConfig::naive()).value;
    const double ips = estimate_risk(m, log_, ds_, EstimatorConfig::ips()).value;
    EXPECT_EQ(estimate_risk(m, log_, ds_, EstimatorConfig::clipped(1.0)).value, naive);
    EXPECT_EQ(estimate_risk(m, log_, ds_, EstimatorConfig::clipped(min_q)).value, ips);
    EXPECT_EQ(estimate_risk(m, flat, ds_, EstimatorConfig::ips()).value,
              estimate_risk(m, flat, ds_, EstimatorConfig::naive()).value);
  }
}

TEST_F(LogFixture, ClippingMonotoneAndBounded) {
  const std::vector<double> taus{0.01, 0.03, 0.1, 0.3, 0.6, 1.0};
  for (const auto& m : models_) {
    const double naive = estimate_risk(m, log_, ds_, EstimatorConfig::naive()).value;
    const double ips = estimate_risk(m, log_, ds_, EstimatorConfig::ips()).value;
    double previous = INFINITY;
    for (double tau : taus) {
      const double v = estimate_risk(m, log_, ds_, EstimatorConfig::clipped(tau)).value;
      EXPECT_LE(v, previous);
      EXPECT_GE(v, naive);
      EXPECT_LE(v, ips);
      previous = v;
    }
  }
}

TEST_F(LogFixture, CountsImpressionsNotClicks) {
  const auto est = estimate_risk(models_[0], log_, ds_, EstimatorConfig::naive());
  EXPECT_EQ(est.n_impressions, 3000u);
  EXPECT_EQ(est.n_clicks, log_.records.size());
  double total = 0.0;
  const auto index = index_queries(ds_);
  for (const auto& rec : log_.records) {
    const auto& q = ds_.queries[index.at(rec.query_id)];
    total += rank_of(rank_candidates(models_[0], q), rec.clicked_doc_id);
  }
  EXPECT_DOUBLE_EQ(est.value, total / 3000.0);
}

TEST(ExactExpectationTest, NoiseFreeEqualsTrueLoss) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const QueryInstance q = random_query(rng, "q", 8, 3, 0.4);
    const LinearModel w = random_model(rng, 3);
    const Ranking presented = rank_candidates(random_model(rng, 3), q);
    EXPECT_NEAR(exact_expected_ips(w, q, presented, BiasProfile{1.7}, NoiseParams{1.0, 0.0}),
                sum_relevant_ranks(rank_candidates(w, q), q), 1e-9);
  }
}

TEST(ExactExpectationTest, SaturatedNoiseIsModelIndependent) {
  SplitMix64 rng(4);
  const QueryInstance q = random_query(rng, "q", 7, 2);
  const Ranking presented = rank_candidates(LinearModel(2), q);
  for (int trial = 0; trial < 5; ++trial) {
    EXPECT_NEAR(exact_expected_ips(random_model(rng, 2), q, presented, BiasProfile{1.0},
                                   NoiseParams{0.4, 0.4}),
                0.4 * 7 * 8 / 2.0, 1e-9);
  }
}

TEST(ExactExpectationTest, MatchesMonteCarlo) {
  const QueryInstance q = make_query("q", {{0.3, 1}, {1.2, -1}, {-0.5, 0.2}, {0.9, 0.9}, {0.1, -2}},
                                     {true, false, false, true, false});
  const LinearModel w(std::vector<double>{0.4, 1.0});
  const Ranking presented = rank_candidates(LinearModel(std::vector<double>{1.0, 0.0}), q);
  const BiasProfile profile{1.0};
  const NoiseParams noise{1.0, 0.1};
  const double exact = exact_expected_ips(w, q, presented, profile, noise);

  const auto model_ranks = candidate_ranks(w, q);
  std::vector<std::size_t> order;
  for (DocId id : presented.doc_ids) order.push_back(*q.index_of(id));
  SplitMix64 rng(99);
  const int m = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < m; ++i) {
    const auto t = simulate_impression(q, order, profile, noise, rng);
    double v = 0.0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      if (t.clicked[pos]) {
        v += model_ranks[order[pos]] / examination_probability(static_cast<int>(pos) + 1, profile);
      }
    }
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / m;
  const double se = std::sqrt((sum_sq / m - mean * mean) / m);
  EXPECT_NEAR(mean, exact, 3.0 * se);
}

TEST(ExactExpectationTest, AffineInTrueLoss) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const QueryInstance q = random_query(rng, "q", 6, 3, 0.4);
    const LinearModel w = random_model(rng, 3);
    const NoiseParams noise{0.9, 0.2};
    const double e = exact_expected_ips(w, q, rank_candidates(random_model(rng, 3), q),
                                        BiasProfile{1.0}, noise);
    const double r = sum_relevant_ranks(rank_candidates(w, q), q);
    EXPECT_NEAR(e, (noise.eps_plus - noise.eps_minus) * r + noise.eps_minus * 21.0, 1e-9);
  }
}

TEST(ExactExpectationTest, BudgetExceeded) {
  SplitMix64 rng(6);
  const QueryInstance q = random_query(rng, "q", 13, 1);
  EXPECT_THROW(exact_expected_ips(LinearModel(1), q, rank_candidates(LinearModel(1), q),
                                  BiasProfile{1.0}, NoiseParams{}),
               ConfigError);
}

TEST(OrderPreservationTest, Cases) {
  SplitMix64 rng(7);
  const Dataset ds = random_dataset(rng, 4, 6, 3);
  const LinearModel w = random_model(rng, 3);
  EXPECT_TRUE(verify_order_preservation(w, w, ds, BiasProfile{1.0}, NoiseParams{0.9, 0.2}));
  for (int trial = 0; trial < 50; ++trial) {
    const Dataset small = random_dataset(rng, 1, 6, 3, 0.4);
    const LinearModel a = random_model(rng, 3);
    const LinearModel b = random_model(rng, 3);
    EXPECT_TRUE(verify_order_preservation(a, b, small, BiasProfile{1.0}, NoiseParams{1.0, 0.0}));
    EXPECT_TRUE(verify_order_preservation(a, b, small, BiasProfile{1.0}, NoiseParams{0.9, 0.2}));
  }
}

}  // namespace
}  // namespace ultr
