#ifndef ULTR_TESTS_TEST_UTIL_H_
#define ULTR_TESTS_TEST_UTIL_H_

#include <random>
#include <string>
#include <vector>

#include "ultr/dataset.h"
#include "ultr/random.h"
#include "ultr/ranking.h"

namespace ultr::test_util {

inline QueryInstance make_query(const std::string& id, const std::vector<FeatureVector>& features,
                                const std::vector<bool>& relevant) {
  QueryInstance q;
  q.query_id = id;
  for (std::size_t i = 0; i < features.size(); ++i) {
    Document d;
    d.doc_id = static_cast<DocId>(i);
    d.features = features[i];
    d.relevant = relevant[i];
    d.grade = relevant[i] ? 3 : 0;
    q.candidates.push_back(std::move(d));
  }
  return q;
}

inline QueryInstance random_query(SplitMix64& rng, const std::string& id, std::size_t n,
                                  std::size_t dim, double p_relevant = 0.3) {
  std::normal_distribution<double> normal;
  std::vector<FeatureVector> features(n, FeatureVector(dim));
  std::vector<bool> relevant(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : features[i]) x = normal(rng);
    relevant[i] = bernoulli(rng, p_relevant);
  }
  return make_query(id, features, relevant);
}

inline Dataset make_dataset(std::vector<QueryInstance> queries) {
  Dataset ds;
  ds.feature_dim = queries.empty() || queries[0].candidates.empty()
                       ? 0
                       : queries[0].candidates[0].features.size();
  ds.queries = std::move(queries);
  return ds;
}

inline Dataset random_dataset(SplitMix64& rng, std::size_t n_queries, std::size_t n_docs,
                              std::size_t dim, double p_relevant = 0.3) {
  std::vector<QueryInstance> queries;
  for (std::size_t i = 0; i < n_queries; ++i) {
    queries.push_back(random_query(rng, "q" + std::to_string(i), n_docs, dim, p_relevant));
  }
  return make_dataset(std::move(queries));
}

inline LinearModel random_model(SplitMix64& rng, std::size_t dim) {
  std::normal_distribution<double> normal;
  LinearModel m(dim);
  for (auto& w : m.weights) w = normal(rng);
  return m;
}

}  // namespace ultr::test_util

#endif  // ULTR_TESTS_TEST_UTIL_H_
