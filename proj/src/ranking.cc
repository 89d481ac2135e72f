#include "ultr/ranking.h"

#include <algorithm>
#include <numeric>

#include "ultr/errors.h"

namespace ultr {

double LinearModel::score(std::span<const double> features) const {
  if (features.size() != weights.size()) {
    throw ConfigError("model dimension " + std::to_string(weights.size()) +
                      " does not match feature dimension " + std::to_string(features.size()));
  }
  return std::inner_product(weights.begin(), weights.end(), features.begin(), 0.0);
}

std::vector<std::size_t> rank_order(const LinearModel& model, const QueryInstance& q) {
  std::vector<double> scores(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) scores[i] = model.score(q.candidates[i].features);
  std::vector<std::size_t> order(q.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return q.candidates[a].doc_id < q.candidates[b].doc_id;
  });
  return order;
}

std::vector<int> candidate_ranks(const LinearModel& model, const QueryInstance& q) {
  const auto order = rank_order(model, q);
  std::vector<int> ranks(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = static_cast<int>(pos) + 1;
  return ranks;
}

Ranking make_ranking(const QueryInstance& q, std::span<const std::size_t> order) {
  Ranking r;
  r.query_id = q.query_id;
  r.doc_ids.reserve(order.size());
  for (std::size_t i : order) r.doc_ids.push_back(q.candidates.at(i).doc_id);
  return r;
}

Ranking rank_candidates(const LinearModel& model, const QueryInstance& q) {
  return make_ranking(q, rank_order(model, q));
}

int rank_of(const Ranking& ranking, DocId doc_id) {
  const auto it = std::find(ranking.doc_ids.begin(), ranking.doc_ids.end(), doc_id);
  if (it == ranking.doc_ids.end()) {
    throw DataError("doc " + std::to_string(doc_id) + " not in ranking of query '" +
                    ranking.query_id + "'");
  }
  return static_cast<int>(it - ranking.doc_ids.begin()) + 1;
}

double sum_relevant_ranks(const Ranking& ranking,
                          const std::unordered_map<DocId, bool>& relevances) {
  double loss = 0.0;
  for (std::size_t pos = 0; pos < ranking.doc_ids.size(); ++pos) {
    const auto it = relevances.find(ranking.doc_ids[pos]);
    if (it == relevances.end()) {
      throw DataError("no relevance for doc " + std::to_string(ranking.doc_ids[pos]) +
                      " of query '" + ranking.query_id + "'");
    }
    if (it->second) loss += static_cast<double>(pos + 1);
  }
  return loss;
}

double sum_relevant_ranks(const Ranking& ranking, const QueryInstance& q) {
  std::unordered_map<DocId, bool> rel;
  rel.reserve(q.size());
  for (const auto& d : q.candidates) rel.emplace(d.doc_id, d.relevant);
  return sum_relevant_ranks(ranking, rel);
}

double full_info_risk(const LinearModel& model, const Dataset& ds) {
  if (ds.queries.empty()) throw ConfigError("full-information risk of an empty dataset");
  double total = 0.0;
  for (const auto& q : ds.queries) {
    const auto ranks = candidate_ranks(model, q);
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (q.candidates[i].relevant) total += ranks[i];
    }
  }
  return total / static_cast<double>(ds.queries.size());
}

}  // namespace ultr
