#ifndef ULTR_RANKING_H_
#define ULTR_RANKING_H_

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ultr/dataset.h"

namespace ultr {

/// Linear scoring function f(x, y) = w . phi(x, y).
struct LinearModel {
  std::vector<double> weights;

  LinearModel() = default;
  explicit LinearModel(std::size_t dim) : weights(dim, 0.0) {}
  explicit LinearModel(std::vector<double> w) : weights(std::move(w)) {}

  std::size_t dim() const { return weights.size(); }
  double score(std::span<const double> features) const;

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

/// An ordered permutation of a query's candidates; position 0 is rank 1.
struct Ranking {
  std::string query_id;
  std::vector<DocId> doc_ids;

  std::size_t size() const { return doc_ids.size(); }

  friend bool operator==(const Ranking&, const Ranking&) = default;
};

/// Candidate indices sorted by descending score, ties by ascending doc_id.
std::vector<std::size_t> rank_order(const LinearModel& model, const QueryInstance& q);

/// 1-based rank of every candidate (indexed like q.candidates).
std::vector<int> candidate_ranks(const LinearModel& model, const QueryInstance& q);

Ranking rank_candidates(const LinearModel& model, const QueryInstance& q);

/// Ranking that presents candidates in the given index order.
Ranking make_ranking(const QueryInstance& q, std::span<const std::size_t> order);

/// 1-based position of doc_id; throws DataError if absent.
int rank_of(const Ranking& ranking, DocId doc_id);

/// Sum over relevant documents of their rank. Throws DataError when a
/// document of the ranking has no relevance entry.
double sum_relevant_ranks(const Ranking& ranking,
                          const std::unordered_map<DocId, bool>& relevances);
double sum_relevant_ranks(const Ranking& ranking, const QueryInstance& q);

/// Mean sum-of-relevant-ranks of the model's rankings over all queries.
double full_info_risk(const LinearModel& model, const Dataset& ds);

}  // namespace ultr

#endif  // ULTR_RANKING_H_
