#ifndef ULTR_DATASET_H_
#define ULTR_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ultr {

using DocId = std::int64_t;

/// Dense query-document match features; one fixed dimension per dataset.
using FeatureVector = std::vector<double>;

/// Grades at or above this value count as relevant (Yahoo LTR: 3 and 4).
inline constexpr int kDefaultBinarizeAt = 3;

struct Document {
  DocId doc_id = 0;
  FeatureVector features;
  int grade = 0;
  bool relevant = false;
};

/// A query with its full candidate set and ground-truth relevances.
struct QueryInstance {
  std::string query_id;
  std::vector<Document> candidates;

  std::size_t size() const { return candidates.size(); }
  std::size_t num_relevant() const;
  /// Position of `doc_id` in `candidates`, if present.
  std::optional<std::size_t> index_of(DocId doc_id) const;
};

enum class Split { kTrain, kValidation, kTest };

const char* split_name(Split split);

struct Dataset {
  Split split = Split::kTrain;
  std::vector<QueryInstance> queries;
  std::size_t feature_dim = 0;

  std::size_t num_documents() const;
  std::size_t num_relevant() const;
};

/// query_id -> position in Dataset::queries.
using QueryIndex = std::unordered_map<std::string, std::size_t>;
QueryIndex index_queries(const Dataset& ds);

/// Throws DataError if any invariant of the dataset is violated: empty
/// candidate list, duplicate doc ids or query ids, non-finite features,
/// inconsistent dimension.
void validate(const Dataset& ds);

// ---------------------------------------------------------------------------
// LETOR / SVMlight text format
//
//   <grade> qid:<id> <idx>:<val> ... [# comment]
//
// Feature indices are 1-based and may be sparse; absent features are 0.
// Lines of one qid need not be contiguous. Doc ids are assigned per query in
// order of appearance, starting at 0.
// ---------------------------------------------------------------------------

Dataset load_letor(const std::string& path, int binarize_at = kDefaultBinarizeAt,
                   Split split = Split::kTrain);
Dataset parse_letor(std::istream& in, int binarize_at = kDefaultBinarizeAt,
                    Split split = Split::kTrain);
/// Writes features with 6 significant digits; zero features are omitted.
void write_letor(const Dataset& ds, std::ostream& out);

/// Recomputes Document::relevant from the grades.
void binarize(Dataset& ds, int binarize_at);

// ---------------------------------------------------------------------------
// Synthetic full-information corpora
// ---------------------------------------------------------------------------

struct SyntheticConfig {
  std::uint64_t seed = 0;
  std::size_t n_queries = 1000;
  std::size_t n_candidates = 30;
  std::size_t feature_dim = 20;
  double relevant_fraction = 0.1;
  double noise_scale = 0.2;
};

/// Hidden linear ground truth plus the dataset drawn from it.
struct SyntheticDataset {
  Dataset dataset;
  std::vector<double> true_weights;
  double threshold = 0.0;
};

/// Features ~ N(0, I); relevant iff w*.phi + N(0, noise_scale^2) exceeds the
/// empirical (1 - relevant_fraction)-quantile over the whole corpus.
SyntheticDataset synthesize(const SyntheticConfig& cfg);
Dataset synthesize_dataset(const SyntheticConfig& cfg);

struct CorpusSplits {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::vector<double> true_weights;  // empty for file-backed corpora
};

/// One synthetic pool cut into disjoint train / validation / test queries.
CorpusSplits synthesize_splits(const SyntheticConfig& cfg, std::size_t n_train,
                               std::size_t n_validation, std::size_t n_test);

/// Uniform subset of round(fraction * |queries|) queries (at least one),
/// drawn without replacement; original query order is preserved.
Dataset subsample_queries(const Dataset& ds, double fraction, std::uint64_t seed);

}  // namespace ultr

#endif  // ULTR_DATASET_H_
