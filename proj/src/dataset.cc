#include "ultr/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_set>
#include <utility>

#include "ultr/errors.h"
#include "ultr/random.h"

namespace ultr {

std::size_t QueryInstance::num_relevant() const {
  return static_cast<std::size_t>(std::count_if(
      candidates.begin(), candidates.end(), [](const Document& d) { return d.relevant; }));
}

std::optional<std::size_t> QueryInstance::index_of(DocId doc_id) const {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].doc_id == doc_id) return i;
  }
  return std::nullopt;
}

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

std::size_t Dataset::num_documents() const {
  std::size_t n = 0;
  for (const auto& q : queries) n += q.size();
  return n;
}

std::size_t Dataset::num_relevant() const {
  std::size_t n = 0;
  for (const auto& q : queries) n += q.num_relevant();
  return n;
}

QueryIndex index_queries(const Dataset& ds) {
  QueryIndex index;
  index.reserve(ds.queries.size());
  for (std::size_t i = 0; i < ds.queries.size(); ++i) {
    if (!index.emplace(ds.queries[i].query_id, i).second) {
      throw DataError("duplicate query id '" + ds.queries[i].query_id + "'");
    }
  }
  return index;
}

void validate(const Dataset& ds) {
  std::unordered_set<std::string> qids;
  for (const auto& q : ds.queries) {
    if (!qids.insert(q.query_id).second) {
      throw DataError("duplicate query id '" + q.query_id + "'");
    }
    if (q.candidates.empty()) {
      throw DataError("query '" + q.query_id + "' has no candidates");
    }
    std::unordered_set<DocId> docs;
    for (const auto& d : q.candidates) {
      if (!docs.insert(d.doc_id).second) {
        throw DataError("duplicate doc id " + std::to_string(d.doc_id) + " in query '" +
                        q.query_id + "'");
      }
      if (d.features.size() != ds.feature_dim) {
        throw DataError("feature dimension mismatch in query '" + q.query_id + "'");
      }
      for (double v : d.features) {
        if (!std::isfinite(v)) {
          throw DataError("non-finite feature in query '" + q.query_id + "'");
        }
      }
    }
  }
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(std::string_view token, T* out) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, *out);
  return ec == std::errc() && ptr == end;
}

struct SparseDoc {
  int grade = 0;
  std::vector<std::pair<std::size_t, double>> features;
};

}  // namespace

Dataset parse_letor(std::istream& in, int binarize_at, Split split) {
  std::vector<std::string> qid_order;
  std::map<std::string, std::vector<SparseDoc>> grouped;
  std::size_t max_index = 0;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
      const auto start = line.find_first_not_of(" \t", pos);
      if (start == std::string_view::npos) break;
      auto stop = line.find_first_of(" \t", start);
      if (stop == std::string_view::npos) stop = line.size();
      tokens.push_back(line.substr(start, stop - start));
      pos = stop;
    }
    if (tokens.size() < 2) throw ParseError(line_no, "expected '<grade> qid:<id> ...'");

    SparseDoc doc;
    if (!parse_number(tokens[0], &doc.grade) || doc.grade < 0) {
      throw ParseError(line_no, "invalid relevance grade '" + std::string(tokens[0]) + "'");
    }
    if (tokens[1].substr(0, 4) != "qid:" || tokens[1].size() == 4) {
      throw ParseError(line_no, "expected qid:<id>, got '" + std::string(tokens[1]) + "'");
    }
    std::string qid(tokens[1].substr(4));

    for (std::size_t t = 2; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(line_no, "malformed feature '" + std::string(tokens[t]) + "'");
      }
      std::size_t index = 0;
      double value = 0.0;
      if (!parse_number(tokens[t].substr(0, colon), &index) || index == 0) {
        throw ParseError(line_no, "invalid feature index in '" + std::string(tokens[t]) + "'");
      }
      if (!parse_number(tokens[t].substr(colon + 1), &value) || !std::isfinite(value)) {
        throw ParseError(line_no, "invalid feature value in '" + std::string(tokens[t]) + "'");
      }
      max_index = std::max(max_index, index);
      doc.features.emplace_back(index - 1, value);
    }

    auto [it, inserted] = grouped.try_emplace(qid);
    if (inserted) qid_order.push_back(qid);
    it->second.push_back(std::move(doc));
  }

  Dataset ds;
  ds.split = split;
  ds.feature_dim = max_index;
  ds.queries.reserve(qid_order.size());
  for (const auto& qid : qid_order) {
    QueryInstance q;
    q.query_id = qid;
    DocId next_id = 0;
    for (const auto& sparse : grouped[qid]) {
      Document d;
      d.doc_id = next_id++;
      d.grade = sparse.grade;
      d.relevant = sparse.grade >= binarize_at;
      d.features.assign(max_index, 0.0);
      for (const auto& [i, v] : sparse.features) d.features[i] = v;
      q.candidates.push_back(std::move(d));
    }
    ds.queries.push_back(std::move(q));
  }
  return ds;
}

Dataset load_letor(const std::string& path, int binarize_at, Split split) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_letor(in, binarize_at, split);
}

void write_letor(const Dataset& ds, std::ostream& out) {
  char buf[64];
  for (const auto& q : ds.queries) {
    for (const auto& d : q.candidates) {
      out << d.grade << " qid:" << q.query_id;
      for (std::size_t i = 0; i < d.features.size(); ++i) {
        if (d.features[i] == 0.0) continue;
        std::snprintf(buf, sizeof(buf), "%.6g", d.features[i]);
        out << ' ' << (i + 1) << ':' << buf;
      }
      out << '\n';
    }
  }
}

void binarize(Dataset& ds, int binarize_at) {
  for (auto& q : ds.queries) {
    for (auto& d : q.candidates) d.relevant = d.grade >= binarize_at;
  }
}

SyntheticDataset synthesize(const SyntheticConfig& cfg) {
  if (cfg.n_candidates < 2) throw ConfigError("synthetic corpus needs n_candidates >= 2");
  if (cfg.feature_dim == 0) throw ConfigError("synthetic corpus needs feature_dim >= 1");
  if (!(cfg.relevant_fraction > 0.0 && cfg.relevant_fraction < 1.0)) {
    throw ConfigError("relevant_fraction must lie in (0, 1)");
  }
  if (!(cfg.noise_scale >= 0.0) || !std::isfinite(cfg.noise_scale)) {
    throw ConfigError("noise_scale must be finite and >= 0");
  }

  SplitMix64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticDataset out;
  out.true_weights.resize(cfg.feature_dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (auto& w : out.true_weights) w = normal(rng);
    norm = std::sqrt(std::inner_product(out.true_weights.begin(), out.true_weights.end(),
                                        out.true_weights.begin(), 0.0));
  }
  for (auto& w : out.true_weights) w /= norm;

  Dataset& ds = out.dataset;
  ds.feature_dim = cfg.feature_dim;
  ds.queries.resize(cfg.n_queries);
  std::vector<double> latent;
  latent.reserve(cfg.n_queries * cfg.n_candidates);
  for (std::size_t qi = 0; qi < cfg.n_queries; ++qi) {
    QueryInstance& q = ds.queries[qi];
    q.query_id = "q" + std::to_string(qi);
    q.candidates.resize(cfg.n_candidates);
    for (std::size_t di = 0; di < cfg.n_candidates; ++di) {
      Document& d = q.candidates[di];
      d.doc_id = static_cast<DocId>(di);
      d.features.resize(cfg.feature_dim);
      double score = 0.0;
      for (std::size_t f = 0; f < cfg.feature_dim; ++f) {
        d.features[f] = normal(rng);
        score += out.true_weights[f] * d.features[f];
      }
      latent.push_back(score + cfg.noise_scale * normal(rng));
    }
  }
  if (latent.empty()) return out;

  // Grades 3-4 above the relevance quantile, 0-2 below it.
  std::vector<double> sorted = latent;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  auto quantile = [&](double f) {
    auto i = static_cast<std::size_t>(std::floor(f * static_cast<double>(n)));
    return sorted[std::min(i, n - 1)];
  };
  const double irrelevant = 1.0 - cfg.relevant_fraction;
  out.threshold = quantile(irrelevant);
  const double cut4 = quantile(irrelevant + 0.5 * cfg.relevant_fraction);
  const double cut1 = quantile(irrelevant / 3.0);
  const double cut2 = quantile(2.0 * irrelevant / 3.0);

  std::size_t k = 0;
  for (auto& q : ds.queries) {
    for (auto& d : q.candidates) {
      const double s = latent[k++];
      if (s > out.threshold) {
        d.grade = s > cut4 ? 4 : 3;
      } else {
        d.grade = s > cut2 ? 2 : (s > cut1 ? 1 : 0);
      }
      d.relevant = s > out.threshold;
    }
  }
  return out;
}

Dataset synthesize_dataset(const SyntheticConfig& cfg) { return synthesize(cfg).dataset; }

CorpusSplits synthesize_splits(const SyntheticConfig& cfg, std::size_t n_train,
                               std::size_t n_validation, std::size_t n_test) {
  SyntheticConfig pool_cfg = cfg;
  pool_cfg.n_queries = n_train + n_validation + n_test;
  SyntheticDataset pool = synthesize(pool_cfg);

  CorpusSplits out;
  out.true_weights = std::move(pool.true_weights);
  auto take = [&](Dataset& dst, Split split, std::size_t begin, std::size_t count) {
    dst.split = split;
    dst.feature_dim = pool.dataset.feature_dim;
    auto first = pool.dataset.queries.begin() + static_cast<std::ptrdiff_t>(begin);
    dst.queries.assign(std::make_move_iterator(first),
                       std::make_move_iterator(first + static_cast<std::ptrdiff_t>(count)));
  };
  take(out.train, Split::kTrain, 0, n_train);
  take(out.validation, Split::kValidation, n_train, n_validation);
  take(out.test, Split::kTest, n_train + n_validation, n_test);
  return out;
}

Dataset subsample_queries(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("subsample fraction must lie in (0, 1]");
  }
  Dataset out;
  out.split = ds.split;
  out.feature_dim = ds.feature_dim;
  const std::size_t n = ds.queries.size();
  if (n == 0) return out;
  auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  keep = std::clamp<std::size_t>(keep, 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  // Partial Fisher-Yates: the first `keep` slots are a uniform subset.
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(keep);
  std::sort(order.begin(), order.end());
  out.queries.reserve(keep);
  for (std::size_t i : order) out.queries.push_back(ds.queries[i]);
  return out;
}

}  // namespace ultr
