#include "ultr/learning.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ultr/errors.h"
#include "ultr/random.h"

namespace ultr {

namespace {

void check_finite(const QueryInstance& q) {
  for (const auto& d : q.candidates) {
    for (double v : d.features) {
      if (!std::isfinite(v)) throw DataError("non-finite feature in query '" + q.query_id + "'");
    }
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// One hinge term u * max(0, 1 - w.(better - worse)).
struct PairTerm {
  const double* better;
  const double* worse;
  double upper;
  double sq_norm;
};

// Dual coordinate descent for
//   min_w 1/2 |w|^2 + sum_i u_i max(0, 1 - w.x_i)
// through its box-constrained dual
//   max_a sum_i a_i - 1/2 |sum_i a_i x_i|^2,  0 <= a_i <= u_i,
// with LIBLINEAR-style shrinking. Stops once the duality gap, computed with
// `primal`, is at most tolerance * primal.
LinearModel solve_pairwise_hinge(const std::vector<PairTerm>& terms, std::size_t dim,
                                 double tolerance, int max_epochs, std::uint64_t seed,
                                 const std::function<double(const LinearModel&)>& primal,
                                 TrainingTrace* trace) {
  if (!(tolerance > 0.0)) throw ConfigError("optimizer tolerance must be > 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");

  LinearModel model(dim);
  std::vector<double>& w = model.weights;
  std::vector<double> alpha(terms.size(), 0.0);
  std::vector<std::size_t> free_terms;
  free_terms.reserve(terms.size());
  double sum_alpha = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].sq_norm > 0.0) {
      free_terms.push_back(i);
    } else {
      // x_i = 0: the hinge is constant 1, so the dual optimum is a_i = u_i.
      alpha[i] = terms[i].upper;
      sum_alpha += terms[i].upper;
    }
  }
  std::vector<std::size_t> active = free_terms;

  SplitMix64 rng(seed);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double pg_max_old = kInf;
  double pg_min_old = -kInf;
  double pg_eps = 0.1;
  auto dual_value = [&] { return sum_alpha - 0.5 * dot(w.data(), w.data(), dim); };

  TrainingTrace local;
  TrainingTrace& tr = trace ? *trace : local;
  tr = TrainingTrace{};

  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    std::shuffle(active.begin(), active.end(), rng);
    double pg_max_new = -kInf;
    double pg_min_new = kInf;
    std::size_t s = 0;
    std::size_t active_size = active.size();
    while (s < active_size) {
      const std::size_t i = active[s];
      const PairTerm& t = terms[i];
      double g = -1.0;
      for (std::size_t f = 0; f < dim; ++f) g += w[f] * (t.better[f] - t.worse[f]);
      double pg = 0.0;
      const double a = alpha[i];
      if (a == 0.0) {
        if (g > pg_max_old) {
          std::swap(active[s], active[--active_size]);
          continue;
        }
        if (g < 0.0) pg = g;
      } else if (a == t.upper) {
        if (g < pg_min_old) {
          std::swap(active[s], active[--active_size]);
          continue;
        }
        if (g > 0.0) pg = g;
      } else {
        pg = g;
      }
      pg_max_new = std::max(pg_max_new, pg);
      pg_min_new = std::min(pg_min_new, pg);
      if (std::abs(pg) > 1e-12) {
        const double updated = std::clamp(a - g / t.sq_norm, 0.0, t.upper);
        const double delta = updated - a;
        alpha[i] = updated;
        sum_alpha += delta;
        for (std::size_t f = 0; f < dim; ++f) w[f] += delta * (t.better[f] - t.worse[f]);
      }
      ++s;
    }
    active.resize(active_size);

    tr.epochs = epoch;
    tr.dual.push_back(dual_value());

    const bool pg_converged = pg_max_new - pg_min_new <= pg_eps || active.empty();
    if (pg_converged || epoch % 10 == 0 || epoch == max_epochs) {
      const double p = primal(model);
      tr.primal.push_back(p);
      const double gap = p - tr.dual.back();
      if (gap <= tolerance * std::max(std::abs(p), 1e-12)) {
        tr.converged = true;
        break;
      }
    }
    if (pg_converged) {
      // Shrunk set converged but the gap is still open: restore every
      // coordinate and tighten the projected-gradient threshold.
      active = free_terms;
      pg_eps *= 0.1;
      pg_max_old = kInf;
      pg_min_old = -kInf;
      continue;
    }
    pg_max_old = pg_max_new <= 0.0 ? kInf : pg_max_new;
    pg_min_old = pg_min_new >= 0.0 ? -kInf : pg_min_new;
  }
  return model;
}

std::size_t example_dim(std::span<const TrainingExample> examples, std::size_t fallback) {
  if (examples.empty()) return fallback;
  return examples.front().query->candidates.front().features.size();
}

}  // namespace

std::vector<TrainingExample> make_training_examples(const ClickLog& log, const Dataset& ds,
                                                    const EstimatorConfig& weighting) {
  weighting.validate();
  const QueryIndex index = index_queries(ds);
  std::vector<bool> checked(ds.queries.size(), false);
  std::vector<TrainingExample> examples;
  examples.reserve(log.records.size());
  for (const auto& rec : log.records) {
    const auto it = index.find(rec.query_id);
    if (it == index.end()) throw DataError("unknown query id '" + rec.query_id + "'");
    const QueryInstance& q = ds.queries[it->second];
    if (!checked[it->second]) {
      check_finite(q);
      checked[it->second] = true;
    }
    const auto di = q.index_of(rec.clicked_doc_id);
    if (!di) {
      throw DataError("clicked doc " + std::to_string(rec.clicked_doc_id) +
                      " not a candidate of query '" + rec.query_id + "'");
    }
    examples.push_back({&q, *di, 1.0 / weighting.denominator(rec.propensity)});
  }
  return examples;
}

double propensity_objective(const LinearModel& w, std::span<const TrainingExample> examples,
                            double c) {
  const double reg = 0.5 * dot(w.weights.data(), w.weights.data(), w.dim());
  if (examples.empty()) return reg;
  double loss = 0.0;
  std::vector<double> scores;
  for (const auto& ex : examples) {
    const auto& cands = ex.query->candidates;
    scores.resize(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) scores[i] = w.score(cands[i].features);
    double hinge = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (i == ex.clicked) continue;
      hinge += std::max(0.0, 1.0 - (scores[ex.clicked] - scores[i]));
    }
    loss += ex.ips_weight * hinge;
  }
  return reg + c / static_cast<double>(examples.size()) * loss;
}

LinearModel train_propensity_ranker(std::span<const TrainingExample> examples,
                                    const LearnerConfig& cfg, TrainingTrace* trace) {
  if (!(cfg.c > 0.0)) throw ConfigError("C must be > 0");
  const std::size_t dim = example_dim(examples, cfg.feature_dim);
  if (examples.empty()) {
    if (trace) *trace = TrainingTrace{{0.0}, {0.0}, 0, true};
    return LinearModel(dim);
  }

  std::vector<PairTerm> terms;
  std::size_t n_pairs = 0;
  for (const auto& ex : examples) n_pairs += ex.query->size() - 1;
  terms.reserve(n_pairs);
  const double scale = cfg.c / static_cast<double>(examples.size());
  for (const auto& ex : examples) {
    if (ex.query->candidates.front().features.size() != dim) {
      throw DataError("training examples have inconsistent feature dimensions");
    }
    check_finite(*ex.query);
    if (!(ex.ips_weight > 0.0) || !std::isfinite(ex.ips_weight)) {
      throw DataError("ips weight must be finite and > 0");
    }
    const auto& cands = ex.query->candidates;
    const double* better = cands[ex.clicked].features.data();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (i == ex.clicked) continue;
      const double* worse = cands[i].features.data();
      double sq = 0.0;
      for (std::size_t f = 0; f < dim; ++f) sq += (better[f] - worse[f]) * (better[f] - worse[f]);
      terms.push_back({better, worse, scale * ex.ips_weight, sq});
    }
  }
  return solve_pairwise_hinge(
      terms, dim, cfg.tolerance, cfg.max_epochs, cfg.seed,
      [&](const LinearModel& m) { return propensity_objective(m, examples, cfg.c); }, trace);
}

LinearModel train_naive_ranker(std::span<const TrainingExample> examples,
                               const LearnerConfig& cfg, TrainingTrace* trace) {
  std::vector<TrainingExample> unweighted(examples.begin(), examples.end());
  for (auto& ex : unweighted) ex.ips_weight = 1.0;
  return train_propensity_ranker(unweighted, cfg, trace);
}

namespace {

std::size_t count_pairs(const Dataset& ds) {
  std::size_t pairs = 0;
  for (const auto& q : ds.queries) {
    const std::size_t rel = q.num_relevant();
    pairs += rel * (q.size() - rel);
  }
  return pairs;
}

}  // namespace

double full_info_objective(const LinearModel& w, const Dataset& ds, double c) {
  const double reg = 0.5 * dot(w.weights.data(), w.weights.data(), w.dim());
  const std::size_t pairs = count_pairs(ds);
  if (pairs == 0) return reg;
  double loss = 0.0;
  std::vector<double> scores;
  for (const auto& q : ds.queries) {
    scores.resize(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) scores[i] = w.score(q.candidates[i].features);
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (!q.candidates[i].relevant) continue;
      for (std::size_t j = 0; j < q.size(); ++j) {
        if (q.candidates[j].relevant) continue;
        loss += std::max(0.0, 1.0 - (scores[i] - scores[j]));
      }
    }
  }
  return reg + c / static_cast<double>(pairs) * loss;
}

LinearModel train_full_info_ranker(const Dataset& ds, double c, double tolerance,
                                   TrainingTrace* trace, int max_epochs) {
  if (!(c > 0.0)) throw ConfigError("C must be > 0");
  const std::size_t pairs = count_pairs(ds);
  if (pairs == 0) throw ConfigError("no query has both relevant and irrelevant documents");
  for (const auto& q : ds.queries) check_finite(q);

  std::vector<PairTerm> terms;
  terms.reserve(pairs);
  const double upper = c / static_cast<double>(pairs);
  const std::size_t dim = ds.feature_dim;
  for (const auto& q : ds.queries) {
    for (const auto& pos : q.candidates) {
      if (!pos.relevant) continue;
      for (const auto& neg : q.candidates) {
        if (neg.relevant) continue;
        double sq = 0.0;
        for (std::size_t f = 0; f < dim; ++f) {
          sq += (pos.features[f] - neg.features[f]) * (pos.features[f] - neg.features[f]);
        }
        terms.push_back({pos.features.data(), neg.features.data(), upper, sq});
      }
    }
  }
  return solve_pairwise_hinge(
      terms, dim, tolerance, max_epochs, 0,
      [&](const LinearModel& m) { return full_info_objective(m, ds, c); }, trace);
}

namespace {

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

CrossValidationResult cross_validate(const ClickLog& train_log, const ClickLog& val_log,
                                     const Dataset& train_ds, const Dataset& val_ds,
                                     const HyperparamGrid& grid, TrainingMode mode,
                                     const LearnerConfig& base) {
  const auto c_values = sorted_unique(grid.c_values);
  auto tau_values = mode == TrainingMode::kNaive ? std::vector<double>{0.0}
                                                 : sorted_unique(grid.tau_values);
  if (tau_values.empty()) tau_values.push_back(0.0);
  if (c_values.empty()) throw ConfigError("empty C grid");
  for (double tau : tau_values) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau grid values must lie in [0, 1]");
  }
  const EstimatorConfig validation =
      mode == TrainingMode::kNaive ? EstimatorConfig::naive() : EstimatorConfig::ips();

  LearnerConfig cfg = base;
  if (cfg.feature_dim == 0) cfg.feature_dim = train_ds.feature_dim;
  CrossValidationResult best;
  bool have_best = false;
  for (double tau : tau_values) {
    const EstimatorConfig weighting =
        mode == TrainingMode::kNaive ? EstimatorConfig::naive() : EstimatorConfig::clipped(tau);
    const auto examples = make_training_examples(train_log, train_ds, weighting);
    for (double c : c_values) {
      cfg.c = c;
      cfg.estimator = weighting;
      LinearModel model = train_propensity_ranker(examples, cfg);
      const double risk = estimate_risk(model, val_log, val_ds, validation).value;
      best.scores.push_back({c, tau, risk});
      // Ascending (tau, c) with <= hands ties to larger C, then larger tau.
      if (!have_best || risk < best.validation_risk ||
          (risk == best.validation_risk && (c > best.c || (c == best.c && tau > best.tau)))) {
        best.model = std::move(model);
        best.c = c;
        best.tau = tau;
        best.validation_risk = risk;
        have_best = true;
      }
    }
  }
  return best;
}

CrossValidationResult cross_validate_full_info(const Dataset& train_ds, const Dataset& val_ds,
                                               std::span<const double> c_values,
                                               double tolerance) {
  const auto cs = sorted_unique(std::vector<double>(c_values.begin(), c_values.end()));
  if (cs.empty()) throw ConfigError("empty C grid");
  CrossValidationResult best;
  bool have_best = false;
  for (double c : cs) {
    LinearModel model = train_full_info_ranker(train_ds, c, tolerance);
    const double risk = full_info_risk(model, val_ds);
    best.scores.push_back({c, 0.0, risk});
    if (!have_best || risk <= best.validation_risk) {
      best.model = std::move(model);
      best.c = c;
      best.validation_risk = risk;
      have_best = true;
    }
  }
  return best;
}

void write_model(const LinearModel& model, std::ostream& out) {
  out << "dim=" << model.dim() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < model.dim(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", model.weights[i]);
    if (i) out << ' ';
    out << buf;
  }
  out << '\n';
}

LinearModel read_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("dim=", 0) != 0) {
    throw ParseError(1, "expected 'dim=<d>'");
  }
  std::size_t dim = 0;
  {
    const char* begin = line.data() + 4;
    const char* end = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(begin, end, dim);
    if (ec != std::errc() || ptr != end) throw ParseError(1, "invalid dimension");
  }
  LinearModel model;
  if (!std::getline(in, line) && dim > 0) throw ParseError(2, "missing weights line");
  std::istringstream ss(line);
  std::string token;
  while (ss >> token) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
      throw ParseError(2, "invalid weight '" + token + "'");
    }
    model.weights.push_back(v);
  }
  if (model.dim() != dim) throw ParseError(2, "expected " + std::to_string(dim) + " weights");
  return model;
}

void save_model(const LinearModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_model(model, out);
}

LinearModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_model(in);
}

}  // namespace ultr
