#include "ultr/estimators.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "ultr/errors.h"

namespace ultr {

const char* estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kNaive:
      return "naive";
    case EstimatorKind::kIps:
      return "ips";
    case EstimatorKind::kClippedIps:
      return "clipped_ips";
  }
  return "unknown";
}

EstimatorConfig EstimatorConfig::clipped(double tau) {
  if (tau == 0.0) return ips();
  EstimatorConfig cfg{EstimatorKind::kClippedIps, tau};
  cfg.validate();
  return cfg;
}

void EstimatorConfig::validate() const {
  if (kind == EstimatorKind::kClippedIps && !(tau > 0.0 && tau <= 1.0)) {
    throw ConfigError("clipping threshold tau must lie in (0, 1]");
  }
}

double EstimatorConfig::denominator(double q) const {
  switch (kind) {
    case EstimatorKind::kNaive:
      return 1.0;
    case EstimatorKind::kIps:
      if (!(q > 0.0)) throw DataError("propensity must be > 0 for IPS, got " + std::to_string(q));
      return q;
    case EstimatorKind::kClippedIps:
      return std::max(tau, q);
  }
  return 1.0;
}

RiskEstimate estimate_risk(const LinearModel& model, const ClickLog& log, const Dataset& ds,
                           const EstimatorConfig& cfg) {
  cfg.validate();
  RiskEstimate est;
  est.n_clicks = log.records.size();
  est.n_impressions = log.n_query_impressions;
  if (log.records.empty()) return est;
  if (log.n_query_impressions == 0) throw DataError("click log with clicks but no impressions");

  const QueryIndex index = index_queries(ds);
  std::vector<std::optional<std::vector<int>>> ranks(ds.queries.size());
  double total = 0.0;
  for (const auto& rec : log.records) {
    const auto it = index.find(rec.query_id);
    if (it == index.end()) throw DataError("unknown query id '" + rec.query_id + "'");
    const QueryInstance& q = ds.queries[it->second];
    auto& r = ranks[it->second];
    if (!r) r = candidate_ranks(model, q);
    const auto di = q.index_of(rec.clicked_doc_id);
    if (!di) {
      throw DataError("clicked doc " + std::to_string(rec.clicked_doc_id) +
                      " not a candidate of query '" + rec.query_id + "'");
    }
    total += (*r)[*di] / cfg.denominator(rec.propensity);
  }
  est.value = total / static_cast<double>(log.n_query_impressions);
  return est;
}

double exact_expected_ips(const LinearModel& model, const QueryInstance& q,
                          const Ranking& presented, const BiasProfile& profile,
                          const NoiseParams& noise) {
  const std::size_t n = q.size();
  if (n > kMaxExactCandidates) {
    throw ConfigError("exact enumeration limited to " + std::to_string(kMaxExactCandidates) +
                      " candidates, query '" + q.query_id + "' has " + std::to_string(n));
  }
  if (presented.size() != n) throw DataError("presented ranking is not a permutation of the candidates");
  profile.validate();
  if (!(noise.eps_plus >= 0.0 && noise.eps_plus <= 1.0 && noise.eps_minus >= 0.0 &&
        noise.eps_minus <= 1.0)) {
    throw ConfigError("click probabilities must lie in [0, 1]");
  }

  const auto model_ranks = candidate_ranks(model, q);
  std::vector<double> click_prob(n);
  std::vector<double> contribution(n);
  std::vector<bool> seen(n, false);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const auto di = q.index_of(presented.doc_ids[pos]);
    if (!di || seen[*di]) throw DataError("presented ranking is not a permutation of the candidates");
    seen[*di] = true;
    const double p = examination_probability(static_cast<int>(pos) + 1, profile);
    click_prob[pos] = p * noise.click_probability(q.candidates[*di].relevant);
    contribution[pos] = model_ranks[*di] / p;
  }

  double expectation = 0.0;
  const std::size_t patterns = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < patterns; ++mask) {
    double prob = 1.0;
    double estimate = 0.0;
    for (std::size_t pos = 0; pos < n; ++pos) {
      if (mask & (std::size_t{1} << pos)) {
        prob *= click_prob[pos];
        estimate += contribution[pos];
      } else {
        prob *= 1.0 - click_prob[pos];
      }
    }
    expectation += prob * estimate;
  }
  return expectation;
}

double exact_expected_ips_risk(const LinearModel& model, const Dataset& ds,
                               const LinearModel& presenter, const BiasProfile& profile,
                               const NoiseParams& noise) {
  if (ds.queries.empty()) throw ConfigError("expected IPS risk of an empty dataset");
  double total = 0.0;
  for (const auto& q : ds.queries) {
    total += exact_expected_ips(model, q, rank_candidates(presenter, q), profile, noise);
  }
  return total / static_cast<double>(ds.queries.size());
}

namespace {

int sign_with_ties(double x) {
  if (std::abs(x) < kTieEpsilon) return 0;
  return x > 0.0 ? 1 : -1;
}

}  // namespace

bool verify_order_preservation(const LinearModel& first, const LinearModel& second,
                               const Dataset& ds, const BiasProfile& profile,
                               const NoiseParams& noise) {
  const LinearModel presenter(ds.feature_dim);
  const double expected_diff = exact_expected_ips_risk(first, ds, presenter, profile, noise) -
                               exact_expected_ips_risk(second, ds, presenter, profile, noise);
  const double true_diff = full_info_risk(first, ds) - full_info_risk(second, ds);
  return sign_with_ties(expected_diff) == sign_with_ties(true_diff);
}

}  // namespace ultr
