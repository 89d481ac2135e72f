#ifndef ULTR_ESTIMATORS_H_
#define ULTR_ESTIMATORS_H_

#include <cstddef>
#include <cstdint>

#include "ultr/click_simulator.h"
#include "ultr/dataset.h"
#include "ultr/ranking.h"

namespace ultr {

enum class EstimatorKind { kNaive, kIps, kClippedIps };

const char* estimator_name(EstimatorKind kind);

/// How a click's propensity q becomes an inverse weight:
/// naive 1, ips q, clipped max(tau, q).
struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::kIps;
  double tau = 0.0;

  static EstimatorConfig naive() { return {EstimatorKind::kNaive, 0.0}; }
  static EstimatorConfig ips() { return {EstimatorKind::kIps, 0.0}; }
  /// tau in (0, 1]; tau == 0 is plain IPS.
  static EstimatorConfig clipped(double tau);

  void validate() const;
  /// Denominator for a click with propensity q. DataError if it is not > 0.
  double denominator(double q) const;
};

struct RiskEstimate {
  double value = 0.0;
  std::uint64_t n_clicks = 0;
  std::uint64_t n_impressions = 0;
};

/// (1 / n_impressions) * sum over clicks of rank(clicked | model) / weight.
RiskEstimate estimate_risk(const LinearModel& model, const ClickLog& log, const Dataset& ds,
                           const EstimatorConfig& cfg);

inline constexpr std::size_t kMaxExactCandidates = 12;
inline constexpr double kTieEpsilon = 1e-9;

/// Exact expectation of the per-impression IPS estimate of `model` when
/// `presented` is shown, by enumerating all 2^|Y| click patterns.
/// Noise values need only lie in [0, 1] (eps_minus == eps_plus allowed).
/// ConfigError beyond kMaxExactCandidates candidates.
double exact_expected_ips(const LinearModel& model, const QueryInstance& q,
                          const Ranking& presented, const BiasProfile& profile,
                          const NoiseParams& noise);

/// Mean of exact_expected_ips over the queries, each presented by `presenter`.
double exact_expected_ips_risk(const LinearModel& model, const Dataset& ds,
                               const LinearModel& presenter, const BiasProfile& profile,
                               const NoiseParams& noise);

/// True iff the expected IPS risk difference of the two models has the same
/// sign as their true risk difference (|diff| < kTieEpsilon is a tie; two
/// ties agree). Presentations use the all-zero ranker.
bool verify_order_preservation(const LinearModel& first, const LinearModel& second,
                               const Dataset& ds, const BiasProfile& profile,
                               const NoiseParams& noise);

}  // namespace ultr

#endif  // ULTR_ESTIMATORS_H_
