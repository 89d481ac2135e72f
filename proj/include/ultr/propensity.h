#ifndef ULTR_PROPENSITY_H_
#define ULTR_PROPENSITY_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ultr/click_simulator.h"
#include "ultr/dataset.h"
#include "ultr/ranking.h"

namespace ultr {

inline constexpr double kDefaultPropensityClamp = 1e-6;

/// Examination probabilities p_1..p_{r_max}, known up to a positive
/// constant and normalized so the landmark rank has p = 1. Ranks beyond
/// r_max reuse p_{r_max}.
struct PropensityModel {
  std::vector<double> p;
  int landmark_rank = 1;
  double smoothing = 0.0;
  double clamp = kDefaultPropensityClamp;

  int max_rank() const { return static_cast<int>(p.size()); }
  /// p_r for r >= 1; DomainError for r < 1.
  double propensity(int rank) const;
};

/// Model holding (1/r)^eta for r = 1..max_rank.
PropensityModel propensity_model_from_profile(const BiasProfile& profile, int max_rank);

struct SwapExperimentConfig {
  int landmark_rank = 1;
  std::vector<int> swap_ranks;
  std::uint64_t impressions_per_arm = 100000;
  std::uint64_t seed = 0;
};

struct SwapArm {
  int rank = 0;
  std::uint64_t impressions = 0;
  /// Clicks on the document originally at the landmark, now shown at `rank`.
  std::uint64_t clicks = 0;
  double ctr = 0.0;
  /// ctr / ctr of the landmark document in the no-swap arm.
  double ratio = 0.0;
  double std_error = 0.0;
};

struct SwapExperimentResult {
  int landmark_rank = 1;
  /// Sorted by rank; always contains the no-swap arm rank == landmark_rank.
  std::vector<SwapArm> arms;
  /// Clicks per presented rank / impressions in the no-swap arm.
  std::vector<double> no_swap_ctr_by_rank;
  std::size_t skipped_queries = 0;

  const SwapArm* arm(int rank) const;
};

/// Randomized swap intervention: for each arm r, every impression presents
/// the ranker's ranking with positions k and r exchanged and simulates
/// clicks under the true profile. Queries with fewer candidates than the
/// largest arm are skipped; ExperimentError if none remain.
SwapExperimentResult run_swap_experiment(const Dataset& ds, const LinearModel& ranker,
                                         const BiasProfile& true_profile,
                                         const NoiseParams& noise,
                                         const SwapExperimentConfig& cfg);

/// p_r = (1 - smoothing) * ratio_r + smoothing * ctr[r] / ctr[k], clamped to
/// [clamp, 1]. Swap arms must cover ranks 1..r_max. `overall_ctr_by_rank` is
/// only read when smoothing > 0; EstimationError if its landmark entry is 0.
PropensityModel fit_propensity_model(const SwapExperimentResult& result, double smoothing,
                                     std::span<const double> overall_ctr_by_rank,
                                     double clamp = kDefaultPropensityClamp);

/// Copy of `log` with each propensity recomputed at its presented rank.
ClickLog relabel_log(const ClickLog& log, const PropensityModel& model);
ClickLog relabel_log(const ClickLog& log, const BiasProfile& assumed);

// TSV: '#' comment lines recording smoothing, landmark, r_max and clamp,
// then a "rank\tp" header and one row per rank.
void write_propensity_model(const PropensityModel& model, std::ostream& out);
PropensityModel read_propensity_model(std::istream& in);
void save_propensity_model(const PropensityModel& model, const std::string& path);
PropensityModel load_propensity_model(const std::string& path);

}  // namespace ultr

#endif  // ULTR_PROPENSITY_H_
