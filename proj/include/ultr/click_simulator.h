#ifndef ULTR_CLICK_SIMULATOR_H_
#define ULTR_CLICK_SIMULATOR_H_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ultr/dataset.h"
#include "ultr/random.h"
#include "ultr/ranking.h"

namespace ultr {

/// Position bias p_r = (1/r)^eta.
struct BiasProfile {
  double eta = 1.0;

  void validate() const;
};

/// Click probability of an examined result: eps_plus if relevant, eps_minus
/// otherwise. Requires 1 >= eps_plus > eps_minus >= 0.
struct NoiseParams {
  double eps_plus = 1.0;
  double eps_minus = 0.1;

  void validate() const;
  double click_probability(bool relevant) const { return relevant ? eps_plus : eps_minus; }
};

/// Examination probability at 1-based rank r; DomainError for r < 1.
double examination_probability(int rank, const BiasProfile& profile);

struct ClickRecord {
  std::uint64_t impression_id = 0;
  std::string query_id;
  std::shared_ptr<const Ranking> presented;
  DocId clicked_doc_id = 0;
  int presented_rank = 0;
  double propensity = 1.0;
};

struct GeneratorConfig {
  BiasProfile profile;
  NoiseParams noise;
  std::uint64_t seed = 0;
  /// Provenance of the propensity column ("true", "eta=0.5", a model file).
  std::string propensity_source = "true";
};

struct ClickLog {
  std::vector<ClickRecord> records;
  std::uint64_t n_query_impressions = 0;
  GeneratorConfig config;
};

/// Per-position examination and click outcome of one impression.
struct ImpressionTrace {
  std::vector<std::uint8_t> examined;
  std::vector<std::uint8_t> clicked;
};

/// Simulates one impression of `q` presented in candidate-index order
/// `presented`. Positions are examined independently.
ImpressionTrace simulate_impression(const QueryInstance& q, std::span<const std::size_t> presented,
                                    const BiasProfile& profile, const NoiseParams& noise,
                                    SplitMix64& rng);

/// Draws n_impressions queries uniformly with replacement, presents the
/// ranker's ranking and emits one record per click. Impression i uses the
/// RNG stream derive_seed(seed, i).
ClickLog simulate_clicks(const Dataset& ds, const LinearModel& ranker, const BiasProfile& profile,
                         const NoiseParams& noise, std::uint64_t n_impressions,
                         std::uint64_t seed);

/// As simulate_clicks, but keeps drawing impressions until at least
/// `n_clicks` clicks were recorded. A log with a larger target and the same
/// seed extends the smaller one.
ClickLog simulate_until_clicks(const Dataset& ds, const LinearModel& ranker,
                               const BiasProfile& profile, const NoiseParams& noise,
                               std::uint64_t n_clicks, std::uint64_t seed);

/// clicks at presented rank r / n_query_impressions, index r - 1.
std::vector<double> empirical_click_rate_by_rank(const ClickLog& log);

/// Fraction of records whose clicked document is irrelevant in `ds`.
double noisy_click_fraction(const ClickLog& log, const Dataset& ds);

/// Closed-form expected fraction of clicks on irrelevant documents for
/// impressions drawn uniformly over `ds` and presented by `ranker`.
double expected_noisy_click_fraction(const Dataset& ds, const LinearModel& ranker,
                                     const BiasProfile& profile, const NoiseParams& noise);

// TSV with '#'-prefixed metadata lines, then a header row and one row per
// click: impression_id, query_id, presented_ranking, clicked_doc_id,
// presented_rank, propensity (12 significant digits).
void write_click_log(const ClickLog& log, std::ostream& out);
ClickLog read_click_log(std::istream& in);
void save_click_log(const ClickLog& log, const std::string& path);
ClickLog load_click_log(const std::string& path);

}  // namespace ultr

#endif  // ULTR_CLICK_SIMULATOR_H_
