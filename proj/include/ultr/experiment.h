#ifndef ULTR_EXPERIMENT_H_
#define ULTR_EXPERIMENT_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ultr/click_simulator.h"
#include "ultr/dataset.h"
#include "ultr/learning.h"
#include "ultr/propensity.h"
#include "ultr/ranking.h"

namespace ultr {

/// Either a LETOR directory (train.txt, vali.txt, test.txt) or a synthetic
/// corpus drawn from one pool and split in order.
struct DatasetSource {
  std::string letor_dir;  // empty selects the synthetic corpus
  int binarize_at = kDefaultBinarizeAt;
  SyntheticConfig synthetic;
  std::size_t n_train = 500;
  std::size_t n_validation = 75;
  std::size_t n_test = 1000;

  bool is_synthetic() const { return letor_dir.empty(); }
  std::string describe() const;
};

struct Corpus {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// DataError for missing or malformed files, ConfigError for bad sizes.
Corpus load_corpus(const DatasetSource& source);

struct ExperimentSpec {
  DatasetSource dataset;
  double prod_fraction = 0.01;
  BiasProfile profile;
  NoiseParams noise;
  std::vector<std::uint64_t> n_clicks{2000, 5000, 20000, 50000};
  std::vector<double> etas{0.0, 0.5, 1.0, 1.5, 2.0};
  std::vector<double> eps_minus_values{0.0, 0.1, 0.2, 0.3};
  std::vector<double> assumed_etas{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  std::vector<double> tau_grid{1.0, 0.3, 0.1, 0.03, 0.01, 0.0};
  /// Validation log size relative to the training log, in clicks.
  double validation_fraction = 0.15;
  std::uint64_t seed = 1;
  /// Click counts below this are averaged over `n_seeds` draws.
  std::uint64_t average_below = 20000;
  int n_seeds = 5;
  bool clipped = true;
  double tolerance = 1e-4;
  int threads = 1;

  /// ConfigError on out-of-range values or empty grids.
  void validate() const;
  /// Canonical text of every field; the config hash is taken over it.
  std::string describe() const;
  std::string config_hash() const;
};

/// Production ranker (full-information Ranking SVM on a query subsample of
/// the training split) and skyline (all training queries), each with C
/// chosen on the validation split.
struct Baselines {
  LinearModel prod;
  double prod_c = 0.0;
  double prod_risk = 0.0;
  LinearModel skyline;
  double skyline_c = 0.0;
  double skyline_risk = 0.0;
};

Baselines train_baselines(const Corpus& corpus, const ExperimentSpec& spec);

struct ResultRow {
  std::string sweep;        // n_clicks, eta, eps_minus or assumed_eta
  std::string sweep_value;  // empty for rows not tied to a sweep point
  std::string method;       // prod_baseline, naive, propensity, propensity_clipped, skyline
  std::uint64_t n_clicks = 0;
  double test_risk = 0.0;
  double test_risk_sd = 0.0;
  std::uint64_t clicks = 0;       // mean over draws of recorded clicks
  std::uint64_t impressions = 0;  // mean over draws of query impressions
  std::uint64_t seed = 0;
  int n_seeds = 0;
  std::string c;    // chosen C per draw, ';'-separated
  std::string tau;  // chosen tau per draw, ';'-separated
  /// Mean fraction of training clicks on irrelevant documents; negative for
  /// rows not trained on clicks.
  double noisy_click_fraction = -1.0;
  std::string config_hash;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  Baselines baselines;

  /// First row matching method, sweep value and n (n = 0 matches any).
  const ResultRow* find(const std::string& method, const std::string& sweep_value = "",
                        std::uint64_t n_clicks = 0) const;
};

std::string format_value(double v);

/// n-click sweep with naive, propensity and clipped propensity rows.
ExperimentResult learning_curve(const ExperimentSpec& spec);
ExperimentResult learning_curve(const ExperimentSpec& spec, const Corpus& corpus,
                                const Baselines& baselines);

/// eta sweep at every n in spec.n_clicks (typically n and 5n).
ExperimentResult bias_sweep(const ExperimentSpec& spec);
ExperimentResult bias_sweep(const ExperimentSpec& spec, const Corpus& corpus,
                            const Baselines& baselines);

/// eps_minus sweep at every n in spec.n_clicks under spec.profile.
ExperimentResult noise_sweep(const ExperimentSpec& spec);
ExperimentResult noise_sweep(const ExperimentSpec& spec, const Corpus& corpus,
                             const Baselines& baselines);

/// Logs drawn under spec.profile, relabeled with each assumed eta; one
/// propensity row per assumed eta and one naive row per n.
ExperimentResult misspec_sweep(const ExperimentSpec& spec);
ExperimentResult misspec_sweep(const ExperimentSpec& spec, const Corpus& corpus,
                               const Baselines& baselines);

struct PropensityEstimationSpec {
  SwapExperimentConfig swap;
  double smoothing = 0.0;
  double clamp = kDefaultPropensityClamp;
};

struct PropensityEstimate {
  SwapExperimentResult experiment;
  PropensityModel model;
};

/// Swap intervention on the training split presented by `ranker`.
PropensityEstimate estimate_propensities(const Dataset& ds, const LinearModel& ranker,
                                         const BiasProfile& profile, const NoiseParams& noise,
                                         const PropensityEstimationSpec& spec);

void write_swap_table(const PropensityEstimate& estimate, std::ostream& out);

// CSV with a header row, RFC-4180 quoting and CRLF line ends.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);
void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out);
void save_results_csv(const std::vector<ResultRow>& rows, const std::string& path);

/// gnuplot data: one block per method (separated by two blank lines),
/// columns sweep_value n_clicks test_risk test_risk_sd.
void write_gnuplot_data(const std::vector<ResultRow>& rows, std::ostream& out);
void save_gnuplot_data(const std::vector<ResultRow>& rows, const std::string& path);

}  // namespace ultr

#endif  // ULTR_EXPERIMENT_H_
