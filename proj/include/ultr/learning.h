#ifndef ULTR_LEARNING_H_
#define ULTR_LEARNING_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ultr/click_simulator.h"
#include "ultr/dataset.h"
#include "ultr/estimators.h"
#include "ultr/ranking.h"

namespace ultr {

/// One click: the full candidate set of its query, the clicked candidate and
/// the inverse-propensity weight 1 / max(tau, q) (1 for naive weighting).
/// `query` points into a Dataset that must outlive the example.
struct TrainingExample {
  const QueryInstance* query = nullptr;
  std::size_t clicked = 0;
  double ips_weight = 1.0;
};

std::vector<TrainingExample> make_training_examples(const ClickLog& log, const Dataset& ds,
                                                    const EstimatorConfig& weighting);

struct LearnerConfig {
  double c = 1.0;
  EstimatorConfig estimator = EstimatorConfig::ips();
  /// Relative primal-dual gap at which training stops.
  double tolerance = 1e-4;
  int max_epochs = 1000;
  std::uint64_t seed = 0;
  /// Dimension of the zero model returned for an empty example set; 0 means
  /// infer from the examples.
  std::size_t feature_dim = 0;
};

/// Per-epoch progress of the dual coordinate-descent solver.
struct TrainingTrace {
  std::vector<double> dual;    // non-decreasing
  std::vector<double> primal;  // objective of the current iterate
  int epochs = 0;
  bool converged = false;
};

/// 1/2 |w|^2 + (C/n) sum_j (1/q_j) sum_{y != y_j} max(0, 1 - w.(phi(y_j) - phi(y))).
double propensity_objective(const LinearModel& w, std::span<const TrainingExample> examples,
                            double c);

LinearModel train_propensity_ranker(std::span<const TrainingExample> examples,
                                    const LearnerConfig& cfg, TrainingTrace* trace = nullptr);

/// train_propensity_ranker with every ips_weight set to 1.
LinearModel train_naive_ranker(std::span<const TrainingExample> examples,
                               const LearnerConfig& cfg, TrainingTrace* trace = nullptr);

/// 1/2 |w|^2 + (C/P) sum over within-query (relevant, irrelevant) pairs of
/// the pairwise hinge, P the number of pairs.
double full_info_objective(const LinearModel& w, const Dataset& ds, double c);

/// Ranking SVM on full relevance information. ConfigError without pairs.
LinearModel train_full_info_ranker(const Dataset& ds, double c, double tolerance = 1e-4,
                                   TrainingTrace* trace = nullptr, int max_epochs = 1000);

struct HyperparamGrid {
  std::vector<double> c_values{0.01, 0.1, 1.0, 10.0, 100.0};
  /// Clipping thresholds; 0 means unclipped IPS. Ignored in naive mode.
  std::vector<double> tau_values{0.0};
};

enum class TrainingMode { kPropensity, kNaive };

struct GridPoint {
  double c = 0.0;
  double tau = 0.0;
  double validation_risk = 0.0;
};

struct CrossValidationResult {
  LinearModel model;
  double c = 0.0;
  double tau = 0.0;
  double validation_risk = 0.0;
  std::vector<GridPoint> scores;
};

/// Trains one model per grid point on `train_log` and keeps the one with the
/// lowest validation estimate on `val_log` (unclipped IPS in propensity mode,
/// naive in naive mode). Ties go to larger C, then larger tau.
CrossValidationResult cross_validate(const ClickLog& train_log, const ClickLog& val_log,
                                     const Dataset& train_ds, const Dataset& val_ds,
                                     const HyperparamGrid& grid, TrainingMode mode,
                                     const LearnerConfig& base);

/// Selects C for train_full_info_ranker by full-information validation risk.
CrossValidationResult cross_validate_full_info(const Dataset& train_ds, const Dataset& val_ds,
                                               std::span<const double> c_values,
                                               double tolerance = 1e-4);

// Model file: "dim=<d>" then one line of space-separated weights, %.17g.
void write_model(const LinearModel& model, std::ostream& out);
LinearModel read_model(std::istream& in);
void save_model(const LinearModel& model, const std::string& path);
LinearModel load_model(const std::string& path);

}  // namespace ultr

#endif  // ULTR_LEARNING_H_
