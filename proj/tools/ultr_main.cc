// ultr: click simulation, propensity estimation, training and the sweep
// experiments from the command line.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ultr/click_simulator.h"
#include "ultr/dataset.h"
#include "ultr/errors.h"
#include "ultr/estimators.h"
#include "ultr/experiment.h"
#include "ultr/learning.h"
#include "ultr/propensity.h"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::uint64_t seed = 1;
  std::string out = ".";
  std::string dataset = "synthetic";
  std::vector<double> eta{1.0};
  double eps_plus = 1.0;
  std::vector<double> eps_minus{0.1};
  std::vector<std::uint64_t> n_clicks{2000, 5000, 20000, 50000};
  std::vector<double> assumed_eta{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  std::vector<double> tau_grid{1.0, 0.3, 0.1, 0.03, 0.01, 0.0};
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};

  double prod_fraction = 0.01;
  int n_seeds = 5;
  std::uint64_t average_below = 20000;
  double validation_fraction = 0.15;
  double tolerance = 1e-4;
  int threads = 1;
  bool gnuplot = false;
  bool no_clipped = false;

  std::uint64_t corpus_seed = 1;
  std::size_t train_queries = 500;
  std::size_t validation_queries = 75;
  std::size_t test_queries = 1000;
  std::size_t candidates = 30;
  std::size_t features = 20;
  double relevant_fraction = 0.1;
  double noise_scale = 0.2;
  int binarize_at = ultr::kDefaultBinarizeAt;

  // simulate / train / evaluate
  std::string split = "train";
  std::string ranker;
  std::string clicks;
  std::string val_clicks;
  std::string propensities;
  std::string model;
  std::string method = "propensity";

  // estimate-propensities
  int max_rank = 10;
  int landmark = 1;
  std::uint64_t impressions_per_arm = 100000;
  double smoothing = 0.0;
};

ultr::ExperimentSpec make_spec(const Options& o) {
  ultr::ExperimentSpec spec;
  if (o.dataset != "synthetic") spec.dataset.letor_dir = o.dataset;
  spec.dataset.binarize_at = o.binarize_at;
  spec.dataset.synthetic.seed = o.corpus_seed;
  spec.dataset.synthetic.n_candidates = o.candidates;
  spec.dataset.synthetic.feature_dim = o.features;
  spec.dataset.synthetic.relevant_fraction = o.relevant_fraction;
  spec.dataset.synthetic.noise_scale = o.noise_scale;
  spec.dataset.n_train = o.train_queries;
  spec.dataset.n_validation = o.validation_queries;
  spec.dataset.n_test = o.test_queries;
  spec.prod_fraction = o.prod_fraction;
  spec.profile = ultr::BiasProfile{o.eta.front()};
  spec.noise = ultr::NoiseParams{o.eps_plus, o.eps_minus.front()};
  spec.n_clicks = o.n_clicks;
  spec.etas = o.eta;
  spec.eps_minus_values = o.eps_minus;
  spec.assumed_etas = o.assumed_eta;
  spec.c_grid = o.c_grid;
  spec.tau_grid = o.tau_grid;
  spec.validation_fraction = o.validation_fraction;
  spec.seed = o.seed;
  spec.average_below = o.average_below;
  spec.n_seeds = o.n_seeds;
  spec.clipped = !o.no_clipped;
  spec.tolerance = o.tolerance;
  spec.threads = o.threads;
  return spec;
}

void require_single(const std::vector<double>& values, const char* flag) {
  if (values.size() != 1) {
    throw ultr::ConfigError(std::string(flag) + " takes a single value for this command");
  }
}

fs::path out_dir(const Options& o) {
  fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ultr::DataError("cannot create output directory '" + o.out + "': " + ec.message());
  return dir;
}

const ultr::Dataset& split_of(const ultr::Corpus& corpus, const std::string& name) {
  if (name == "train") return corpus.train;
  if (name == "validation") return corpus.validation;
  if (name == "test") return corpus.test;
  throw ultr::ConfigError("--split must be train, validation or test");
}

ultr::LinearModel presenter(const Options& o, const ultr::Corpus& corpus,
                            const ultr::ExperimentSpec& spec) {
  if (!o.ranker.empty()) return ultr::load_model(o.ranker);
  return ultr::train_baselines(corpus, spec).prod;
}

std::uint64_t single_n(const Options& o) {
  if (o.n_clicks.size() != 1) throw ultr::ConfigError("--n-clicks takes a single value for this command");
  return o.n_clicks.front();
}

int cmd_simulate(const Options& o) {
  require_single(o.eta, "--eta");
  require_single(o.eps_minus, "--eps-minus");
  const auto spec = make_spec(o);
  spec.validate();
  const auto corpus = ultr::load_corpus(spec.dataset);
  const auto ranker = presenter(o, corpus, spec);
  const auto log = ultr::simulate_until_clicks(split_of(corpus, o.split), ranker, spec.profile,
                                               spec.noise, single_n(o), o.seed);
  const auto path = (out_dir(o) / "clicks.tsv").string();
  ultr::save_click_log(log, path);
  std::printf("%zu clicks from %llu impressions, %.4f on irrelevant documents -> %s\n",
              log.records.size(), static_cast<unsigned long long>(log.n_query_impressions),
              ultr::noisy_click_fraction(log, split_of(corpus, o.split)), path.c_str());
  return 0;
}

int cmd_estimate_propensities(const Options& o) {
  require_single(o.eta, "--eta");
  require_single(o.eps_minus, "--eps-minus");
  if (o.max_rank < 1) throw ultr::ConfigError("--max-rank must be >= 1");
  const auto spec = make_spec(o);
  spec.validate();
  const auto corpus = ultr::load_corpus(spec.dataset);
  const auto ranker = presenter(o, corpus, spec);
  ultr::PropensityEstimationSpec pe;
  pe.swap.landmark_rank = o.landmark;
  pe.swap.swap_ranks.resize(static_cast<std::size_t>(o.max_rank));
  std::iota(pe.swap.swap_ranks.begin(), pe.swap.swap_ranks.end(), 1);
  pe.swap.impressions_per_arm = o.impressions_per_arm;
  pe.swap.seed = o.seed;
  pe.smoothing = o.smoothing;
  const auto est = ultr::estimate_propensities(corpus.train, ranker, spec.profile, spec.noise, pe);
  const auto path = (out_dir(o) / "propensities.tsv").string();
  ultr::save_propensity_model(est.model, path);
  ultr::write_swap_table(est, std::cout);
  std::printf("-> %s\n", path.c_str());
  return 0;
}

int cmd_train(const Options& o) {
  require_single(o.eta, "--eta");
  require_single(o.eps_minus, "--eps-minus");
  const auto spec = make_spec(o);
  spec.validate();
  const auto corpus = ultr::load_corpus(spec.dataset);
  const auto dir = out_dir(o);
  const auto path = (dir / "model.txt").string();

  if (o.method == "skyline" || o.method == "prod") {
    const auto b = ultr::train_baselines(corpus, spec);
    const bool sky = o.method == "skyline";
    ultr::save_model(sky ? b.skyline : b.prod, path);
    std::printf("%s: C=%s test_risk=%.6f -> %s\n", o.method.c_str(),
                ultr::format_value(sky ? b.skyline_c : b.prod_c).c_str(),
                sky ? b.skyline_risk : b.prod_risk, path.c_str());
    return 0;
  }

  ultr::TrainingMode mode = ultr::TrainingMode::kPropensity;
  std::vector<double> taus{0.0};
  if (o.method == "naive") {
    mode = ultr::TrainingMode::kNaive;
  } else if (o.method == "clipped") {
    taus = o.tau_grid;
  } else if (o.method != "propensity") {
    throw ultr::ConfigError("--method must be naive, propensity, clipped, skyline or prod");
  }

  std::optional<ultr::LinearModel> ranker;
  auto get_ranker = [&]() -> const ultr::LinearModel& {
    if (!ranker) ranker = presenter(o, corpus, spec);
    return *ranker;
  };
  const std::uint64_t n = single_n(o);
  ultr::ClickLog train_log =
      o.clicks.empty()
          ? ultr::simulate_until_clicks(corpus.train, get_ranker(), spec.profile, spec.noise, n,
                                        ultr::derive_seed(o.seed, 0))
          : ultr::load_click_log(o.clicks);
  ultr::ClickLog val_log;
  if (!o.val_clicks.empty()) {
    val_log = ultr::load_click_log(o.val_clicks);
  } else {
    const auto n_val = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::llround(
               spec.validation_fraction * static_cast<double>(train_log.records.size()))));
    val_log = ultr::simulate_until_clicks(corpus.validation, get_ranker(), spec.profile,
                                          spec.noise, n_val, ultr::derive_seed(o.seed, 1));
  }
  if (!o.propensities.empty()) {
    const auto pm = ultr::load_propensity_model(o.propensities);
    train_log = ultr::relabel_log(train_log, pm);
    val_log = ultr::relabel_log(val_log, pm);
  }

  ultr::HyperparamGrid grid;
  grid.c_values = spec.c_grid;
  grid.tau_values = taus;
  ultr::LearnerConfig base;
  base.tolerance = spec.tolerance;
  base.seed = o.seed;
  base.feature_dim = corpus.train.feature_dim;
  const auto cv = ultr::cross_validate(train_log, val_log, corpus.train, corpus.validation, grid,
                                       mode, base);
  ultr::save_model(cv.model, path);
  std::printf("%s: C=%s tau=%s validation_estimate=%.6f test_risk=%.6f -> %s\n", o.method.c_str(),
              ultr::format_value(cv.c).c_str(), ultr::format_value(cv.tau).c_str(),
              cv.validation_risk, ultr::full_info_risk(cv.model, corpus.test), path.c_str());
  return 0;
}

int cmd_evaluate(const Options& o) {
  if (o.model.empty()) throw ultr::ConfigError("--model is required");
  const auto spec = make_spec(o);
  spec.validate();
  const auto corpus = ultr::load_corpus(spec.dataset);
  const auto model = ultr::load_model(o.model);
  std::vector<std::pair<std::string, double>> metrics{
      {"test_risk", ultr::full_info_risk(model, corpus.test)}};
  if (!o.clicks.empty()) {
    const auto log = ultr::load_click_log(o.clicks);
    const auto& ds = split_of(corpus, o.split);
    metrics.emplace_back("naive_estimate",
                         ultr::estimate_risk(model, log, ds, ultr::EstimatorConfig::naive()).value);
    metrics.emplace_back("ips_estimate",
                         ultr::estimate_risk(model, log, ds, ultr::EstimatorConfig::ips()).value);
    for (double tau : o.tau_grid) {
      if (tau <= 0.0) continue;
      metrics.emplace_back(
          "clipped_ips_estimate@" + ultr::format_value(tau),
          ultr::estimate_risk(model, log, ds, ultr::EstimatorConfig::clipped(tau)).value);
    }
  }
  const auto path = (out_dir(o) / "evaluate.csv").string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ultr::DataError("cannot write '" + path + "'");
  ultr::write_csv_row(out, {"metric", "value"});
  for (const auto& [name, value] : metrics) {
    ultr::write_csv_row(out, {name, ultr::format_value(value)});
    std::printf("%-28s %.6f\n", name.c_str(), value);
  }
  return 0;
}

void print_rows(const std::vector<ultr::ResultRow>& rows) {
  std::printf("%-12s %-10s %-20s %8s %10s %8s\n", "sweep", "value", "method", "n", "risk", "sd");
  for (const auto& r : rows) {
    std::printf("%-12s %-10s %-20s %8llu %10.4f %8.4f\n", r.sweep.c_str(),
                r.sweep_value.empty() ? "-" : r.sweep_value.c_str(), r.method.c_str(),
                static_cast<unsigned long long>(r.n_clicks), r.test_risk, r.test_risk_sd);
  }
}

int run_sweep(const Options& o, const std::string& name,
              ultr::ExperimentResult (*sweep)(const ultr::ExperimentSpec&)) {
  const auto spec = make_spec(o);
  const auto result = sweep(spec);
  const auto dir = out_dir(o);
  ultr::save_results_csv(result.rows, (dir / (name + ".csv")).string());
  if (o.gnuplot) ultr::save_gnuplot_data(result.rows, (dir / (name + ".dat")).string());
  print_rows(result.rows);
  std::printf("-> %s\n", (dir / (name + ".csv")).string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unbiased learning-to-rank from simulated click logs"};
  app.set_config("--config", "", "Config file (key = value, flags override)");
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--dataset", o.dataset, "LETOR directory or 'synthetic'")->capture_default_str();
  auto* eta_opt = app.add_option("--eta", o.eta, "True position-bias exponent (list for bias-sweep)")
                      ->delimiter(',')
                      ->capture_default_str();
  app.add_option("--eps-plus", o.eps_plus, "Click probability of examined relevant documents")
      ->capture_default_str();
  auto* eps_opt = app.add_option("--eps-minus", o.eps_minus,
                                 "Click probability of examined irrelevant documents (list for noise-sweep)")
                      ->delimiter(',')
                      ->capture_default_str();
  auto* n_opt = app.add_option("--n-clicks", o.n_clicks, "Training clicks (list for sweeps)")
                    ->delimiter(',')
                    ->capture_default_str();
  auto* assumed_opt = app.add_option("--assumed-eta", o.assumed_eta, "Assumed eta values for misspec-sweep")
                          ->delimiter(',')
                          ->capture_default_str();
  app.add_option("--tau-grid", o.tau_grid, "Clipping thresholds (0 = unclipped)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--c-grid", o.c_grid, "Regularization values")->delimiter(',')->capture_default_str();
  app.add_option("--prod-fraction", o.prod_fraction, "Training-query fraction for the production ranker")
      ->capture_default_str();
  app.add_option("--n-seeds", o.n_seeds, "Draws averaged below --average-below clicks")->capture_default_str();
  app.add_option("--average-below", o.average_below, "Click count below which draws are averaged")
      ->capture_default_str();
  app.add_option("--validation-fraction", o.validation_fraction, "Validation clicks relative to training")
      ->capture_default_str();
  app.add_option("--tolerance", o.tolerance, "Relative duality-gap tolerance")->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads for sweep points")->capture_default_str();
  app.add_flag("--gnuplot", o.gnuplot, "Also write a gnuplot data file");
  app.add_flag("--no-clipped", o.no_clipped, "Skip the clipped propensity method in learning-curve");
  app.add_option("--corpus-seed", o.corpus_seed, "Synthetic corpus seed")->capture_default_str();
  app.add_option("--train-queries", o.train_queries, "Synthetic training queries")->capture_default_str();
  app.add_option("--validation-queries", o.validation_queries, "Synthetic validation queries")
      ->capture_default_str();
  app.add_option("--test-queries", o.test_queries, "Synthetic test queries")->capture_default_str();
  app.add_option("--candidates", o.candidates, "Synthetic candidates per query")->capture_default_str();
  app.add_option("--features", o.features, "Synthetic feature dimension")->capture_default_str();
  app.add_option("--relevant-fraction", o.relevant_fraction, "Synthetic relevant fraction")
      ->capture_default_str();
  app.add_option("--noise-scale", o.noise_scale, "Synthetic label noise")->capture_default_str();
  app.add_option("--binarize-at", o.binarize_at, "LETOR grade threshold for relevance")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Simulate a click log");
  simulate->add_option("--split", o.split, "train, validation or test")->capture_default_str();
  simulate->add_option("--ranker", o.ranker, "Presenting model file (default: production ranker)");

  auto* estimate = app.add_subcommand("estimate-propensities", "Swap intervention propensity estimate");
  estimate->add_option("--ranker", o.ranker, "Presenting model file (default: production ranker)");
  estimate->add_option("--max-rank", o.max_rank, "Ranks 1..max_rank get an arm")->capture_default_str();
  estimate->add_option("--landmark", o.landmark, "Landmark rank k")->capture_default_str();
  estimate->add_option("--impressions-per-arm", o.impressions_per_arm)->capture_default_str();
  estimate->add_option("--smoothing", o.smoothing, "Weight of the CTR curve")->capture_default_str();

  auto* train = app.add_subcommand("train", "Train one ranker");
  train->add_option("--method", o.method, "naive, propensity, clipped, skyline or prod")
      ->capture_default_str();
  train->add_option("--clicks", o.clicks, "Training click log (default: simulate)");
  train->add_option("--val-clicks", o.val_clicks, "Validation click log (default: simulate)");
  train->add_option("--propensities", o.propensities, "Propensity model used to relabel the logs");
  train->add_option("--ranker", o.ranker, "Presenting model file for simulated logs");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a model on the test split");
  evaluate->add_option("--model", o.model, "Model file")->required();
  evaluate->add_option("--clicks", o.clicks, "Click log for counterfactual estimates");
  evaluate->add_option("--split", o.split, "Split the click log was drawn from")->capture_default_str();

  auto* lc = app.add_subcommand("learning-curve", "Test risk against the number of training clicks");
  auto* bias = app.add_subcommand("bias-sweep", "Test risk against the position-bias exponent");
  auto* noise = app.add_subcommand("noise-sweep", "Test risk against the click-noise level");
  auto* misspec = app.add_subcommand("misspec-sweep", "Test risk against the assumed bias exponent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (simulate->parsed() || train->parsed()) {
      if (n_opt->count() == 0) o.n_clicks = {50000};
    }
    if (bias->parsed()) {
      if (eta_opt->count() == 0) o.eta = {0.0, 0.5, 1.0, 1.5, 2.0};
      if (eps_opt->count() == 0) o.eps_minus = {0.0};
      if (n_opt->count() == 0) o.n_clicks = {10000, 50000};
      require_single(o.eps_minus, "--eps-minus");
    }
    if (noise->parsed()) {
      require_single(o.eta, "--eta");
      if (eps_opt->count() == 0) o.eps_minus = {0.0, 0.1, 0.2, 0.3};
      if (n_opt->count() == 0) o.n_clicks = {50000};
    }
    if (misspec->parsed()) {
      require_single(o.eta, "--eta");
      require_single(o.eps_minus, "--eps-minus");
      if (n_opt->count() == 0) o.n_clicks = {50000};
    }
    if (lc->parsed()) {
      require_single(o.eta, "--eta");
      require_single(o.eps_minus, "--eps-minus");
    }
    (void)assumed_opt;

    if (simulate->parsed()) return cmd_simulate(o);
    if (estimate->parsed()) return cmd_estimate_propensities(o);
    if (train->parsed()) return cmd_train(o);
    if (evaluate->parsed()) return cmd_evaluate(o);
    if (lc->parsed()) return run_sweep(o, "learning_curve", ultr::learning_curve);
    if (bias->parsed()) return run_sweep(o, "bias_sweep", ultr::bias_sweep);
    if (noise->parsed()) return run_sweep(o, "noise_sweep", ultr::noise_sweep);
    if (misspec->parsed()) return run_sweep(o, "misspec_sweep", ultr::misspec_sweep);
  } catch (const ultr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ultr::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
