#include "ultr/experiment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "ultr/errors.h"
#include "ultr/estimators.h"
#include "ultr/random.h"

namespace ultr {

namespace fs = std::filesystem;

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

namespace {

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    out += format_value(values[i]);
  }
  return out;
}

std::string join(const std::vector<std::uint64_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(values[i]);
  }
  return out;
}

void pad_features(Dataset& ds, std::size_t dim) {
  for (auto& q : ds.queries) {
    for (auto& d : q.candidates) d.features.resize(dim, 0.0);
  }
  ds.feature_dim = dim;
}

std::string find_split_file(const fs::path& dir, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    if (fs::is_regular_file(dir / name)) return (dir / name).string();
  }
  throw DataError("no " + std::string(*names.begin()) + " in '" + dir.string() + "'");
}

// Runs every job, on up to `threads` threads; rethrows the first failure in
// job order.
void run_jobs(std::vector<std::function<void()>>& jobs, int threads) {
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        jobs[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, threads));
  if (n == 1 || jobs.size() < 2) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(n, jobs.size()); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct MethodOutcome {
  double risk = 0.0;
  double c = 0.0;
  double tau = 0.0;
};

// One simulated draw at one sweep point.
struct DrawOutcome {
  std::map<std::string, MethodOutcome> methods;
  std::uint64_t clicks = 0;
  std::uint64_t impressions = 0;
  double noisy_fraction = 0.0;
};

struct Cell {
  std::string sweep_value;
  std::uint64_t n = 0;
  BiasProfile profile;
  NoiseParams noise;
  std::vector<DrawOutcome> draws;
};

struct Logs {
  ClickLog train;
  ClickLog validation;
};

Logs draw_logs(const ExperimentSpec& spec, const Corpus& corpus, const Baselines& b,
               const BiasProfile& profile, const NoiseParams& noise, std::uint64_t n,
               std::uint64_t draw_seed) {
  const auto n_val = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(spec.validation_fraction * static_cast<double>(n))));
  Logs logs;
  logs.train = simulate_until_clicks(corpus.train, b.prod, profile, noise, n, derive_seed(draw_seed, 0));
  logs.validation =
      simulate_until_clicks(corpus.validation, b.prod, profile, noise, n_val, derive_seed(draw_seed, 1));
  return logs;
}

MethodOutcome fit(const ExperimentSpec& spec, const Corpus& corpus, const Logs& logs,
                  TrainingMode mode, const std::vector<double>& taus, std::uint64_t seed) {
  HyperparamGrid grid;
  grid.c_values = spec.c_grid;
  grid.tau_values = taus;
  LearnerConfig base;
  base.tolerance = spec.tolerance;
  base.seed = seed;
  base.feature_dim = corpus.train.feature_dim;
  const auto cv = cross_validate(logs.train, logs.validation, corpus.train, corpus.validation,
                                 grid, mode, base);
  return {full_info_risk(cv.model, corpus.test), cv.c, cv.tau};
}

void record_log_stats(const Corpus& corpus, const Logs& logs, DrawOutcome& out) {
  out.clicks = logs.train.records.size();
  out.impressions = logs.train.n_query_impressions;
  out.noisy_fraction = noisy_click_fraction(logs.train, corpus.train);
}

std::vector<std::uint64_t> n_clicks_sorted(const ExperimentSpec& spec) {
  std::vector<std::uint64_t> ns = spec.n_clicks;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  return ns;
}

int draws_for(const ExperimentSpec& spec, std::uint64_t n) {
  return n < spec.average_below ? spec.n_seeds : 1;
}

ResultRow baseline_row(const ExperimentSpec& spec, const std::string& sweep,
                       const std::string& value, std::uint64_t n, const std::string& method,
                       double risk, double c, const std::string& hash) {
  ResultRow row;
  row.sweep = sweep;
  row.sweep_value = value;
  row.method = method;
  row.n_clicks = n;
  row.test_risk = risk;
  row.seed = spec.seed;
  row.n_seeds = 1;
  row.c = format_value(c);
  row.config_hash = hash;
  return row;
}

ResultRow aggregate(const ExperimentSpec& spec, const std::string& sweep, const Cell& cell,
                    const std::string& method, const std::string& value,
                    const std::string& hash) {
  ResultRow row;
  row.sweep = sweep;
  row.sweep_value = value;
  row.method = method;
  row.n_clicks = cell.n;
  row.seed = spec.seed;
  row.n_seeds = static_cast<int>(cell.draws.size());
  row.config_hash = hash;
  std::vector<double> risks, cs, taus;
  double clicks = 0.0, impressions = 0.0, noisy = 0.0;
  for (const auto& d : cell.draws) {
    const auto& m = d.methods.at(method);
    risks.push_back(m.risk);
    cs.push_back(m.c);
    taus.push_back(m.tau);
    clicks += static_cast<double>(d.clicks);
    impressions += static_cast<double>(d.impressions);
    noisy += d.noisy_fraction;
  }
  const double k = static_cast<double>(risks.size());
  double mean = 0.0;
  for (double r : risks) mean += r;
  mean /= k;
  double var = 0.0;
  for (double r : risks) var += (r - mean) * (r - mean);
  row.test_risk = mean;
  row.test_risk_sd = risks.size() > 1 ? std::sqrt(var / (k - 1.0)) : 0.0;
  row.clicks = static_cast<std::uint64_t>(std::llround(clicks / k));
  row.impressions = static_cast<std::uint64_t>(std::llround(impressions / k));
  row.noisy_click_fraction = noisy / k;
  row.c = join(cs);
  row.tau = join(taus);
  return row;
}

using DrawFn = std::function<void(const Logs&, std::uint64_t, DrawOutcome&)>;

// Fills every draw of every cell, one job per draw.
void run_cells(const ExperimentSpec& spec, const Corpus& corpus, const Baselines& b,
               std::vector<Cell>& cells, const DrawFn& fn) {
  std::vector<std::function<void()>> jobs;
  for (auto& cell : cells) {
    cell.draws.resize(static_cast<std::size_t>(draws_for(spec, cell.n)));
    for (std::size_t s = 0; s < cell.draws.size(); ++s) {
      jobs.push_back([&spec, &corpus, &b, &cell, &fn, s] {
        const std::uint64_t draw_seed = derive_seed(spec.seed, s);
        const Logs logs = draw_logs(spec, corpus, b, cell.profile, cell.noise, cell.n, draw_seed);
        DrawOutcome& out = cell.draws[s];
        record_log_stats(corpus, logs, out);
        fn(logs, draw_seed, out);
      });
    }
  }
  run_jobs(jobs, spec.threads);
}

void add_baseline_rows(const ExperimentSpec& spec, const Baselines& b, const std::string& sweep,
                       const std::string& value, std::uint64_t n, const std::string& hash,
                       std::vector<ResultRow>& rows) {
  rows.push_back(baseline_row(spec, sweep, value, n, "prod_baseline", b.prod_risk, b.prod_c, hash));
  rows.push_back(baseline_row(spec, sweep, value, n, "skyline", b.skyline_risk, b.skyline_c, hash));
}

ExperimentResult standard_sweep(const ExperimentSpec& spec, const Corpus& corpus,
                                const Baselines& b, const std::string& sweep,
                                std::vector<Cell> cells, bool clipped) {
  const std::vector<double> unclipped{0.0};
  run_cells(spec, corpus, b, cells, [&](const Logs& logs, std::uint64_t seed, DrawOutcome& out) {
    out.methods["naive"] = fit(spec, corpus, logs, TrainingMode::kNaive, unclipped, seed);
    out.methods["propensity"] = fit(spec, corpus, logs, TrainingMode::kPropensity, unclipped, seed);
    if (clipped) {
      out.methods["propensity_clipped"] =
          fit(spec, corpus, logs, TrainingMode::kPropensity, spec.tau_grid, seed);
    }
  });
  ExperimentResult result;
  result.baselines = b;
  const std::string hash = spec.config_hash();
  for (const auto& cell : cells) {
    add_baseline_rows(spec, b, sweep, cell.sweep_value, cell.n, hash, result.rows);
    for (const char* m : {"naive", "propensity", "propensity_clipped"}) {
      if (!clipped && std::string(m) == "propensity_clipped") continue;
      result.rows.push_back(aggregate(spec, sweep, cell, m, cell.sweep_value, hash));
    }
  }
  return result;
}

}  // namespace

std::string DatasetSource::describe() const {
  std::ostringstream out;
  if (!is_synthetic()) {
    out << "letor=" << letor_dir << ";binarize_at=" << binarize_at;
    return out.str();
  }
  out << "synthetic;seed=" << synthetic.seed << ";candidates=" << synthetic.n_candidates
      << ";feature_dim=" << synthetic.feature_dim
      << ";relevant_fraction=" << format_value(synthetic.relevant_fraction)
      << ";noise_scale=" << format_value(synthetic.noise_scale) << ";train=" << n_train
      << ";validation=" << n_validation << ";test=" << n_test;
  return out.str();
}

Corpus load_corpus(const DatasetSource& source) {
  Corpus corpus;
  if (source.is_synthetic()) {
    if (source.n_train == 0 || source.n_validation == 0 || source.n_test == 0) {
      throw ConfigError("synthetic splits need at least one query each");
    }
    auto splits = synthesize_splits(source.synthetic, source.n_train, source.n_validation,
                                    source.n_test);
    corpus.train = std::move(splits.train);
    corpus.validation = std::move(splits.validation);
    corpus.test = std::move(splits.test);
    return corpus;
  }
  const fs::path dir(source.letor_dir);
  if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' not found");
  corpus.train = load_letor(find_split_file(dir, {"train.txt"}), source.binarize_at, Split::kTrain);
  corpus.validation = load_letor(find_split_file(dir, {"vali.txt", "valid.txt", "validation.txt"}),
                                 source.binarize_at, Split::kValidation);
  corpus.test = load_letor(find_split_file(dir, {"test.txt"}), source.binarize_at, Split::kTest);
  const std::size_t dim = std::max(
      {corpus.train.feature_dim, corpus.validation.feature_dim, corpus.test.feature_dim});
  pad_features(corpus.train, dim);
  pad_features(corpus.validation, dim);
  pad_features(corpus.test, dim);
  return corpus;
}

void ExperimentSpec::validate() const {
  if (!(prod_fraction > 0.0 && prod_fraction <= 1.0)) {
    throw ConfigError("production-ranker fraction must lie in (0, 1]");
  }
  profile.validate();
  noise.validate();
  if (n_clicks.empty()) throw ConfigError("click-count list is empty");
  for (auto n : n_clicks) {
    if (n == 0) throw ConfigError("click counts must be positive");
  }
  for (double eta : etas) BiasProfile{eta}.validate();
  for (double eta : assumed_etas) BiasProfile{eta}.validate();
  for (double e : eps_minus_values) NoiseParams{noise.eps_plus, e}.validate();
  if (c_grid.empty()) throw ConfigError("C grid is empty");
  for (double c : c_grid) {
    if (!(c > 0.0 && std::isfinite(c))) throw ConfigError("C values must be positive");
  }
  if (tau_grid.empty()) throw ConfigError("tau grid is empty");
  for (double t : tau_grid) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("tau values must lie in [0, 1]");
  }
  if (!(validation_fraction > 0.0 && validation_fraction <= 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1]");
  }
  if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

std::string ExperimentSpec::describe() const {
  std::ostringstream out;
  out << "dataset=" << dataset.describe() << "\nprod_fraction=" << format_value(prod_fraction)
      << "\neta=" << format_value(profile.eta) << "\neps_plus=" << format_value(noise.eps_plus)
      << "\neps_minus=" << format_value(noise.eps_minus) << "\nn_clicks=" << join(n_clicks)
      << "\netas=" << join(etas) << "\neps_minus_values=" << join(eps_minus_values)
      << "\nassumed_etas=" << join(assumed_etas) << "\nc_grid=" << join(c_grid)
      << "\ntau_grid=" << join(tau_grid)
      << "\nvalidation_fraction=" << format_value(validation_fraction) << "\nseed=" << seed
      << "\naverage_below=" << average_below << "\nn_seeds=" << n_seeds
      << "\nclipped=" << clipped << "\ntolerance=" << format_value(tolerance) << '\n';
  return out.str();
}

std::string ExperimentSpec::config_hash() const {
  // 64-bit FNV-1a.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : describe()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Baselines train_baselines(const Corpus& corpus, const ExperimentSpec& spec) {
  Baselines b;
  const Dataset prod_ds = subsample_queries(corpus.train, spec.prod_fraction, spec.seed);
  auto prod = cross_validate_full_info(prod_ds, corpus.validation, spec.c_grid, spec.tolerance);
  b.prod = std::move(prod.model);
  b.prod_c = prod.c;
  b.prod_risk = full_info_risk(b.prod, corpus.test);
  auto sky = cross_validate_full_info(corpus.train, corpus.validation, spec.c_grid, spec.tolerance);
  b.skyline = std::move(sky.model);
  b.skyline_c = sky.c;
  b.skyline_risk = full_info_risk(b.skyline, corpus.test);
  return b;
}

const ResultRow* ExperimentResult::find(const std::string& method, const std::string& sweep_value,
                                        std::uint64_t n_clicks) const {
  for (const auto& row : rows) {
    if (row.method == method && row.sweep_value == sweep_value &&
        (n_clicks == 0 || row.n_clicks == n_clicks)) {
      return &row;
    }
  }
  return nullptr;
}

ExperimentResult learning_curve(const ExperimentSpec& spec, const Corpus& corpus,
                                const Baselines& baselines) {
  spec.validate();
  std::vector<Cell> cells;
  for (auto n : n_clicks_sorted(spec)) {
    cells.push_back({std::to_string(n), n, spec.profile, spec.noise, {}});
  }
  return standard_sweep(spec, corpus, baselines, "n_clicks", std::move(cells), spec.clipped);
}

ExperimentResult bias_sweep(const ExperimentSpec& spec, const Corpus& corpus,
                            const Baselines& baselines) {
  spec.validate();
  if (spec.etas.empty()) throw ConfigError("eta sweep list is empty");
  std::vector<Cell> cells;
  for (double eta : spec.etas) {
    for (auto n : n_clicks_sorted(spec)) {
      cells.push_back({format_value(eta), n, BiasProfile{eta}, spec.noise, {}});
    }
  }
  return standard_sweep(spec, corpus, baselines, "eta", std::move(cells), false);
}

ExperimentResult noise_sweep(const ExperimentSpec& spec, const Corpus& corpus,
                             const Baselines& baselines) {
  spec.validate();
  if (spec.eps_minus_values.empty()) throw ConfigError("eps_minus sweep list is empty");
  std::vector<Cell> cells;
  for (double e : spec.eps_minus_values) {
    for (auto n : n_clicks_sorted(spec)) {
      cells.push_back({format_value(e), n, spec.profile, NoiseParams{spec.noise.eps_plus, e}, {}});
    }
  }
  return standard_sweep(spec, corpus, baselines, "eps_minus", std::move(cells), false);
}

ExperimentResult misspec_sweep(const ExperimentSpec& spec, const Corpus& corpus,
                               const Baselines& baselines) {
  spec.validate();
  if (spec.assumed_etas.empty()) throw ConfigError("assumed-eta sweep list is empty");
  std::vector<Cell> cells;
  for (auto n : n_clicks_sorted(spec)) cells.push_back({"", n, spec.profile, spec.noise, {}});
  const std::vector<double> unclipped{0.0};
  run_cells(spec, corpus, baselines, cells,
            [&](const Logs& logs, std::uint64_t seed, DrawOutcome& out) {
              out.methods["naive"] = fit(spec, corpus, logs, TrainingMode::kNaive, unclipped, seed);
              for (double eta : spec.assumed_etas) {
                const BiasProfile assumed{eta};
                const Logs relabeled{relabel_log(logs.train, assumed),
                                     relabel_log(logs.validation, assumed)};
                out.methods["propensity@" + format_value(eta)] =
                    fit(spec, corpus, relabeled, TrainingMode::kPropensity, unclipped, seed);
              }
            });
  ExperimentResult result;
  result.baselines = baselines;
  const std::string hash = spec.config_hash();
  for (const auto& cell : cells) {
    add_baseline_rows(spec, baselines, "assumed_eta", "", cell.n, hash, result.rows);
    result.rows.push_back(aggregate(spec, "assumed_eta", cell, "naive", "", hash));
    for (double eta : spec.assumed_etas) {
      const std::string value = format_value(eta);
      ResultRow row = aggregate(spec, "assumed_eta", cell, "propensity@" + value, value, hash);
      row.method = "propensity";
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

namespace {

template <typename Sweep>
ExperimentResult with_corpus(const ExperimentSpec& spec, Sweep sweep) {
  spec.validate();
  const Corpus corpus = load_corpus(spec.dataset);
  const Baselines baselines = train_baselines(corpus, spec);
  return sweep(spec, corpus, baselines);
}

}  // namespace

ExperimentResult learning_curve(const ExperimentSpec& spec) {
  return with_corpus(spec, [](const auto& s, const auto& c, const auto& b) { return learning_curve(s, c, b); });
}

ExperimentResult bias_sweep(const ExperimentSpec& spec) {
  return with_corpus(spec, [](const auto& s, const auto& c, const auto& b) { return bias_sweep(s, c, b); });
}

ExperimentResult noise_sweep(const ExperimentSpec& spec) {
  return with_corpus(spec, [](const auto& s, const auto& c, const auto& b) { return noise_sweep(s, c, b); });
}

ExperimentResult misspec_sweep(const ExperimentSpec& spec) {
  return with_corpus(spec, [](const auto& s, const auto& c, const auto& b) { return misspec_sweep(s, c, b); });
}

PropensityEstimate estimate_propensities(const Dataset& ds, const LinearModel& ranker,
                                         const BiasProfile& profile, const NoiseParams& noise,
                                         const PropensityEstimationSpec& spec) {
  PropensityEstimate est;
  est.experiment = run_swap_experiment(ds, ranker, profile, noise, spec.swap);
  est.model = fit_propensity_model(est.experiment, spec.smoothing,
                                   est.experiment.no_swap_ctr_by_rank, spec.clamp);
  return est;
}

void write_swap_table(const PropensityEstimate& estimate, std::ostream& out) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%6s %12s %10s %10s %10s %10s\n", "rank", "impressions", "clicks",
                "ratio", "std_error", "p");
  out << buf;
  for (const auto& arm : estimate.experiment.arms) {
    const double p = arm.rank <= estimate.model.max_rank() ? estimate.model.propensity(arm.rank) : 0.0;
    std::snprintf(buf, sizeof(buf), "%6d %12llu %10llu %10.5f %10.5f %10.5f\n", arm.rank,
                  static_cast<unsigned long long>(arm.impressions),
                  static_cast<unsigned long long>(arm.clicks), arm.ratio, arm.std_error, p);
    out << buf;
  }
  if (estimate.experiment.skipped_queries > 0) {
    out << "skipped " << estimate.experiment.skipped_queries << " short queries\n";
  }
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      out << f;
      continue;
    }
    out << '"';
    for (char ch : f) {
      if (ch == '"') out << '"';
      out << ch;
    }
    out << '"';
  }
  out << "\r\n";
}

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  write_csv_row(out, {"sweep", "sweep_value", "method", "n_clicks", "test_risk", "test_risk_sd",
                      "clicks", "impressions", "noisy_click_fraction", "seed", "n_seeds", "c",
                      "tau", "config_hash"});
  for (const auto& r : rows) {
    write_csv_row(out, {r.sweep, r.sweep_value, r.method, std::to_string(r.n_clicks),
                        format_value(r.test_risk), format_value(r.test_risk_sd),
                        std::to_string(r.clicks), std::to_string(r.impressions),
                        r.noisy_click_fraction < 0.0 ? "" : format_value(r.noisy_click_fraction),
                        std::to_string(r.seed), std::to_string(r.n_seeds), r.c, r.tau,
                        r.config_hash});
  }
}

void save_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_results_csv(rows, out);
}

void write_gnuplot_data(const std::vector<ResultRow>& rows, std::ostream& out) {
  std::vector<std::string> methods;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  bool first = true;
  for (const auto& m : methods) {
    if (!first) out << "\n\n";
    first = false;
    out << "# " << m << "\n# sweep_value n_clicks test_risk test_risk_sd\n";
    for (const auto& r : rows) {
      if (r.method != m) continue;
      out << (r.sweep_value.empty() ? "-" : r.sweep_value) << ' ' << r.n_clicks << ' '
          << format_value(r.test_risk) << ' ' << format_value(r.test_risk_sd) << '\n';
    }
  }
}

void save_gnuplot_data(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_gnuplot_data(rows, out);
}

}  // namespace ultr
