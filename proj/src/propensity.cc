#include "ultr/propensity.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>

#include "ultr/errors.h"
#include "ultr/random.h"

namespace ultr {

double PropensityModel::propensity(int rank) const {
  if (rank < 1) throw DomainError("rank must be >= 1, got " + std::to_string(rank));
  if (p.empty()) throw ConfigError("empty propensity model");
  return p[static_cast<std::size_t>(std::min(rank, max_rank())) - 1];
}

PropensityModel propensity_model_from_profile(const BiasProfile& profile, int max_rank) {
  if (max_rank < 1) throw ConfigError("max_rank must be >= 1");
  PropensityModel m;
  m.p.resize(static_cast<std::size_t>(max_rank));
  for (int r = 1; r <= max_rank; ++r) m.p[static_cast<std::size_t>(r) - 1] = examination_probability(r, profile);
  return m;
}

const SwapArm* SwapExperimentResult::arm(int rank) const {
  for (const auto& a : arms) {
    if (a.rank == rank) return &a;
  }
  return nullptr;
}

SwapExperimentResult run_swap_experiment(const Dataset& ds, const LinearModel& ranker,
                                         const BiasProfile& true_profile,
                                         const NoiseParams& noise,
                                         const SwapExperimentConfig& cfg) {
  true_profile.validate();
  noise.validate();
  if (cfg.landmark_rank < 1) throw ConfigError("landmark rank must be >= 1");
  if (cfg.impressions_per_arm < 1) throw ConfigError("impressions_per_arm must be >= 1");
  std::set<int> ranks(cfg.swap_ranks.begin(), cfg.swap_ranks.end());
  ranks.insert(cfg.landmark_rank);
  if (*ranks.begin() < 1) throw ConfigError("swap ranks must be >= 1");
  const int max_rank = *ranks.rbegin();

  SwapExperimentResult result;
  result.landmark_rank = cfg.landmark_rank;
  std::vector<const QueryInstance*> eligible;
  std::vector<std::vector<std::size_t>> orders;
  std::vector<std::string> offending;
  for (const auto& q : ds.queries) {
    if (q.size() < static_cast<std::size_t>(max_rank)) {
      offending.push_back(q.query_id);
      continue;
    }
    eligible.push_back(&q);
    orders.push_back(rank_order(ranker, q));
  }
  result.skipped_queries = offending.size();
  if (eligible.empty()) {
    std::string msg = "no query has " + std::to_string(max_rank) + " candidates; offending:";
    for (std::size_t i = 0; i < offending.size() && i < 20; ++i) msg += " " + offending[i];
    if (offending.size() > 20) msg += " ... (" + std::to_string(offending.size()) + " total)";
    throw ExperimentError(msg);
  }

  std::size_t max_len = 0;
  for (const auto* q : eligible) max_len = std::max(max_len, q->size());
  std::vector<double> exam(max_len);
  for (std::size_t r = 0; r < max_len; ++r) {
    exam[r] = examination_probability(static_cast<int>(r) + 1, true_profile);
  }
  result.no_swap_ctr_by_rank.assign(max_len, 0.0);

  const auto k = static_cast<std::size_t>(cfg.landmark_rank) - 1;
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  for (int rank : ranks) {
    const auto r = static_cast<std::size_t>(rank) - 1;
    const bool no_swap = rank == cfg.landmark_rank;
    const std::uint64_t arm_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rank));
    SwapArm arm;
    arm.rank = rank;
    arm.impressions = cfg.impressions_per_arm;
    for (std::uint64_t i = 0; i < cfg.impressions_per_arm; ++i) {
      SplitMix64 rng(derive_seed(arm_seed, i));
      const std::size_t qi = pick(rng);
      const QueryInstance& q = *eligible[qi];
      const auto& order = orders[qi];
      for (std::size_t pos = 0; pos < order.size(); ++pos) {
        if (!bernoulli(rng, exam[pos])) continue;
        std::size_t shown = order[pos];
        if (pos == k) shown = order[r];
        else if (pos == r) shown = order[k];
        if (!bernoulli(rng, noise.click_probability(q.candidates[shown].relevant))) continue;
        if (pos == r) ++arm.clicks;
        if (no_swap) result.no_swap_ctr_by_rank[pos] += 1.0;
      }
    }
    arm.ctr = static_cast<double>(arm.clicks) / static_cast<double>(arm.impressions);
    result.arms.push_back(arm);
  }
  for (auto& c : result.no_swap_ctr_by_rank) c /= static_cast<double>(cfg.impressions_per_arm);

  const SwapArm base = *result.arm(cfg.landmark_rank);
  if (base.clicks == 0) {
    throw EstimationError("no clicks on the landmark document in the no-swap arm");
  }
  const double b = base.ctr;
  const double var_b = b * (1.0 - b) / static_cast<double>(base.impressions);
  for (auto& arm : result.arms) {
    const double a = arm.ctr;
    const double var_a = a * (1.0 - a) / static_cast<double>(arm.impressions);
    arm.ratio = a / b;
    // Delta method for a ratio of independent binomial proportions.
    arm.std_error = std::sqrt(var_a / (b * b) + a * a * var_b / (b * b * b * b));
  }
  return result;
}

PropensityModel fit_propensity_model(const SwapExperimentResult& result, double smoothing,
                                     std::span<const double> overall_ctr_by_rank, double clamp) {
  if (!(smoothing >= 0.0 && smoothing <= 1.0)) throw ConfigError("smoothing must lie in [0, 1]");
  if (!(clamp > 0.0 && clamp <= 1.0)) throw ConfigError("clamp must lie in (0, 1]");
  if (result.arms.empty()) throw EstimationError("swap experiment has no arms");
  const int r_max = result.arms.back().rank;
  for (int r = 1; r <= r_max; ++r) {
    if (!result.arm(r)) throw EstimationError("no swap estimate for rank " + std::to_string(r));
  }
  double ctr_landmark = 0.0;
  if (smoothing > 0.0) {
    if (overall_ctr_by_rank.size() < static_cast<std::size_t>(r_max)) {
      throw EstimationError("overall CTR curve shorter than the modeled ranks");
    }
    ctr_landmark = overall_ctr_by_rank[static_cast<std::size_t>(result.landmark_rank) - 1];
    if (!(ctr_landmark > 0.0)) throw EstimationError("overall CTR at the landmark rank is 0");
  }

  PropensityModel m;
  m.landmark_rank = result.landmark_rank;
  m.smoothing = smoothing;
  m.clamp = clamp;
  m.p.resize(static_cast<std::size_t>(r_max));
  for (int r = 1; r <= r_max; ++r) {
    double p = result.arm(r)->ratio;
    if (smoothing > 0.0) {
      const double normalized = overall_ctr_by_rank[static_cast<std::size_t>(r) - 1] / ctr_landmark;
      p = (1.0 - smoothing) * p + smoothing * normalized;
    }
    m.p[static_cast<std::size_t>(r) - 1] = std::clamp(p, clamp, 1.0);
  }
  return m;
}

ClickLog relabel_log(const ClickLog& log, const PropensityModel& model) {
  ClickLog out = log;
  for (auto& rec : out.records) rec.propensity = model.propensity(rec.presented_rank);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "model(r_max=%d,smoothing=%.6g)", model.max_rank(),
                model.smoothing);
  out.config.propensity_source = buf;
  return out;
}

ClickLog relabel_log(const ClickLog& log, const BiasProfile& assumed) {
  assumed.validate();
  ClickLog out = log;
  for (auto& rec : out.records) rec.propensity = examination_probability(rec.presented_rank, assumed);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "eta=%.17g", assumed.eta);
  out.config.propensity_source = buf;
  return out;
}

void write_propensity_model(const PropensityModel& model, std::ostream& out) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", model.smoothing);
  out << "# smoothing=" << buf << '\n';
  out << "# landmark_rank=" << model.landmark_rank << '\n';
  out << "# r_max=" << model.max_rank() << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", model.clamp);
  out << "# clamp=" << buf << '\n';
  out << "rank\tp\n";
  for (int r = 1; r <= model.max_rank(); ++r) {
    std::snprintf(buf, sizeof(buf), "%.17g", model.p[static_cast<std::size_t>(r) - 1]);
    out << r << '\t' << buf << '\n';
  }
}

namespace {

template <typename T>
T parse_value(std::string_view s, std::size_t line) {
  T v{};
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(line, "invalid number '" + std::string(s) + "'");
  return v;
}

}  // namespace

PropensityModel read_propensity_model(std::istream& in) {
  PropensityModel m;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      const std::string_view value = std::string_view(line).substr(eq + 1);
      if (key == "smoothing") m.smoothing = parse_value<double>(value, line_no);
      else if (key == "landmark_rank") m.landmark_rank = parse_value<int>(value, line_no);
      else if (key == "clamp") m.clamp = parse_value<double>(value, line_no);
      continue;
    }
    if (!seen_header) {
      if (line.rfind("rank", 0) != 0) throw ParseError(line_no, "missing 'rank\\tp' header");
      seen_header = true;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(line_no, "expected 'rank\\tp'");
    const int rank = parse_value<int>(std::string_view(line).substr(0, tab), line_no);
    const double p = parse_value<double>(std::string_view(line).substr(tab + 1), line_no);
    if (rank != m.max_rank() + 1) throw ParseError(line_no, "ranks must be 1, 2, ... in order");
    if (!(p > 0.0 && p <= 1.0)) throw ParseError(line_no, "propensity outside (0, 1]");
    m.p.push_back(p);
  }
  if (m.p.empty()) throw DataError("propensity model has no rows");
  return m;
}

void save_propensity_model(const PropensityModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_propensity_model(model, out);
}

PropensityModel load_propensity_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_propensity_model(in);
}

}  // namespace ultr
