#include "ultr/click_simulator.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "ultr/errors.h"

namespace ultr {

void BiasProfile::validate() const {
  if (!std::isfinite(eta) || eta < 0.0) throw ConfigError("eta must be finite and >= 0");
}

void NoiseParams::validate() const {
  if (!(eps_plus <= 1.0 && eps_plus > eps_minus && eps_minus >= 0.0)) {
    throw ConfigError("click noise requires 1 >= eps_plus > eps_minus >= 0");
  }
}

double examination_probability(int rank, const BiasProfile& profile) {
  if (rank < 1) throw DomainError("rank must be >= 1, got " + std::to_string(rank));
  return std::pow(1.0 / static_cast<double>(rank), profile.eta);
}

ImpressionTrace simulate_impression(const QueryInstance& q, std::span<const std::size_t> presented,
                                    const BiasProfile& profile, const NoiseParams& noise,
                                    SplitMix64& rng) {
  ImpressionTrace trace;
  trace.examined.assign(presented.size(), 0);
  trace.clicked.assign(presented.size(), 0);
  for (std::size_t pos = 0; pos < presented.size(); ++pos) {
    if (!bernoulli(rng, examination_probability(static_cast<int>(pos) + 1, profile))) continue;
    trace.examined[pos] = 1;
    const bool relevant = q.candidates[presented[pos]].relevant;
    trace.clicked[pos] = bernoulli(rng, noise.click_probability(relevant)) ? 1 : 0;
  }
  return trace;
}

namespace {

// Presented order and shared Ranking of every query under a fixed ranker.
struct Presentation {
  std::vector<std::vector<std::size_t>> orders;
  std::vector<std::shared_ptr<const Ranking>> rankings;
  std::vector<double> exam;  // p_r, index r - 1
};

Presentation present_all(const Dataset& ds, const LinearModel& ranker,
                         const BiasProfile& profile) {
  Presentation p;
  std::size_t max_len = 0;
  p.orders.reserve(ds.queries.size());
  for (const auto& q : ds.queries) {
    p.orders.push_back(rank_order(ranker, q));
    p.rankings.push_back(std::make_shared<const Ranking>(make_ranking(q, p.orders.back())));
    max_len = std::max(max_len, q.size());
  }
  p.exam.resize(max_len);
  for (std::size_t r = 0; r < max_len; ++r) {
    p.exam[r] = examination_probability(static_cast<int>(r) + 1, profile);
  }
  return p;
}

// Simulates impression `i`; appends its clicks and returns how many.
std::size_t simulate_one(const Dataset& ds, const Presentation& p, const NoiseParams& noise,
                         std::uint64_t seed, std::uint64_t i, std::vector<ClickRecord>* out) {
  SplitMix64 rng(derive_seed(seed, i));
  std::uniform_int_distribution<std::size_t> pick(0, ds.queries.size() - 1);
  const std::size_t qi = pick(rng);
  const QueryInstance& q = ds.queries[qi];
  const auto& order = p.orders[qi];
  std::size_t clicks = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (!bernoulli(rng, p.exam[pos])) continue;
    const Document& d = q.candidates[order[pos]];
    if (!bernoulli(rng, noise.click_probability(d.relevant))) continue;
    ClickRecord rec;
    rec.impression_id = i;
    rec.query_id = q.query_id;
    rec.presented = p.rankings[qi];
    rec.clicked_doc_id = d.doc_id;
    rec.presented_rank = static_cast<int>(pos) + 1;
    rec.propensity = p.exam[pos];
    out->push_back(std::move(rec));
    ++clicks;
  }
  return clicks;
}

void check_simulation_inputs(const Dataset& ds, const BiasProfile& profile,
                             const NoiseParams& noise) {
  profile.validate();
  noise.validate();
  if (ds.queries.empty()) throw ConfigError("cannot simulate clicks on an empty dataset");
}

}  // namespace

ClickLog simulate_clicks(const Dataset& ds, const LinearModel& ranker, const BiasProfile& profile,
                         const NoiseParams& noise, std::uint64_t n_impressions,
                         std::uint64_t seed) {
  check_simulation_inputs(ds, profile, noise);
  if (n_impressions < 1) throw ConfigError("n_impressions must be >= 1");
  const Presentation p = present_all(ds, ranker, profile);
  ClickLog log;
  log.config = {profile, noise, seed, "true"};
  log.n_query_impressions = n_impressions;
  for (std::uint64_t i = 0; i < n_impressions; ++i) simulate_one(ds, p, noise, seed, i, &log.records);
  return log;
}

ClickLog simulate_until_clicks(const Dataset& ds, const LinearModel& ranker,
                               const BiasProfile& profile, const NoiseParams& noise,
                               std::uint64_t n_clicks, std::uint64_t seed) {
  check_simulation_inputs(ds, profile, noise);
  if (n_clicks < 1) throw ConfigError("n_clicks must be >= 1");
  if (ds.num_relevant() == 0 && noise.eps_minus == 0.0) {
    throw ConfigError("no clicks can occur: no relevant documents and eps_minus = 0");
  }
  const Presentation p = present_all(ds, ranker, profile);
  ClickLog log;
  log.config = {profile, noise, seed, "true"};
  log.records.reserve(n_clicks + 64);
  std::uint64_t i = 0;
  while (log.records.size() < n_clicks) simulate_one(ds, p, noise, seed, i++, &log.records);
  log.n_query_impressions = i;
  return log;
}

std::vector<double> empirical_click_rate_by_rank(const ClickLog& log) {
  std::size_t max_len = 0;
  for (const auto& rec : log.records) {
    max_len = std::max(max_len, rec.presented ? rec.presented->size()
                                              : static_cast<std::size_t>(rec.presented_rank));
  }
  std::vector<double> ctr(max_len, 0.0);
  if (log.n_query_impressions == 0) return ctr;
  for (const auto& rec : log.records) ctr[static_cast<std::size_t>(rec.presented_rank) - 1] += 1.0;
  for (auto& c : ctr) c /= static_cast<double>(log.n_query_impressions);
  return ctr;
}

double noisy_click_fraction(const ClickLog& log, const Dataset& ds) {
  if (log.records.empty()) return 0.0;
  const QueryIndex index = index_queries(ds);
  std::size_t noisy = 0;
  for (const auto& rec : log.records) {
    const auto it = index.find(rec.query_id);
    if (it == index.end()) throw DataError("unknown query id '" + rec.query_id + "'");
    const QueryInstance& q = ds.queries[it->second];
    const auto di = q.index_of(rec.clicked_doc_id);
    if (!di) throw DataError("unknown doc id in query '" + rec.query_id + "'");
    if (!q.candidates[*di].relevant) ++noisy;
  }
  return static_cast<double>(noisy) / static_cast<double>(log.records.size());
}

double expected_noisy_click_fraction(const Dataset& ds, const LinearModel& ranker,
                                     const BiasProfile& profile, const NoiseParams& noise) {
  double noisy = 0.0;
  double total = 0.0;
  for (const auto& q : ds.queries) {
    const auto order = rank_order(ranker, q);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const bool relevant = q.candidates[order[pos]].relevant;
      const double c = examination_probability(static_cast<int>(pos) + 1, profile) *
                       noise.click_probability(relevant);
      total += c;
      if (!relevant) noisy += c;
    }
  }
  return total > 0.0 ? noisy / total : 0.0;
}

void write_click_log(const ClickLog& log, std::ostream& out) {
  char buf[64];
  out << "# n_query_impressions=" << log.n_query_impressions << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", log.config.profile.eta);
  out << "# eta=" << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", log.config.noise.eps_plus);
  out << "# eps_plus=" << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", log.config.noise.eps_minus);
  out << "# eps_minus=" << buf << '\n';
  out << "# seed=" << log.config.seed << '\n';
  out << "# propensity_source=" << log.config.propensity_source << '\n';
  out << "impression_id\tquery_id\tpresented_ranking\tclicked_doc_id\tpresented_rank\tpropensity\n";
  for (const auto& rec : log.records) {
    out << rec.impression_id << '\t' << rec.query_id << '\t';
    if (rec.presented) {
      for (std::size_t i = 0; i < rec.presented->doc_ids.size(); ++i) {
        if (i) out << ',';
        out << rec.presented->doc_ids[i];
      }
    }
    std::snprintf(buf, sizeof(buf), "%.12g", rec.propensity);
    out << '\t' << rec.clicked_doc_id << '\t' << rec.presented_rank << '\t' << buf << '\n';
  }
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream ss(s);
  while (std::getline(ss, part, sep)) parts.push_back(part);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

template <typename T>
T parse_field(const std::string& s, std::size_t line, const char* what) {
  T value{};
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(line, std::string("invalid ") + what + " '" + s + "'");
  }
  return value;
}

}  // namespace

ClickLog read_click_log(std::istream& in) {
  ClickLog log;
  bool have_impressions = false;
  bool seen_header = false;
  std::uint64_t max_impression = 0;
  std::map<std::string, std::shared_ptr<const Ranking>> rankings;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      const std::string value = line.substr(eq + 1);
      if (key == "n_query_impressions") {
        log.n_query_impressions = parse_field<std::uint64_t>(value, line_no, key.c_str());
        have_impressions = true;
      } else if (key == "eta") {
        log.config.profile.eta = parse_field<double>(value, line_no, "eta");
      } else if (key == "eps_plus") {
        log.config.noise.eps_plus = parse_field<double>(value, line_no, "eps_plus");
      } else if (key == "eps_minus") {
        log.config.noise.eps_minus = parse_field<double>(value, line_no, "eps_minus");
      } else if (key == "seed") {
        log.config.seed = parse_field<std::uint64_t>(value, line_no, "seed");
      } else if (key == "propensity_source") {
        log.config.propensity_source = value;
      }
      continue;
    }
    if (!seen_header) {
      if (line.rfind("impression_id", 0) != 0) throw ParseError(line_no, "missing header row");
      seen_header = true;
      continue;
    }
    const auto cols = split_on(line, '\t');
    if (cols.size() != 6) throw ParseError(line_no, "expected 6 tab-separated columns");
    ClickRecord rec;
    rec.impression_id = parse_field<std::uint64_t>(cols[0], line_no, "impression_id");
    rec.query_id = cols[1];
    auto& shared = rankings[cols[1] + '\t' + cols[2]];
    if (!shared) {
      auto r = std::make_shared<Ranking>();
      r->query_id = cols[1];
      for (const auto& id : split_on(cols[2], ',')) {
        r->doc_ids.push_back(parse_field<DocId>(id, line_no, "doc id"));
      }
      shared = std::move(r);
    }
    rec.presented = shared;
    rec.clicked_doc_id = parse_field<DocId>(cols[3], line_no, "clicked_doc_id");
    rec.presented_rank = parse_field<int>(cols[4], line_no, "presented_rank");
    rec.propensity = parse_field<double>(cols[5], line_no, "propensity");
    if (rec.presented_rank < 1 || static_cast<std::size_t>(rec.presented_rank) > shared->size() ||
        shared->doc_ids[static_cast<std::size_t>(rec.presented_rank) - 1] != rec.clicked_doc_id) {
      throw ParseError(line_no, "presented_rank does not match the presented ranking");
    }
    max_impression = std::max(max_impression, rec.impression_id);
    log.records.push_back(std::move(rec));
  }
  if (!have_impressions) log.n_query_impressions = log.records.empty() ? 0 : max_impression + 1;
  return log;
}

void save_click_log(const ClickLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_click_log(log, out);
}

ClickLog load_click_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_click_log(in);
}

}  // namespace ultr
