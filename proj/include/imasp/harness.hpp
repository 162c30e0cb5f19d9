#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/program_options.hpp>

#include "imasp/baselines.hpp"
#include "imasp/evaluation.hpp"
#include "imasp/field_model.hpp"
#include "imasp/planning.hpp"
#include "imasp/urtdp.hpp"

namespace imasp {

// ---------------------------------------------------------------- field CSV

inline constexpr const char* kFieldHeader = "row,col,value";

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& text, const std::string& what) {
  T v{};
  const std::string t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    throw ParseError("cannot parse " + what + ": '" + text + "'");
  }
  return v;
}

/// Shortest representation that reads back to the same double.
inline std::string exact(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

struct FieldRecord {
  Cell cell;
  double value;
};

inline std::vector<FieldRecord> read_field_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kFieldHeader) {
    throw ParseError("field CSV must start with the header row,col,value");
  }
  std::vector<FieldRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto parts = detail::split(line, ',');
    if (parts.size() != 3) throw ParseError("line " + std::to_string(lineno) + ": expected 3 fields");
    FieldRecord r{{detail::parse_number<int>(parts[0], "row"), detail::parse_number<int>(parts[1], "col")},
                  detail::parse_number<double>(parts[2], "value")};
    if (!(r.value > 0.0)) {
      throw NonPositiveValue("line " + std::to_string(lineno) + ": field values must be positive");
    }
    out.push_back(r);
  }
  return out;
}

inline FieldMap load_field_csv(const std::filesystem::path& path, const GridDomain& domain) {
  const auto records = read_field_records(path);
  std::vector<double> values(static_cast<std::size_t>(domain.size()), 0.0);
  std::vector<bool> seen(values.size(), false);
  for (const auto& r : records) {
    if (!domain.contains(r.cell)) throw ParseError("field cell outside the domain");
    const auto i = static_cast<std::size_t>(domain.index(r.cell));
    if (seen[i]) {
      throw MissingCell("duplicate field cell (" + std::to_string(r.cell.row) + "," +
                        std::to_string(r.cell.col) + ")");
    }
    seen[i] = true;
    values[i] = r.value;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      const Cell c = domain.cell(static_cast<int>(i));
      throw MissingCell("field cell (" + std::to_string(c.row) + "," + std::to_string(c.col) +
                        ") missing");
    }
  }
  return FieldMap(domain, std::move(values));
}

/// Loads a field whose domain is the bounding box of the listed cells.
inline FieldMap load_field_csv(const std::filesystem::path& path) {
  const auto records = read_field_records(path);
  if (records.empty()) throw MissingCell("field CSV lists no cells");
  int rows = 0;
  int cols = 0;
  for (const auto& r : records) {
    if (r.cell.row < 0 || r.cell.col < 0) throw ParseError("negative cell index");
    rows = std::max(rows, r.cell.row + 1);
    cols = std::max(cols, r.cell.col + 1);
  }
  return load_field_csv(path, GridDomain(rows, cols));
}

inline void save_field_csv(const FieldMap& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kFieldHeader << '\n';
  for (const auto& c : field.domain().cells()) {
    out << c.row << ',' << c.col << ',' << detail::exact(field.at(c)) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ------------------------------------------------------------- configuration

struct PolicySpec {
  std::string name;
  Model model = Model::LGP;

  friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

inline std::string label(const PolicySpec& p) {
  return p.name + ":" + (p.model == Model::GP ? "gp" : "lgp");
}

/// Name/model pairs the harness knows how to build.
inline bool policy_registered(const PolicySpec& p) {
  if (p.name == "urtdp" || p.name == "greedy") return true;
  if (p.name == "mes" || p.name == "mi") return p.model == Model::GP;
  return false;
}

struct ExperimentConfig {
  int rows = 14;
  int cols = 12;
  int team_size = 1;
  int budget = 18;  // new cells per robot
  int prior_units = 20;
  std::vector<PolicySpec> policies = {{"urtdp", Model::LGP}, {"mes", Model::GP}};
  std::vector<std::uint64_t> seeds = {0};
  std::string field_source = "synthetic";  // or "csv"
  std::string field_csv;
  Hyperparams field{0.0, 1.0, 2.0, 0.0};
  std::vector<Cell> starts;  // empty: corner defaults
  PlannerConfig planner;
  int fit_grid_points = 20;
  double ttest_alpha = 0.1;
  bool record_timing = true;

  GridDomain domain() const { return GridDomain(rows, cols); }
  int horizon() const { return team_size * budget - 1; }

  /// Starting cells: the configured ones, or the top-left corner followed by
  /// the bottom-right, top-right and bottom-left corners.
  std::vector<Cell> start_cells() const {
    if (!starts.empty()) return starts;
    const std::vector<Cell> corners = {{0, 0}, {rows - 1, cols - 1}, {0, cols - 1}, {rows - 1, 0}};
    return {corners.begin(), corners.begin() + std::min<std::size_t>(corners.size(), team_size)};
  }

  void validate() const {
    if (rows <= 0 || cols <= 0) throw ConfigError("rows and cols must be positive");
    if (team_size < 1) throw ConfigError("team_size must be at least 1");
    if (budget < 1) throw ConfigError("budget must be at least 1");
    if (starts.empty() && team_size > 4) throw ConfigError("more than 4 robots need explicit starts");
    if (!starts.empty() && static_cast<int>(starts.size()) != team_size) {
      throw ConfigError("starts must list one cell per robot");
    }
    const auto cells = start_cells();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (!domain().contains(cells[i])) throw ConfigError("start cell outside the domain");
      for (std::size_t j = 0; j < i; ++j) {
        if (cells[i] == cells[j]) throw ConfigError("two robots share a start cell");
      }
    }
    if (prior_units < 0 || prior_units + team_size >= rows * cols) {
      throw ConfigError("prior_units must leave unobserved cells");
    }
    if (prior_units + team_size < 5) throw ConfigError("hyperparameter fit needs at least 5 prior cells");
    if (policies.empty()) throw ConfigError("no policies listed");
    for (const auto& p : policies) {
      if (!policy_registered(p)) throw ConfigError("policy " + label(p) + " is not in the registry");
    }
    if (seeds.empty()) throw ConfigError("no seeds listed");
    if (field_source != "synthetic" && field_source != "csv") {
      throw ConfigError("field_source must be synthetic or csv");
    }
    if (field_source == "csv" && field_csv.empty()) throw ConfigError("field_csv missing");
    if (fit_grid_points < 1) throw ConfigError("fit_grid_points must be positive");
    if (!(ttest_alpha > 0.0 && ttest_alpha < 1.0)) throw ConfigError("ttest_alpha outside (0, 1)");
    try {
      field.validate();
      planner.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline std::vector<PolicySpec> parse_policies(const std::string& text) {
  std::vector<PolicySpec> out;
  for (const auto& raw : split(text, ',')) {
    const auto item = trim(raw);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("policy '" + item + "' lacks a :model suffix");
    const auto model = item.substr(colon + 1);
    if (model != "gp" && model != "lgp") throw ConfigError("unknown model '" + model + "'");
    out.push_back({item.substr(0, colon), model == "gp" ? Model::GP : Model::LGP});
  }
  return out;
}

/// "0-19" or "1,4,7" or a mix of both.
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& raw : split(text, ',')) {
    const auto item = trim(raw);
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_number<std::uint64_t>(item, "seed"));
    } else {
      const auto lo = parse_number<std::uint64_t>(item.substr(0, dash), "seed");
      const auto hi = parse_number<std::uint64_t>(item.substr(dash + 1), "seed");
      if (hi < lo) throw ConfigError("descending seed range");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
  }
  return out;
}

/// "r,c;r,c"
inline std::vector<Cell> parse_cells(const std::string& text) {
  std::vector<Cell> out;
  for (const auto& raw : split(text, ';')) {
    const auto item = trim(raw);
    if (item.empty()) continue;
    const auto parts = split(item, ',');
    if (parts.size() != 2) throw ConfigError("cell '" + item + "' is not row,col");
    out.push_back({parse_number<int>(parts[0], "row"), parse_number<int>(parts[1], "col")});
  }
  return out;
}

}  // namespace detail

/// Parses a flat `key = value` file; unknown keys are rejected.
inline ExperimentConfig parse_config(std::istream& in) {
  namespace po = boost::program_options;
  ExperimentConfig c;
  std::string policies;
  std::string seeds;
  std::string starts;
  std::string record_timing;
  po::options_description desc;
  desc.add_options()
      ("rows", po::value(&c.rows))
      ("cols", po::value(&c.cols))
      ("team_size", po::value(&c.team_size))
      ("budget", po::value(&c.budget))
      ("prior_units", po::value(&c.prior_units))
      ("policies", po::value(&policies))
      ("seeds", po::value(&seeds))
      ("field_source", po::value(&c.field_source))
      ("field_csv", po::value(&c.field_csv))
      ("field_mean", po::value(&c.field.mean))
      ("field_signal_variance", po::value(&c.field.signal_variance))
      ("field_length_scale", po::value(&c.field.length_scale))
      ("field_noise_variance", po::value(&c.field.noise_variance))
      ("starts", po::value(&starts))
      ("intervals", po::value(&c.planner.intervals))
      ("truncation", po::value(&c.planner.truncation))
      ("alpha", po::value(&c.planner.alpha))
      ("max_simulated_paths", po::value(&c.planner.max_simulated_paths))
      ("mes_max_expansions", po::value(&c.planner.mes_max_expansions))
      ("planner_seed", po::value(&c.planner.seed))
      ("fit_grid_points", po::value(&c.fit_grid_points))
      ("ttest_alpha", po::value(&c.ttest_alpha))
      ("record_timing", po::value(&record_timing));
  try {
    po::variables_map vm;
    po::store(po::parse_config_file(in, desc, false), vm);
    po::notify(vm);
  } catch (const po::error& e) {
    throw ConfigError(e.what());
  }
  try {
    if (!policies.empty()) c.policies = detail::parse_policies(policies);
    if (!seeds.empty()) c.seeds = detail::parse_seeds(seeds);
    if (!starts.empty()) c.starts = detail::parse_cells(starts);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  if (!record_timing.empty()) {
    if (record_timing == "true" || record_timing == "1") c.record_timing = true;
    else if (record_timing == "false" || record_timing == "0") c.record_timing = false;
    else throw ConfigError("record_timing must be true or false");
  }
  c.planner.horizon = c.horizon();
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

// ---------------------------------------------------------------- experiment

inline std::unique_ptr<Policy> make_policy(const PolicySpec& p, const PlanningContext& ctx,
                                           const PlannerConfig& planner) {
  if (!policy_registered(p)) throw ConfigError("policy " + label(p) + " is not in the registry");
  if (p.name == "urtdp") return std::make_unique<UrtdpPolicy>(ctx, planner);
  if (p.name == "greedy") {
    if (p.model == Model::LGP) return std::make_unique<GreedyPolicy>(ctx);
    return std::make_unique<NonAdaptiveGreedyPolicy>(ctx);
  }
  if (p.name == "mes") return std::make_unique<MesPolicy>(ctx, planner.mes_max_expansions);
  return std::make_unique<MiPolicy>(ctx);
}

/// Everything one seed of an experiment shares across policies.
struct Instance {
  FieldMap field;
  PosteriorData d0;
  TeamState s0;
  Hyperparams fitted;
  std::uint64_t seed;
};

inline Instance make_instance(const ExperimentConfig& cfg, std::uint64_t seed) {
  const GridDomain domain = cfg.domain();
  FieldMap field = cfg.field_source == "csv" ? load_field_csv(cfg.field_csv, domain)
                                             : sample_field(cfg.field, domain, seed);
  const auto starts = cfg.start_cells();
  std::vector<Cell> pool;
  for (const auto& c : domain.cells()) {
    if (std::find(starts.begin(), starts.end(), c) == starts.end()) pool.push_back(c);
  }
  // Separate stream so planner settings never move the prior units.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Cell> chosen;
  std::sample(pool.begin(), pool.end(), std::back_inserter(chosen), cfg.prior_units, rng);
  std::vector<Cell> locations = chosen;
  locations.insert(locations.end(), starts.begin(), starts.end());
  std::vector<double> values;
  for (const auto& c : locations) values.push_back(field.log_at(c));
  PosteriorData d0(locations, values);
  const Hyperparams fitted =
      fit_hyperparams(d0, domain, HyperparamGrid::defaults(d0, domain, cfg.fit_grid_points));
  TeamState s0 = TeamState::facing_interior(domain, starts, locations, cfg.budget);
  return {std::move(field), std::move(d0), std::move(s0), fitted, seed};
}

struct ResultRecord {
  PolicySpec policy;
  int k = 1;
  std::uint64_t seed = 0;
  double ent = 0.0;
  double err = 0.0;
  double wall_time = 0.0;
  bool dead_end = false;
  std::vector<std::vector<Cell>> paths;
  std::vector<double> error_map;
};

inline ResultRecord run_policy(const ExperimentConfig& cfg, const Instance& inst,
                               const PolicySpec& spec) {
  const PlanningContext ctx(cfg.domain(), inst.fitted, spec.model, cfg.horizon());
  PlannerConfig planner = cfg.planner;
  planner.horizon = cfg.horizon();
  planner.seed = cfg.planner.seed + inst.seed;
  auto policy = make_policy(spec, ctx, planner);
  const auto r = rollout(*policy, inst.field, inst.d0, inst.s0, ctx);
  ResultRecord rec;
  rec.policy = spec;
  rec.k = cfg.team_size;
  rec.seed = inst.seed;
  rec.ent = r.ent;
  rec.err = r.err;
  rec.wall_time = cfg.record_timing ? r.wall_time : 0.0;
  rec.dead_end = r.dead_end;
  rec.paths = r.path_cells;
  rec.error_map = error_map(r.final_data, inst.field, inst.fitted);
  return rec;
}

/// Runs every policy on every seed; records are ordered by (policy, seed)
/// whatever the thread count.
inline std::vector<ResultRecord> run_experiment(const ExperimentConfig& cfg, int threads = 1,
                                                std::uint64_t seed_offset = 0) {
  cfg.validate();
  const std::size_t np = cfg.policies.size();
  const std::size_t ns = cfg.seeds.size();
  std::vector<ResultRecord> out(np * ns);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t si = next++; si < ns; si = next++) {
      try {
        const Instance inst = make_instance(cfg, cfg.seeds[si] + seed_offset);
        for (std::size_t pi = 0; pi < np; ++pi) out[pi * ns + si] = run_policy(cfg, inst, cfg.policies[pi]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(ns)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ------------------------------------------------------------------ emission

inline constexpr const char* kResultsHeader = "policy,model,k,seed,ent,err,wall_time_s";

inline std::string results_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream os;
  os << kResultsHeader << '\n';
  for (const auto& r : records) {
    os << r.policy.name << ',' << (r.policy.model == Model::GP ? "gp" : "lgp") << ',' << r.k
       << ',' << r.seed << ',' << detail::sig6(r.ent) << ',' << detail::sig6(r.err) << ','
       << detail::sig6(r.wall_time) << '\n';
  }
  return os.str();
}

/// Per-policy means and paired t-tests against the first policy listed.
inline std::string summary_csv(const std::vector<ResultRecord>& records, double alpha) {
  struct Group {
    PolicySpec policy;
    int k;
    std::vector<std::uint64_t> seeds;
    std::vector<double> ent, err, time;
  };
  std::vector<Group> groups;
  for (const auto& r : records) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.policy == r.policy && g.k == r.k; });
    if (it == groups.end()) {
      groups.push_back({r.policy, r.k, {}, {}, {}, {}});
      it = groups.end() - 1;
    }
    it->seeds.push_back(r.seed);
    it->ent.push_back(r.ent);
    it->err.push_back(r.err);
    it->time.push_back(r.wall_time);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  std::ostringstream os;
  os << "policy,model,k,runs,mean_ent,mean_err,mean_wall_time_s,ent_t,ent_significant,err_t,"
        "err_significant\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& cur = groups[g];
    os << cur.policy.name << ',' << (cur.policy.model == Model::GP ? "gp" : "lgp") << ',' << cur.k
       << ',' << cur.ent.size() << ',' << detail::sig6(mean(cur.ent)) << ','
       << detail::sig6(mean(cur.err)) << ',' << detail::sig6(mean(cur.time));
    const auto& ref = groups.front();
    if (g == 0 || cur.seeds != ref.seeds || cur.seeds.size() < 5) {
      os << ",NA,NA,NA,NA\n";
      continue;
    }
    const auto te = paired_ttest(cur.ent, ref.ent, alpha);
    const auto tr = paired_ttest(cur.err, ref.err, alpha);
    os << ',' << detail::sig6(te.statistic) << ',' << (te.significant ? 1 : 0) << ','
       << detail::sig6(tr.statistic) << ',' << (tr.significant ? 1 : 0) << '\n';
  }
  return os.str();
}

inline std::string paths_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream os;
  os << "policy,model,k,seed,robot,step,row,col\n";
  for (const auto& r : records) {
    for (std::size_t robot = 0; robot < r.paths.size(); ++robot) {
      for (std::size_t step = 0; step < r.paths[robot].size(); ++step) {
        const auto& c = r.paths[robot][step];
        os << r.policy.name << ',' << (r.policy.model == Model::GP ? "gp" : "lgp") << ',' << r.k
           << ',' << r.seed << ',' << robot << ',' << step << ',' << c.row << ',' << c.col << '\n';
      }
    }
  }
  return os.str();
}

inline std::string error_maps_csv(const std::vector<ResultRecord>& records, const GridDomain& domain) {
  std::ostringstream os;
  os << "policy,model,k,seed,row,col,error\n";
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.error_map.size(); ++i) {
      const Cell c = domain.cell(static_cast<int>(i));
      os << r.policy.name << ',' << (r.policy.model == Model::GP ? "gp" : "lgp") << ',' << r.k
         << ',' << r.seed << ',' << c.row << ',' << c.col << ',' << detail::sig6(r.error_map[i])
         << '\n';
    }
  }
  return os.str();
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace detail

/// Writes results.csv and summary.csv into `dir`, plus paths.csv and
/// error_maps.csv when a domain is given.
inline void emit_results(const std::vector<ResultRecord>& records, const std::filesystem::path& dir,
                         double alpha, const GridDomain* domain = nullptr) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  detail::write_file(dir / "results.csv", results_csv(records));
  detail::write_file(dir / "summary.csv", summary_csv(records, alpha));
  if (domain) {
    detail::write_file(dir / "paths.csv", paths_csv(records));
    detail::write_file(dir / "error_maps.csv", error_maps_csv(records, *domain));
  }
}

}  // namespace imasp
