#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "imasp/imasp.hpp"

namespace imasp {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "imasp_harness_tests";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write(const std::string& name, const std::string& text) {
  const auto p = scratch(name);
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig small_config(int rows = 4, int cols = 4) {
  ExperimentConfig c;
  c.rows = rows;
  c.cols = cols;
  c.budget = 3;
  c.prior_units = 5;
  c.policies = {{"greedy", Model::LGP}};
  c.seeds = {0};
  c.record_timing = false;
  c.fit_grid_points = 5;
  c.planner.horizon = c.horizon();
  return c;
}

TEST(FieldCsv, LoadsTwoByTwo) {
  const auto p = write("two.csv", "row,col,value\n0,0,1.5\n0,1,2\n1,0,0.25\n1,1,3e2\n");
  const auto f = load_field_csv(p);
  EXPECT_EQ(f.domain().rows(), 2);
  EXPECT_EQ(f.domain().cols(), 2);
  EXPECT_DOUBLE_EQ(f.at({0, 0}), 1.5);
  EXPECT_DOUBLE_EQ(f.at({1, 0}), 0.25);
  EXPECT_DOUBLE_EQ(f.at({1, 1}), 300.0);
  EXPECT_DOUBLE_EQ(f.log_at({0, 1}), std::log(2.0));
}

TEST(FieldCsv, DuplicateOrMissingCell) {
  EXPECT_THROW(load_field_csv(write("dup.csv", "row,col,value\n0,0,1\n0,0,2\n0,1,1\n")), MissingCell);
  EXPECT_THROW(load_field_csv(write("gap.csv", "row,col,value\n0,0,1\n1,1,2\n")), MissingCell);
  EXPECT_THROW(load_field_csv(write("small.csv", "row,col,value\n0,0,1\n"), GridDomain(1, 2)),
               MissingCell);
}

TEST(FieldCsv, NonPositiveValues) {
  EXPECT_THROW(load_field_csv(write("zero.csv", "row,col,value\n0,0,0\n")), NonPositiveValue);
  EXPECT_THROW(load_field_csv(write("neg.csv", "row,col,value\n0,0,-1.5\n")), NonPositiveValue);
}

TEST(FieldCsv, MalformedInput) {
  EXPECT_THROW(load_field_csv(write("hdr.csv", "r,c,v\n0,0,1\n")), ParseError);
  EXPECT_THROW(load_field_csv(write("cols.csv", "row,col,value\n0,0\n")), ParseError);
  EXPECT_THROW(load_field_csv(write("num.csv", "row,col,value\n0,x,1\n")), ParseError);
  EXPECT_THROW(load_field_csv(scratch("does_not_exist.csv")), IoError);
}

TEST(FieldCsv, RoundTripIsBitExact) {
  const GridDomain dom(5, 3);
  const auto f = sample_field({0.3, 1.2, 1.5, 0.0}, dom, 11);
  const auto p = scratch("round.csv");
  save_field_csv(f, p);
  const auto g = load_field_csv(p, dom);
  EXPECT_EQ(f.values(), g.values());
}

TEST(Config, ParsesKnownKeys) {
  std::istringstream in(
      "rows = 6\ncols = 7\nteam_size = 2\nbudget = 4\nprior_units = 8\n"
      "policies = urtdp:lgp, mes:gp\nseeds = 0-2,9\nrecord_timing = false\n");
  const auto c = parse_config(in);
  EXPECT_EQ(c.rows, 6);
  EXPECT_EQ(c.cols, 7);
  EXPECT_EQ(c.horizon(), 7);
  EXPECT_EQ(c.planner.horizon, 7);
  ASSERT_EQ(c.policies.size(), 2u);
  EXPECT_EQ(c.policies[1], (PolicySpec{"mes", Model::GP}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1, 2, 9}));
  EXPECT_FALSE(c.record_timing);
  EXPECT_EQ(c.start_cells(), (std::vector<Cell>{{0, 0}, {5, 6}}));
}

TEST(Config, RejectsUnknownKey) {
  std::istringstream in("rows = 6\nbogus = 1\n");
  EXPECT_THROW(parse_config(in), ConfigError);
}

TEST(Config, RejectsUnregisteredPolicies) {
  for (const char* p : {"mes:lgp", "mi:lgp", "random:gp", "greedy"}) {
    std::istringstream in(std::string("policies = ") + p + "\n");
    EXPECT_THROW(parse_config(in), ConfigError) << p;
  }
}

TEST(Config, RejectsInconsistentValues) {
  for (const char* text : {"rows = 0\n", "budget = 0\n", "prior_units = 500\n", "record_timing = maybe\n",
                           "team_size = 2\nstarts = 0,0\n", "team_size = 2\nstarts = 0,0;0,0\n",
                           "seeds = 5-2\n", "field_source = web\n", "alpha = 0\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(parse_config(in), ConfigError) << text;
  }
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config(scratch("absent.cfg")), ConfigError); }

TEST(Experiment, SingleSeedGreedy) {
  const auto records = run_experiment(small_config());
  ASSERT_EQ(records.size(), 1u);
  EXPECT_TRUE(std::isfinite(records[0].ent));
  EXPECT_TRUE(std::isfinite(records[0].err));
  EXPECT_EQ(records[0].paths.size(), 1u);
  EXPECT_EQ(records[0].error_map.size(), 16u);
}

TEST(Experiment, RepeatableAcrossRuns) {
  auto c = small_config(5, 5);
  c.policies = {{"greedy", Model::LGP}, {"mi", Model::GP}, {"urtdp", Model::LGP}};
  c.seeds = {3, 4};
  c.planner.max_simulated_paths = 50;
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  EXPECT_EQ(results_csv(a), results_csv(b));
  EXPECT_EQ(paths_csv(a), paths_csv(b));
}

TEST(Experiment, TeamsObserveTheSameNumberOfCells) {
  for (int k : {1, 2}) {
    auto c = small_config(14, 12);
    c.prior_units = 20;
    c.team_size = k;
    c.budget = 18 / k;
    c.seeds = {0, 1, 2, 3, 4, 5};
    c.planner.horizon = c.horizon();
    int complete = 0;
    for (const auto& r : run_experiment(c)) {
      std::size_t cells = 0;
      for (const auto& path : r.paths) {
        EXPECT_LE(path.size(), static_cast<std::size_t>(c.budget));
        cells += path.size();
      }
      // Prior cells can wall a robot in; otherwise every team collects 18.
      if (!r.dead_end) {
        EXPECT_EQ(cells, 18u) << "k = " << k << ", seed " << r.seed;
        ++complete;
      }
    }
    EXPECT_GT(complete, 0) << "k = " << k;
  }
}

TEST(Experiment, OrderIndependentOfThreads) {
  auto c = small_config(5, 5);
  c.policies = {{"greedy", Model::LGP}, {"greedy", Model::GP}};
  c.seeds = {0, 1, 2, 3, 4, 5};
  const auto one = run_experiment(c, 1);
  const auto four = run_experiment(c, 4);
  EXPECT_EQ(results_csv(one), results_csv(four));
  EXPECT_EQ(error_maps_csv(one, c.domain()), error_maps_csv(four, c.domain()));
}

TEST(Experiment, SeedOffsetShiftsInstances) {
  auto c = small_config();
  c.seeds = {7};
  const auto shifted = run_experiment(c, 1, 3);
  c.seeds = {10};
  const auto direct = run_experiment(c);
  EXPECT_EQ(results_csv(shifted), results_csv(direct));
}

TEST(Emission, EmptyRecordsGiveHeaderOnly) {
  const auto dir = scratch("empty_out");
  fs::remove_all(dir);
  emit_results({}, dir, 0.1);
  EXPECT_EQ(slurp(dir / "results.csv"), std::string(kResultsHeader) + "\n");
}

TEST(Emission, OneRecordOneRow) {
  ResultRecord r;
  r.policy = {"greedy", Model::LGP};
  r.ent = 1.25;
  r.err = 0.5;
  r.seed = 4;
  const auto text = results_csv({r});
  EXPECT_EQ(text, std::string(kResultsHeader) + "\ngreedy,lgp,1,4,1.25,0.5,0\n");
}

std::vector<std::vector<std::string>> rows_of(const std::string& csv) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    out.push_back(cells);
  }
  return out;
}

TEST(Emission, SummaryMeansMatchResults) {
  auto c = small_config(5, 5);
  c.policies = {{"greedy", Model::LGP}, {"mi", Model::GP}};
  c.seeds = {0, 1, 2, 3, 4};
  const auto records = run_experiment(c, 2);
  const auto dir = scratch("summary_out");
  fs::remove_all(dir);
  const auto dom = c.domain();
  emit_results(records, dir, 0.1, &dom);
  const auto results = rows_of(slurp(dir / "results.csv"));
  const auto summary = rows_of(slurp(dir / "summary.csv"));
  ASSERT_EQ(results.size(), 10u);
  ASSERT_EQ(summary.size(), 2u);
  for (const auto& s : summary) {
    double ent = 0.0;
    double err = 0.0;
    int n = 0;
    for (const auto& r : results) {
      if (r[0] == s[0] && r[1] == s[1]) {
        ent += std::stod(r[4]);
        err += std::stod(r[5]);
        ++n;
      }
    }
    ASSERT_EQ(n, 5);
    EXPECT_NEAR(std::stod(s[4]), ent / n, 1e-5 * std::abs(ent / n) + 1e-12);
    EXPECT_NEAR(std::stod(s[5]), err / n, 1e-5 * std::abs(err / n) + 1e-12);
  }
  EXPECT_EQ(summary[0][7], "NA");
  EXPECT_NE(summary[1][7], "NA");
  EXPECT_TRUE(fs::exists(dir / "paths.csv"));
  EXPECT_TRUE(fs::exists(dir / "error_maps.csv"));
}

TEST(Emission, BytesIdenticalWithoutTiming) {
  auto c = small_config(5, 5);
  c.seeds = {0, 1};
  const auto a = scratch("bytes_a");
  const auto b = scratch("bytes_b");
  fs::remove_all(a);
  fs::remove_all(b);
  const auto dom = c.domain();
  emit_results(run_experiment(c, 1), a, 0.1, &dom);
  emit_results(run_experiment(c, 2), b, 0.1, &dom);
  for (const char* f : {"results.csv", "summary.csv", "paths.csv", "error_maps.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

}  // namespace
}  // namespace imasp
