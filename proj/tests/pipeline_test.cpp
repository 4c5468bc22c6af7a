#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "fbsdetect/csv.hpp"
#include "fbsdetect/errors.hpp"
#include "fbsdetect/pipeline.hpp"
#include "fbsdetect/sim_io.hpp"

using namespace fbs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("fbsdetect_" + name);
  fs::remove_all(p);
  return p;
}

PipelineConfig tiny(const std::string& name) {
  PipelineConfig c;
  c.sim.n_ues = 20;
  c.sim.duration_s = 60;
  c.sim.neighbor_detect_threshold_dbm = -92;
  c.test_n_ues = 20;
  c.dwell_s = 20;
  c.travel_s = 20;
  c.scenarios = std::vector<Pci>{5};
  c.params.adf.n_trees = 20;
  c.out_dir = scratch(name).string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("FBS_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "FBS_CLI must point at the command line tool");
  const int status = std::system((std::string(cli) + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config text round trips through the canonical form") {
  std::istringstream in(
      "# comment\nn_ues = 30\nscenarios = 2, 5\nschemes = col, xy\ndetectors = rc, ae\n"
      "impute = per_column_min_minus:3\nadf.n_trees = 40\nneighbor_detect_threshold_dbm = -92\n");
  const auto c = parse_config(in);
  CHECK(c.sim.n_ues == 30);
  CHECK(*c.scenarios == std::vector<Pci>{2, 5});
  CHECK(c.params.adf.n_trees == 40);
  CHECK(c.impute.kind == ImputePolicy::Kind::kPerColumnMinMinus);
  std::istringstream again(to_text(c));
  const auto d = parse_config(again);
  CHECK(to_text(d) == to_text(c));
  CHECK(config_hash(d) == config_hash(c));
}

TEST_CASE("bad config lines are rejected") {
  for (const char* text : {"no_such_key = 1\n", "n_ues = abc\n", "n_ues\n", "target_fpr = 2\n", "schemes = abc\n"}) {
    std::istringstream in(text);
    CHECK_THROWS_AS(validate(parse_config(in)), ConfigError);
  }
}

TEST_CASE("the output directory does not change the config hash") {
  PipelineConfig a, b;
  b.out_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.sim.seed = 4;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("reseeding moves all three seeds together") {
  PipelineConfig c;
  c.reseed(11);
  CHECK(c.sim.seed == 11);
  CHECK(c.validation_seed == 11);
  CHECK(c.test_seed == 19);
}

TEST_CASE("simulation targets parse") {
  CHECK(SimTarget::parse("benign").kind == SimTarget::Kind::kTrain);
  const auto v = SimTarget::parse("validation:5");
  CHECK(v.kind == SimTarget::Kind::kValidation);
  CHECK(v.pci == 5);
  CHECK(SimTarget::parse("attack:7").dir_name() == "test_p7");
  CHECK_THROWS_AS(SimTarget::parse("attack"), ConfigError);
  CHECK_THROWS_AS(SimTarget::parse("holiday:3"), ConfigError);
}

TEST_CASE("twelve scenario cells give 25 simulations") {
  PipelineConfig c;
  CHECK(all_targets(c).size() == 25);
  c.scenarios = std::vector<Pci>{};
  CHECK(all_targets(c).size() == 1);
}

TEST_CASE("validation runs are the dwell phase of the attack with their own seed") {
  PipelineConfig c;
  const auto v = sim_config_for(c, SimTarget::parse("validation:3"));
  const auto t = sim_config_for(c, SimTarget::parse("test:3"));
  CHECK(v.duration_s == c.dwell_s);
  CHECK(t.duration_s == c.dwell_s + c.travel_s);
  CHECK(v.n_ues == c.test_n_ues);
  CHECK(v.seed != t.seed);
  CHECK(v.seed != c.sim.seed);
}

TEST_CASE("rc is only paired with col") {
  PipelineConfig c;
  c.detectors = {DetectorKind::kRc, DetectorKind::kAdf};
  c.schemes = {FeatureScheme::kCol, FeatureScheme::kXy};
  CHECK(model_combos(c).size() == 3);
}

TEST_CASE("benign simulation writes one log and a twelve-cell topology") {
  auto c = tiny("sim_only");
  cmd_simulate(c, SimTarget::parse("benign"));
  const auto dir = sim_dir(c, SimTarget::parse("benign"));
  CHECK(fs::exists(dir / "reports.csv"));
  CHECK(load_topology((dir / "topology.csv").string()).size() == 12);
  const auto first = slurp(dir / "reports.csv");
  cmd_simulate(c, SimTarget::parse("benign"));
  CHECK(slurp(dir / "reports.csv") == first);

  cmd_simulate(c, SimTarget::parse("attack:5"));
  const auto manifest = slurp(sim_dir(c, SimTarget::parse("attack:5")) / "manifest.json");
  CHECK(manifest.find("\"decommissioned_pci\": 5") != std::string::npos);
  fs::remove_all(c.out_dir);
}

TEST_CASE("stages refuse to run before their inputs exist") {
  auto c = tiny("missing_inputs");
  CHECK_THROWS_AS(cmd_extract(c), DependencyError);
  CHECK_THROWS_AS(cmd_train(c, false), DependencyError);
  CHECK_THROWS_AS(cmd_evaluate(c), DependencyError);
}

TEST_CASE("small end-to-end run") {
  auto c = tiny("end_to_end");
  const auto summary = cmd_pipeline(c);
  const auto* adf = summary.find(DetectorKind::kAdf, FeatureScheme::kCol);
  REQUIRE(adf != nullptr);

  // One model per serving cell that had training records.
  std::set<Pci> trained;
  for (const auto& [s, recs] : preprocess(load_reports((sim_dir(c, SimTarget::parse("benign")) / "reports.csv").string()))) {
    trained.insert(s);
  }
  std::size_t models = 0;
  for (const auto& e : fs::directory_iterator(models_dir(c, DetectorKind::kAdf, FeatureScheme::kCol))) {
    models += e.path().extension() == ".json";
  }
  CHECK(models == trained.size());
  CHECK_THROWS_AS(cmd_train(c, false), ConfigError);

  // Calibration never exceeds the target on its own records.
  for (const auto& row : adf->calibration) {
    CHECK(row.exceedances <= static_cast<long>(row.n_calibration * c.target_fpr + 1e-9));
  }

  // tp records and visible positions against a direct scan of the attack log.
  const auto log = load_reports((sim_dir(c, SimTarget::parse("test:5")) / "reports.csv").string());
  long tp = 0;
  std::map<long, std::set<Pci>> bins;
  for (const auto& r : log) {
    for (const auto& n : r.neighbors) {
      if (n.pci == 5) {
        ++tp;
        bins[static_cast<long>(std::floor(r.time_s / c.position_bin_s))].insert(r.serving_pci);
      }
    }
  }
  long counted_tp = 0;
  for (const auto& row : adf->recall) {
    if (row.scope == "5") counted_tp += row.report.n_tp;
  }
  CHECK(counted_tp == tp);
  REQUIRE(adf->aggregated.size() == 1);
  CHECK(adf->aggregated[0].positions() == static_cast<long>(bins.size()));
  long by_bucket[3] = {0, 0, 0};
  for (const auto& [bin, cells] : bins) ++by_bucket[std::min<std::size_t>(cells.size(), 3) - 1];
  for (int b = 0; b < 3; ++b) CHECK(adf->aggregated[0].buckets[b].positions == by_bucket[b]);

  const auto rep = reports_dir(c, DetectorKind::kAdf, FeatureScheme::kCol);
  for (const char* f : {"calibration.csv", "recall_report.csv", "aggregated_report.csv", "scores_p5.csv"}) {
    CHECK(fs::exists(rep / f));
  }
  CHECK(fs::exists(fs::path(c.out_dir) / "reports" / "summary.txt"));
  fs::remove_all(c.out_dir);
}

TEST_CASE("without attack scenarios there is nothing to recall") {
  auto c = tiny("benign_only");
  c.scenarios = std::vector<Pci>{};
  const auto summary = cmd_pipeline(c);
  CHECK(summary.combos.empty());
  CHECK(fs::exists(models_dir(c, DetectorKind::kAdf, FeatureScheme::kCol)));
  CHECK_FALSE(fs::exists(reports_dir(c, DetectorKind::kAdf, FeatureScheme::kCol) / "recall_report.csv"));
  fs::remove_all(c.out_dir);
}

TEST_CASE("the command line maps failures to exit codes") {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  const auto cfg = dir / "tiny.cfg";
  std::ofstream(cfg) << "n_ues = 10\nduration_s = 20\ntest_n_ues = 10\ndwell_s = 10\ntravel_s = 10\n"
                        "scenarios = 4\nadf.n_trees = 10\nout_dir = "
                     << (dir / "out").string() << "\n";
  std::ofstream(dir / "broken.cfg") << "n_ues = many\n";

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("simulate --config " + (dir / "broken.cfg").string()) == kExitConfig);
  CHECK(run_cli("evaluate --config " + cfg.string()) == kExitDependency);
  CHECK(run_cli("simulate --config " + cfg.string() + " --scenario benign") == 0);
  CHECK(run_cli("pipeline --config " + cfg.string() + " --fpr 0.01") == 0);
  CHECK(run_cli("train --config " + cfg.string()) == kExitConfig);
  CHECK(run_cli("train --config " + cfg.string() + " --force") == 0);
  CHECK(run_cli("report --config " + cfg.string()) == 0);
  CHECK(run_cli("evaluate --config " + cfg.string() + " --model xyz") == kExitConfig);
  fs::remove_all(dir);
}
