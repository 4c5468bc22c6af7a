// Command line front end: simulate, extract, train, evaluate, report and
// pipeline, all driven by one flat config file.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "fbsdetect/config.hpp"
#include "fbsdetect/errors.hpp"
#include "fbsdetect/pipeline.hpp"

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string scenario;
  std::string features;
  std::string model;
  std::optional<double> fpr;
  std::string out;
  bool force = false;
};

fbs::PipelineConfig resolve(const Options& o) {
  fbs::PipelineConfig cfg;
  if (!o.config_path.empty()) cfg = fbs::load_config(o.config_path);
  std::string overrides;
  if (!o.features.empty()) overrides += "schemes = " + o.features + "\n";
  if (!o.model.empty()) overrides += "detectors = " + o.model + "\n";
  if (!o.out.empty()) overrides += "out_dir = " + o.out + "\n";
  if (!overrides.empty()) {
    std::istringstream in(overrides);
    cfg = fbs::parse_config(in, cfg);
  }
  if (o.fpr) cfg.target_fpr = *o.fpr;
  if (o.seed) cfg.reseed(*o.seed);
  return cfg;
}

// For every stage but simulate, --scenario narrows the scenario matrix.
void narrow_scenarios(fbs::PipelineConfig& cfg, const std::string& scenario) {
  if (scenario.empty()) return;
  std::istringstream in("scenarios = " + scenario + "\n");
  cfg = fbs::parse_config(in, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"False base station detection from measurement reports"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "training seed; validation and test seeds shift with it");
    sub->add_option("--features", o.features, "feature schemes, comma separated: col, dst, xy");
    sub->add_option("--model", o.model, "detectors, comma separated: rc, adf, ae");
    sub->add_option("--fpr", o.fpr, "target benign false positive rate");
    sub->add_option("--out", o.out, "output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "run the radio simulator");
  add_common(simulate);
  simulate->add_option("--scenario", o.scenario,
                       "benign, validation:P or attack:P (default: every run in the scenario matrix)");
  auto* extract = app.add_subcommand("extract", "build training feature matrices");
  add_common(extract);
  auto* train = app.add_subcommand("train", "fit one detector per serving cell");
  add_common(train);
  train->add_flag("--force", o.force, "overwrite existing models");
  auto* evaluate = app.add_subcommand("evaluate", "calibrate, score the attack runs, write reports");
  add_common(evaluate);
  evaluate->add_option("--scenario", o.scenario, "false-cell PCIs to evaluate, comma separated");
  auto* report = app.add_subcommand("report", "print a digest of the written reports");
  add_common(report);
  auto* pipeline = app.add_subcommand("pipeline", "all stages in order");
  add_common(pipeline);
  pipeline->add_option("--scenario", o.scenario, "false-cell PCIs, comma separated, or all / none");

  CLI11_PARSE(app, argc, argv);

  try {
    fbs::PipelineConfig cfg = resolve(o);
    if (simulate->parsed()) {
      std::optional<fbs::SimTarget> only;
      if (!o.scenario.empty()) only = fbs::SimTarget::parse(o.scenario);
      fbs::cmd_simulate(cfg, only);
    } else if (extract->parsed()) {
      fbs::cmd_extract(cfg);
    } else if (train->parsed()) {
      fbs::cmd_train(cfg, o.force);
    } else if (evaluate->parsed()) {
      narrow_scenarios(cfg, o.scenario);
      fbs::cmd_evaluate(cfg);
      std::cout << fbs::cmd_report(cfg);
    } else if (report->parsed()) {
      std::cout << fbs::cmd_report(cfg);
    } else if (pipeline->parsed()) {
      narrow_scenarios(cfg, o.scenario);
      fbs::cmd_pipeline(cfg);
      std::cout << fbs::cmd_report(cfg);
    }
  } catch (const fbs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return fbs::kExitConfig;
  } catch (const fbs::DependencyError& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return fbs::kExitDependency;
  } catch (const fbs::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return fbs::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fbs::kExitFailure;
  }
  return fbs::kExitOk;
}
