#include "fbsdetect/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "fbsdetect/csv.hpp"
#include "fbsdetect/errors.hpp"
#include "fbsdetect/sim_io.hpp"
#include "json_io.hpp"

namespace fbs {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("missing " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_manifest(const PipelineConfig& config, const fs::path& path, json body) {
  body["config_hash"] = config_hash(config);
  body["seeds"] = {{"train", config.sim.seed},
                   {"validation", config.validation_seed},
                   {"test", config.test_seed}};
  write_text(path, body.dump(2) + "\n");
}

std::string rel(const PipelineConfig& config, const fs::path& p) {
  return p.lexically_relative(config.out_dir).generic_string();
}

fs::path serving_file(const fs::path& dir, Pci serving, const std::string& suffix) {
  return dir / ("serving_" + std::to_string(serving) + suffix);
}

// Serving PCIs that have extracted training features for a scheme.
std::vector<Pci> trained_servings(const fs::path& dir, const std::string& suffix) {
  std::vector<Pci> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("serving_", 0) != 0 || name.size() <= 8 + suffix.size()) continue;
    if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
    const auto digits = name.substr(8, name.size() - 8 - suffix.size());
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) continue;
    out.push_back(std::stoi(digits));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<MeasurementReport> load_log(const PipelineConfig& config, const SimTarget& target) {
  const auto path = sim_dir(config, target) / "reports.csv";
  if (!fs::exists(path)) {
    throw DependencyError("no simulation output at " + path.string() + "; run simulate first");
  }
  return load_reports(path.string());
}

template <class F>
auto run_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("[" + stage + "] " + e.what());
  } catch (const DependencyError& e) {
    throw DependencyError("[" + stage + "] " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("[" + stage + "] " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("[" + stage + "] " + e.what());
  }
}


}  // namespace

SimTarget SimTarget::parse(std::string_view text) {
  if (text == "benign" || text == "train") return {Kind::kTrain, 0};
  const auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    const auto head = text.substr(0, colon);
    const Pci pci = static_cast<Pci>(csv::parse_long(text.substr(colon + 1)));
    if (head == "validation") return {Kind::kValidation, pci};
    if (head == "attack" || head == "test") return {Kind::kTest, pci};
  }
  throw ConfigError("unknown scenario '" + std::string(text) +
                    "' (expected benign, validation:P or attack:P)");
}

std::string SimTarget::dir_name() const {
  switch (kind) {
    case Kind::kTrain: return "train";
    case Kind::kValidation: return "validation_p" + std::to_string(pci);
    case Kind::kTest: return "test_p" + std::to_string(pci);
  }
  return "?";
}

SimConfig sim_config_for(const PipelineConfig& config, const SimTarget& target) {
  SimConfig sim = config.sim;
  if (target.kind == SimTarget::Kind::kTrain) return sim;
  sim.n_ues = config.test_n_ues;
  if (target.kind == SimTarget::Kind::kValidation) {
    sim.duration_s = config.dwell_s;
    sim.seed = derive_seed(config.validation_seed, static_cast<std::uint64_t>(target.pci));
  } else {
    sim.duration_s = config.dwell_s + config.travel_s;
    sim.seed = derive_seed(config.test_seed, static_cast<std::uint64_t>(target.pci));
  }
  return sim;
}

Scenario scenario_for(const PipelineConfig& config, const SimTarget& target) {
  if (target.kind == SimTarget::Kind::kTrain) return Scenario::benign();
  return Scenario::attack(target.pci, grid_topology(config.sim), config.dwell_s, config.travel_s);
}

std::vector<SimTarget> all_targets(const PipelineConfig& config) {
  std::vector<SimTarget> out{{SimTarget::Kind::kTrain, 0}};
  for (Pci p : config.scenario_pcis()) {
    out.push_back({SimTarget::Kind::kValidation, p});
    out.push_back({SimTarget::Kind::kTest, p});
  }
  return out;
}

std::vector<std::pair<DetectorKind, FeatureScheme>> model_combos(const PipelineConfig& config) {
  std::vector<std::pair<DetectorKind, FeatureScheme>> out;
  for (auto d : config.detectors) {
    for (auto s : config.schemes) {
      if (d == DetectorKind::kRc && s != FeatureScheme::kCol) continue;
      if (std::find(out.begin(), out.end(), std::pair{d, s}) == out.end()) out.emplace_back(d, s);
    }
  }
  return out;
}

fs::path sim_dir(const PipelineConfig& config, const SimTarget& target) {
  return fs::path(config.out_dir) / "sim" / target.dir_name();
}

fs::path features_dir(const PipelineConfig& config, FeatureScheme scheme) {
  return fs::path(config.out_dir) / "features" / to_string(scheme);
}

fs::path models_dir(const PipelineConfig& config, DetectorKind kind, FeatureScheme scheme) {
  return fs::path(config.out_dir) / "models" / (to_string(kind) + "_" + to_string(scheme));
}

fs::path reports_dir(const PipelineConfig& config, DetectorKind kind, FeatureScheme scheme) {
  return fs::path(config.out_dir) / "reports" / (to_string(kind) + "_" + to_string(scheme));
}

void cmd_simulate(const PipelineConfig& config, const std::optional<SimTarget>& only) {
  validate(config);
  std::vector<SimTarget> targets;
  if (only) {
    if (only->kind != SimTarget::Kind::kTrain) {
      const auto pcis = grid_topology(config.sim);
      if (std::none_of(pcis.begin(), pcis.end(), [&](const CellSite& c) { return c.pci == only->pci; })) {
        throw ConfigError("scenario PCI " + std::to_string(only->pci) + " is not in the topology");
      }
    }
    targets.push_back(*only);
  } else {
    targets = all_targets(config);
  }
  const auto topology = grid_topology(config.sim);
  for (const auto& target : targets) {
    const SimConfig sim = sim_config_for(config, target);
    const Scenario scenario = scenario_for(config, target);
    const auto reports = run_scenario(sim, scenario);
    const fs::path dir = sim_dir(config, target);
    fs::create_directories(dir);
    save_reports((dir / "reports.csv").string(), reports, sim.max_neighbors_per_report);
    save_topology((dir / "topology.csv").string(), topology);
    json m = {{"stage", "simulate"},
              {"scenario", target.kind == SimTarget::Kind::kTrain ? "benign"
                           : target.kind == SimTarget::Kind::kValidation ? "validation"
                                                                         : "attack"},
              {"seed", sim.seed},
              {"n_ues", sim.n_ues},
              {"duration_s", sim.duration_s},
              {"n_reports", reports.size()},
              {"artifacts", {rel(config, dir / "reports.csv"), rel(config, dir / "topology.csv")}}};
    if (target.kind != SimTarget::Kind::kTrain) {
      m["decommissioned_pci"] = target.pci;
      m["dwell_s"] = config.dwell_s;
      m["travel_s"] = target.kind == SimTarget::Kind::kTest ? config.travel_s : 0.0;
    }
    write_manifest(config, dir / "manifest.json", m);
  }
}

void cmd_extract(const PipelineConfig& config) {
  validate(config);
  const SimTarget train{SimTarget::Kind::kTrain, 0};
  const auto log = load_log(config, train);
  const auto topology = load_topology((sim_dir(config, train) / "topology.csv").string());
  const auto grouped = preprocess(log);
  json artifacts = json::array();
  for (auto scheme : config.schemes) {
    const fs::path dir = features_dir(config, scheme);
    fs::create_directories(dir);
    for (const auto& [serving, records] : grouped) {
      const auto catalog = fit_neighbor_catalog(serving, records, topology);
      const auto fm = extract(scheme, records, catalog);
      const auto csv_path = serving_file(dir, serving, ".csv");
      std::ostringstream os;
      write_features_csv(os, fm);
      write_text(csv_path, os.str());
      json meta = {{"scheme", to_string(scheme)},
                   {"serving_pci", serving},
                   {"n_records", records.size()},
                   {"catalog", catalog_json(catalog)},
                   {"imputation", config.impute.describe()},
                   {"rsrp_unit", "dBm"},
                   {"columns", fm.column_names}};
      write_text(serving_file(dir, serving, ".meta.json"), meta.dump(2) + "\n");
      artifacts.push_back(rel(config, csv_path));
    }
  }
  write_manifest(config, fs::path(config.out_dir) / "manifests" / "extract.json",
                 {{"stage", "extract"}, {"artifacts", artifacts}});
}

void cmd_train(const PipelineConfig& config, bool force) {
  validate(config);
  const auto combos = model_combos(config);
  // Check every target up front so a refusal leaves nothing half-written.
  std::vector<std::tuple<DetectorKind, FeatureScheme, Pci>> jobs;
  for (const auto& [kind, scheme] : combos) {
    const auto servings = trained_servings(features_dir(config, scheme), ".meta.json");
    if (servings.empty()) {
      throw DependencyError("no " + to_string(scheme) + " training features in " +
                            features_dir(config, scheme).string() + "; run extract first");
    }
    for (Pci s : servings) {
      const auto path = serving_file(models_dir(config, kind, scheme), s, ".json");
      if (fs::exists(path) && !force) {
        throw ConfigError(path.string() + " exists; pass --force to retrain");
      }
      jobs.emplace_back(kind, scheme, s);
    }
  }
  json artifacts = json::array();
  for (const auto& [kind, scheme, serving] : jobs) {
    const fs::path fdir = features_dir(config, scheme);
    const json meta = json::parse(read_text(serving_file(fdir, serving, ".meta.json")));
    const NeighborCatalog catalog = catalog_from(meta.at("catalog"));
    std::ifstream in(serving_file(fdir, serving, ".csv"));
    if (!in) throw DependencyError("missing features for serving cell " + std::to_string(serving));
    const FeatureMatrix train = read_features_csv(in);
    const std::uint64_t seed =
        derive_seed(derive_seed(config.sim.seed, static_cast<std::uint64_t>(serving)),
                    static_cast<std::uint64_t>(kind) * 8 + static_cast<std::uint64_t>(scheme));
    const Detector d = Detector::fit(kind, scheme, train, catalog, config.impute, config.params, seed);
    const auto path = serving_file(models_dir(config, kind, scheme), serving, ".json");
    fs::create_directories(path.parent_path());
    d.save(path.string());
    artifacts.push_back(rel(config, path));
  }
  write_manifest(config, fs::path(config.out_dir) / "manifests" / "train.json",
                 {{"stage", "train"}, {"artifacts", artifacts}});
}

const ComboResult* EvaluateSummary::find(DetectorKind kind, FeatureScheme scheme) const {
  for (const auto& c : combos) {
    if (c.detector == kind && c.scheme == scheme) return &c;
  }
  return nullptr;
}

EvaluateSummary cmd_evaluate(const PipelineConfig& config) {
  validate(config);
  const auto pcis = config.scenario_pcis();
  // Logs are shared by every detector, so group them once.
  std::map<Pci, std::map<Pci, std::vector<ReportRecord>>> validation, test;
  for (Pci p : pcis) {
    validation[p] = preprocess(load_log(config, {SimTarget::Kind::kValidation, p}));
    test[p] = preprocess(load_log(config, {SimTarget::Kind::kTest, p}));
  }
  auto records_of = [](const std::map<Pci, std::vector<ReportRecord>>& g, Pci s) {
    auto it = g.find(s);
    return it == g.end() ? std::vector<ReportRecord>{} : it->second;
  };

  EvaluateSummary summary;
  json artifacts = json::array();
  for (const auto& [kind, scheme] : model_combos(config)) {
    const fs::path mdir = models_dir(config, kind, scheme);
    const auto servings = trained_servings(mdir, ".json");
    if (servings.empty()) {
      throw DependencyError("no " + to_string(kind) + "(" + to_string(scheme) + ") models in " +
                            mdir.string() + "; run train first");
    }
    ComboResult combo;
    combo.detector = kind;
    combo.scheme = scheme;
    std::map<Pci, std::vector<ServingResult>> per_scenario;
    std::map<Pci, std::vector<ScoreRow>> rows;
    struct Pooled {
      std::vector<unsigned char> flags;
      std::vector<RecordLabel> labels;
    };
    std::map<Pci, Pooled> pooled;
    std::map<Pci, std::pair<double, long>> tp_sum, benign_sum;

    for (Pci s : servings) {
      Detector det = Detector::load(serving_file(mdir, s, ".json").string());
      // Benign-labelled validation records from every scenario calibrate.
      std::vector<ReportRecord> cal;
      for (Pci p : pcis) {
        for (auto& rec : records_of(validation[p], s)) {
          const bool has_false = std::any_of(rec.neighbors.begin(), rec.neighbors.end(),
                                             [p](const NeighborRsrp& n) { return n.pci == p; });
          if (!has_false) cal.push_back(std::move(rec));
        }
      }
      CalibrationRow crow;
      crow.serving_pci = s;
      crow.n_calibration = static_cast<long>(cal.size());
      for (const auto& rec : cal) crow.n_static += flag_static(rec, det.catalog());
      if (cal.empty()) {
        det.set_threshold(std::numeric_limits<double>::infinity());
      } else {
        const FeatureMatrix fm = det.extract(cal);
        det.calibrate(fm, config.target_fpr);
        const auto ev = det.evaluate(fm);
        crow.exceedances = std::accumulate(ev.flagged.begin(), ev.flagged.end(), 0L);
      }
      crow.threshold = *det.threshold();
      combo.calibration.push_back(crow);
      det.save(serving_file(mdir, s, ".json").string());

      for (Pci p : pcis) {
        const auto recs = records_of(test[p], s);
        ServingResult res;
        res.serving_pci = s;
        res.labels = label_records(recs, p, det.catalog());
        Evaluation ev;
        if (!recs.empty()) ev = det.evaluate(det.extract(recs));
        res.flagged = ev.flagged;
        for (std::size_t i = 0; i < recs.size(); ++i) {
          res.time_s.push_back(recs[i].time_s);
          const auto& l = res.labels[i];
          rows[p].push_back({recs[i].record_id, recs[i].time_s, s, det.id(), ev.scores[i],
                             ev.flagged[i] != 0, l.is_static, l.is_tp});
          auto& acc = l.is_tp ? tp_sum[p] : benign_sum[p];
          acc.first += ev.scores[i];
          acc.second += 1;
        }
        RecallReport r = recall_report(res.flagged, res.labels);
        r.serving_pci = s;
        r.detector = det.id();
        r.threshold = *det.threshold();
        combo.recall.push_back({std::to_string(p), r});
        auto& pool = pooled[s];
        pool.flags.insert(pool.flags.end(), res.flagged.begin(), res.flagged.end());
        pool.labels.insert(pool.labels.end(), res.labels.begin(), res.labels.end());
        per_scenario[p].push_back(std::move(res));
      }
    }
    // A cell that never served in training has an empty catalog, so every
    // report it receives is a static novelty. There is no model to score it.
    std::set<Pci> untrained;
    for (Pci p : pcis) {
      for (const auto& [s, recs] : test[p]) {
        if (!std::binary_search(servings.begin(), servings.end(), s)) untrained.insert(s);
      }
    }
    for (Pci s : untrained) {
      NeighborCatalog empty;
      empty.serving_pci = s;
      for (Pci p : pcis) {
        const auto recs = records_of(test[p], s);
        ServingResult res;
        res.serving_pci = s;
        res.labels = label_records(recs, p, empty);
        res.flagged.assign(recs.size(), 0);
        for (const auto& rec : recs) res.time_s.push_back(rec.time_s);
        RecallReport r = recall_report(res.flagged, res.labels);
        r.serving_pci = s;
        r.detector = to_string(kind) + "(" + to_string(scheme) + ")";
        r.threshold = std::numeric_limits<double>::infinity();
        combo.recall.push_back({std::to_string(p), r});
        auto& pool = pooled[s];
        pool.flags.insert(pool.flags.end(), res.flagged.begin(), res.flagged.end());
        pool.labels.insert(pool.labels.end(), res.labels.begin(), res.labels.end());
        per_scenario[p].push_back(std::move(res));
      }
    }
    for (const auto& [s, pool] : pooled) {
      RecallReport r = recall_report(pool.flags, pool.labels);
      r.serving_pci = s;
      r.detector = to_string(kind) + "(" + to_string(scheme) + ")";
      r.threshold = std::numeric_limits<double>::infinity();
      for (const auto& c : combo.calibration) {
        if (c.serving_pci == s) r.threshold = c.threshold;
      }
      combo.recall.push_back({"all", r});
    }
    std::sort(combo.recall.begin(), combo.recall.end(), [](const RecallRow& a, const RecallRow& b) {
      const bool a_all = a.scope == "all", b_all = b.scope == "all";
      if (a_all != b_all) return b_all;
      if (!a_all && a.scope != b.scope) return std::stoi(a.scope) < std::stoi(b.scope);
      return a.report.serving_pci < b.report.serving_pci;
    });

    const fs::path rdir = reports_dir(config, kind, scheme);
    fs::create_directories(rdir);
    for (Pci p : pcis) {
      combo.aggregated.push_back(aggregate_false_cell(per_scenario[p], p, config.position_bin_s));
      ScenarioSeparation sep;
      sep.false_pci = p;
      sep.n_tp = tp_sum[p].second;
      sep.n_benign = benign_sum[p].second;
      if (sep.n_tp) sep.mean_tp = tp_sum[p].first / static_cast<double>(sep.n_tp);
      if (sep.n_benign) sep.mean_benign = benign_sum[p].first / static_cast<double>(sep.n_benign);
      combo.separation.push_back(sep);

      auto& r = rows[p];
      std::sort(r.begin(), r.end(), [](const ScoreRow& a, const ScoreRow& b) { return a.record_id < b.record_id; });
      std::ostringstream scores_csv;
      write_scores_csv(scores_csv, r);
      const auto scores_path = rdir / ("scores_p" + std::to_string(p) + ".csv");
      write_text(scores_path, scores_csv.str());

      std::vector<double> sc, times;
      std::vector<RecordLabel> labels;
      std::vector<Pci> serving;
      for (const auto& row : r) {
        sc.push_back(row.score);
        times.push_back(row.time_s);
        labels.push_back({row.record_id, row.is_tp, row.is_static});
        serving.push_back(row.serving_pci);
      }
      std::ostringstream timeline_csv;
      write_timeline_csv(timeline_csv, export_timeline(sc, labels, times, serving));
      const auto timeline_path = rdir / ("timeline_p" + std::to_string(p) + ".csv");
      write_text(timeline_path, timeline_csv.str());
      artifacts.push_back(rel(config, scores_path));
      artifacts.push_back(rel(config, timeline_path));
      combo.scores[p] = std::move(r);
    }

    std::ostringstream recall_csv, agg_csv, cal_csv;
    write_recall_csv(recall_csv, combo.recall);
    write_aggregated_csv(agg_csv, combo.aggregated);
    cal_csv << "serving_pci,detector,threshold,n_calibration,exceedances,exceedance_rate,n_static\n";
    for (const auto& c : combo.calibration) {
      cal_csv << c.serving_pci << ',' << to_string(kind) << '(' << to_string(scheme) << ")," << csv::format(c.threshold)
              << ',' << c.n_calibration << ',' << c.exceedances << ','
              << (c.n_calibration ? csv::format(static_cast<double>(c.exceedances) / static_cast<double>(c.n_calibration))
                                  : std::string("NA"))
              << ',' << c.n_static << '\n';
    }
    write_text(rdir / "recall_report.csv", recall_csv.str());
    write_text(rdir / "aggregated_report.csv", agg_csv.str());
    write_text(rdir / "calibration.csv", cal_csv.str());
    for (const char* f : {"recall_report.csv", "aggregated_report.csv", "calibration.csv"}) {
      artifacts.push_back(rel(config, rdir / f));
    }
    summary.combos.push_back(std::move(combo));
  }
  write_manifest(config, fs::path(config.out_dir) / "manifests" / "evaluate.json",
                 {{"stage", "evaluate"}, {"target_fpr", config.target_fpr}, {"artifacts", artifacts}});
  return summary;
}

std::string cmd_report(const PipelineConfig& config) {
  validate(config);
  std::ostringstream out;
  for (const auto& [kind, scheme] : model_combos(config)) {
    const fs::path rdir = reports_dir(config, kind, scheme);
    const auto recall = csv::read_file((rdir / "recall_report.csv").string());
    const auto agg = csv::read_file((rdir / "aggregated_report.csv").string());
    out << to_string(kind) << "(" << to_string(scheme) << ")\n";
    out << "  serving  fpr       recall    recall_no_static\n";
    const auto c_scope = recall.column("false_pci"), c_s = recall.column("serving_pci"),
               c_fpr = recall.column("benign_fpr_achieved"), c_r = recall.column("recall_with_static"),
               c_rn = recall.column("recall_without_static");
    for (const auto& row : recall.rows) {
      if (row[c_scope] != "all") continue;
      char line[128];
      std::snprintf(line, sizeof line, "  %-8s %-9s %-9s %s\n", row[c_s].c_str(), row[c_fpr].c_str(),
                    row[c_r].c_str(), row[c_rn].c_str());
      out << line;
    }
    const auto c_p = agg.column("false_pci"), c_pt = agg.column("P_total"), c_dt = agg.column("D_total");
    double sum = 0.0;
    int n = 0;
    out << "  false_pci  positions  detected\n";
    for (const auto& row : agg.rows) {
      out << "  " << row[c_p] << "  " << row[c_pt] << "  " << row[c_dt] << "\n";
      if (row[c_dt] != "NA") {
        sum += csv::parse_double(row[c_dt]);
        ++n;
      }
    }
    if (n) out << "  mean detection ratio " << csv::format(sum / n) << "\n";
  }
  write_text(fs::path(config.out_dir) / "reports" / "summary.txt", out.str());
  return out.str();
}

EvaluateSummary cmd_pipeline(const PipelineConfig& config) {
  run_stage("config", [&] { validate(config); });
  run_stage("simulate", [&] { cmd_simulate(config); });
  run_stage("extract", [&] { cmd_extract(config); });
  run_stage("train", [&] { cmd_train(config, true); });
  if (config.scenario_pcis().empty()) return {};
  auto summary = run_stage("evaluate", [&] { return cmd_evaluate(config); });
  run_stage("report", [&] { return cmd_report(config); });
  return summary;
}

}  // namespace fbs
