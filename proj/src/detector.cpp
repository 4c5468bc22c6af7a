#include "fbsdetect/detector.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "fbsdetect/errors.hpp"
#include "fbsdetect/eval.hpp"
#include "json_io.hpp"

namespace fbs {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

// JSON has no infinities; those travel as strings.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double num(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw ConfigError("bad number in model file: " + s);
}

json forest_params_json(const ForestParams& p) {
  return {{"n_trees", p.n_trees}, {"max_depth", p.max_depth}, {"min_leaf", p.min_leaf},
          {"max_features", p.max_features}, {"bootstrap", p.bootstrap}};
}

ForestParams forest_params_from(const json& j) {
  ForestParams p;
  p.n_trees = j.at("n_trees");
  p.max_depth = j.at("max_depth");
  p.min_leaf = j.at("min_leaf");
  p.max_features = j.at("max_features");
  p.bootstrap = j.at("bootstrap");
  return p;
}

json params_json(const DetectorParams& p) {
  return {
      {"rc", {{"k", p.rc.k}, {"min_records", p.rc.min_records}, {"forest", forest_params_json(p.rc.forest)}}},
      {"adf",
       {{"n_trees", p.adf.n_trees}, {"subsample", p.adf.subsample}, {"margin", p.adf.margin},
        {"isolation_level", p.adf.isolation_level}, {"max_depth", p.adf.max_depth},
        {"width_floor", p.adf.width_floor}}},
      {"ae",
       {{"epochs", p.ae.epochs}, {"batch_size", p.ae.batch_size}, {"lr0", p.ae.lr0},
        {"lr_decay", p.ae.lr_decay}, {"decay_every", p.ae.decay_every}, {"beta1", p.ae.beta1},
        {"beta2", p.ae.beta2}, {"epsilon", p.ae.epsilon}}},
  };
}

DetectorParams params_from(const json& j) {
  DetectorParams p;
  const auto& rc = j.at("rc");
  p.rc.k = rc.at("k");
  p.rc.min_records = rc.at("min_records");
  p.rc.forest = forest_params_from(rc.at("forest"));
  const auto& adf = j.at("adf");
  p.adf.n_trees = adf.at("n_trees");
  p.adf.subsample = adf.at("subsample");
  p.adf.margin = adf.at("margin");
  p.adf.isolation_level = adf.at("isolation_level");
  p.adf.max_depth = adf.at("max_depth");
  p.adf.width_floor = adf.at("width_floor");
  const auto& ae = j.at("ae");
  p.ae.epochs = ae.at("epochs");
  p.ae.batch_size = ae.at("batch_size");
  p.ae.lr0 = ae.at("lr0");
  p.ae.lr_decay = ae.at("lr_decay");
  p.ae.decay_every = ae.at("decay_every");
  p.ae.beta1 = ae.at("beta1");
  p.ae.beta2 = ae.at("beta2");
  p.ae.epsilon = ae.at("epsilon");
  return p;
}

json forest_json(const RandomForestRegressor& f) {
  json trees = json::array();
  for (const auto& t : f.trees) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                     {"right", right}, {"value", value}});
  }
  return {{"params", forest_params_json(f.params)}, {"seed", f.seed},
          {"n_features", f.n_features}, {"trees", trees}};
}

RandomForestRegressor forest_from(const json& j) {
  RandomForestRegressor f;
  f.params = forest_params_from(j.at("params"));
  f.seed = j.at("seed");
  f.n_features = j.at("n_features");
  for (const auto& t : j.at("trees")) {
    const auto feature = t.at("feature").get<std::vector<int>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<int>>();
    const auto right = t.at("right").get<std::vector<int>>();
    const auto value = t.at("value").get<std::vector<double>>();
    RegressionTree tree;
    tree.nodes.resize(feature.size());
    for (std::size_t i = 0; i < feature.size(); ++i) {
      tree.nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i]};
    }
    f.trees.push_back(std::move(tree));
  }
  return f;
}

json rc_json(const RegressionClusteringModel& m) {
  json cells = json::array();
  for (const auto& c : m.cells) {
    json pairs = json::array();
    for (const auto& p : c.pairs) {
      json forests = json::array();
      for (const auto& f : p.forests) forests.push_back(forest_json(f));
      pairs.push_back({{"excluded", p.excluded}, {"inputs", p.inputs}, {"forests", forests}});
    }
    cells.push_back({{"pci", c.pci}, {"column", c.column}, {"centroids", c.clusters.centroids},
                     {"pairs", pairs}});
  }
  return {{"seed", m.seed}, {"n_features", m.n_features}, {"fill", m.fill},
          {"catalog", m.catalog}, {"columns", m.columns}, {"omitted", m.omitted},
          {"threshold", num(m.threshold)}, {"cells", cells}};
}

RegressionClusteringModel rc_from(const json& j, const RcParams& params) {
  RegressionClusteringModel m;
  m.params = params;
  m.seed = j.at("seed");
  m.n_features = j.at("n_features");
  m.fill = j.at("fill").get<std::vector<double>>();
  m.catalog = j.at("catalog").get<std::vector<Pci>>();
  m.columns = j.at("columns").get<std::vector<std::size_t>>();
  m.omitted = j.at("omitted").get<std::vector<Pci>>();
  m.threshold = num(j.at("threshold"));
  for (const auto& jc : j.at("cells")) {
    RcCellModel c;
    c.pci = jc.at("pci");
    c.column = jc.at("column");
    c.clusters.centroids = jc.at("centroids").get<std::vector<std::vector<double>>>();
    for (const auto& jp : jc.at("pairs")) {
      RcPair p;
      p.excluded = jp.at("excluded");
      p.inputs = jp.at("inputs").get<std::vector<std::size_t>>();
      for (const auto& jf : jp.at("forests")) p.forests.push_back(forest_from(jf));
      c.pairs.push_back(std::move(p));
    }
    m.cells.push_back(std::move(c));
  }
  return m;
}

json adf_json(const AdfModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    std::vector<int> feature, left, right, leaf, size;
    std::vector<double> split, lo, hi, scale;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      split.push_back(n.split);
      left.push_back(n.left);
      right.push_back(n.right);
      leaf.push_back(n.leaf);
    }
    for (const auto& l : t.leaves) {
      lo.insert(lo.end(), l.lo.begin(), l.lo.end());
      hi.insert(hi.end(), l.hi.begin(), l.hi.end());
      scale.insert(scale.end(), l.scale.begin(), l.scale.end());
      size.push_back(l.size);
    }
    trees.push_back({{"feature", feature}, {"split", split}, {"left", left}, {"right", right},
                     {"leaf", leaf}, {"lo", lo}, {"hi", hi}, {"scale", scale}, {"size", size}});
  }
  return {{"seed", m.seed}, {"n_features", m.n_features}, {"subsample_used", m.subsample_used},
          {"trees", trees}};
}

AdfModel adf_from(const json& j, const AdfParams& params) {
  AdfModel m;
  m.params = params;
  m.seed = j.at("seed");
  m.n_features = j.at("n_features");
  m.subsample_used = j.at("subsample_used");
  const std::size_t F = m.n_features;
  for (const auto& jt : j.at("trees")) {
    AdfTree t;
    const auto feature = jt.at("feature").get<std::vector<int>>();
    const auto split = jt.at("split").get<std::vector<double>>();
    const auto left = jt.at("left").get<std::vector<int>>();
    const auto right = jt.at("right").get<std::vector<int>>();
    const auto leaf = jt.at("leaf").get<std::vector<int>>();
    for (std::size_t i = 0; i < feature.size(); ++i) {
      t.nodes.push_back({feature[i], split[i], left[i], right[i], leaf[i]});
    }
    const auto lo = jt.at("lo").get<std::vector<double>>();
    const auto hi = jt.at("hi").get<std::vector<double>>();
    const auto scale = jt.at("scale").get<std::vector<double>>();
    const auto size = jt.at("size").get<std::vector<int>>();
    for (std::size_t l = 0; l < size.size(); ++l) {
      AdfTree::Leaf leaf_data;
      leaf_data.lo.assign(lo.begin() + l * F, lo.begin() + (l + 1) * F);
      leaf_data.hi.assign(hi.begin() + l * F, hi.begin() + (l + 1) * F);
      leaf_data.scale.assign(scale.begin() + l * F, scale.begin() + (l + 1) * F);
      leaf_data.size = size[l];
      t.leaves.push_back(std::move(leaf_data));
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

json ae_json(const AutoencoderModel& m) {
  json layers = json::array();
  for (const auto& l : m.net.layers) {
    layers.push_back({{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}});
  }
  return {{"seed", m.seed},
          {"hidden_activation", m.net.hidden == Activation::kTanh ? "tanh" : "identity"},
          {"mean", m.standardizer.mean}, {"std", m.standardizer.std}, {"layers", layers}};
}

AutoencoderModel ae_from(const json& j, const AdamTrainConfig& cfg) {
  AutoencoderModel m;
  m.train = cfg;
  m.seed = j.at("seed");
  m.net.hidden = j.at("hidden_activation") == "tanh" ? Activation::kTanh : Activation::kIdentity;
  m.standardizer.mean = j.at("mean").get<std::vector<double>>();
  m.standardizer.std = j.at("std").get<std::vector<double>>();
  for (const auto& jl : j.at("layers")) {
    DenseLayer l;
    l.in = jl.at("in");
    l.out = jl.at("out");
    l.weights = jl.at("weights").get<std::vector<double>>();
    l.bias = jl.at("bias").get<std::vector<double>>();
    m.net.layers.push_back(std::move(l));
  }
  return m;
}

}  // namespace

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kRc: return "rc";
    case DetectorKind::kAdf: return "adf";
    case DetectorKind::kAe: return "ae";
  }
  return "?";
}

DetectorKind parse_detector(std::string_view name) {
  if (name == "rc" || name == "RC") return DetectorKind::kRc;
  if (name == "adf" || name == "ADF") return DetectorKind::kAdf;
  if (name == "ae" || name == "AE") return DetectorKind::kAe;
  throw ConfigError("unknown detector '" + std::string(name) + "'");
}

Detector Detector::fit(DetectorKind kind, FeatureScheme scheme, const FeatureMatrix& train,
                       const NeighborCatalog& catalog, const ImputePolicy& impute,
                       const DetectorParams& params, std::uint64_t seed) {
  if (kind == DetectorKind::kRc && scheme != FeatureScheme::kCol) {
    throw ConfigError("the regression clustering detector runs on COL features only");
  }
  Detector d;
  d.kind_ = kind;
  d.scheme_ = scheme;
  d.catalog_ = catalog;
  d.impute_ = impute;
  d.fill_ = fill_values(train, impute);
  d.columns_ = train.column_names;
  d.params_ = params;
  d.seed_ = seed;
  switch (kind) {
    case DetectorKind::kRc:
      d.model_ = rc_fit(train, d.fill_, catalog, params.rc, seed);
      break;
    case DetectorKind::kAdf:
      d.model_ = adf_fit(fbs::impute(train, d.fill_), params.adf, seed);
      break;
    case DetectorKind::kAe:
      d.model_ = ae_fit(fbs::impute(train, d.fill_), params.ae, seed);
      break;
  }
  return d;
}

std::string Detector::id() const { return to_string(kind_) + "(" + to_string(scheme_) + ")"; }

FeatureMatrix Detector::extract(std::span<const ReportRecord> records) const {
  return fbs::extract(scheme_, records, catalog_);
}

Evaluation Detector::evaluate(const FeatureMatrix& m) const {
  if (m.cols() != columns_.size()) throw ConfigError(id() + ": feature width mismatch");
  Evaluation ev;
  ev.scores.resize(m.rows());
  ev.flagged.assign(m.rows(), 0);
  if (const auto* rc = std::get_if<RegressionClusteringModel>(&model_)) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto res = rc_residues(*rc, m, r);
      ev.scores[r] = rc_score(res);
      if (threshold_) ev.flagged[r] = rc_verdict(res, *threshold_).flagged;
    }
    return ev;
  }
  const Matrix X = fbs::impute(m, fill_);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    ev.scores[r] = std::holds_alternative<AdfModel>(model_)
                       ? adf_score(std::get<AdfModel>(model_), X.row(r))
                       : ae_score(std::get<AutoencoderModel>(model_), X.row(r));
    if (threshold_) ev.flagged[r] = ev.scores[r] > *threshold_;
  }
  return ev;
}

double Detector::calibrate(const FeatureMatrix& benign, double target_fpr) {
  if (benign.rows() == 0) throw ConfigError(id() + ": no benign rows to calibrate on");
  double t = 0.0;
  if (const auto* rc = std::get_if<RegressionClusteringModel>(&model_)) {
    t = rc_calibrate(*rc, benign, target_fpr);
  } else {
    t = calibrate_threshold(evaluate(benign).scores, target_fpr);
  }
  set_threshold(t);
  return t;
}

void Detector::set_threshold(std::optional<double> t) {
  threshold_ = t;
  if (auto* rc = std::get_if<RegressionClusteringModel>(&model_)) {
    rc->threshold = t.value_or(std::numeric_limits<double>::infinity());
  }
}

std::string Detector::to_json() const {
  json model;
  if (const auto* rc = std::get_if<RegressionClusteringModel>(&model_)) model = rc_json(*rc);
  if (const auto* adf = std::get_if<AdfModel>(&model_)) model = adf_json(*adf);
  if (const auto* ae = std::get_if<AutoencoderModel>(&model_)) model = ae_json(*ae);
  json fill = json::array();
  for (double v : fill_) fill.push_back(num(v));
  json j = {
      {"format_version", kFormatVersion},
      {"detector", to_string(kind_)},
      {"feature_scheme", to_string(scheme_)},
      {"serving_pci", catalog_.serving_pci},
      {"seed", seed_},
      {"threshold", threshold_ ? num(*threshold_) : json(nullptr)},
      {"imputation",
       {{"kind", impute_.kind == ImputePolicy::Kind::kFillValue ? "fill_value" : "per_column_min_minus"},
        {"value", impute_.value},
        {"fill", fill}}},
      {"columns", columns_},
      {"hyperparameters", params_json(params_)},
      {"catalog", catalog_json(catalog_)},
      {"model", model},
  };
  return j.dump() + "\n";
}

Detector Detector::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version") != kFormatVersion) throw ConfigError("unsupported model format version");
    Detector d;
    d.kind_ = parse_detector(j.at("detector").get<std::string>());
    d.scheme_ = parse_scheme(j.at("feature_scheme").get<std::string>());
    d.seed_ = j.at("seed");
    const auto& imp = j.at("imputation");
    d.impute_.kind = imp.at("kind") == "fill_value" ? ImputePolicy::Kind::kFillValue
                                                     : ImputePolicy::Kind::kPerColumnMinMinus;
    d.impute_.value = imp.at("value");
    for (const auto& v : imp.at("fill")) d.fill_.push_back(num(v));
    d.columns_ = j.at("columns").get<std::vector<std::string>>();
    d.params_ = params_from(j.at("hyperparameters"));
    d.catalog_ = catalog_from(j.at("catalog"));
    const auto& m = j.at("model");
    switch (d.kind_) {
      case DetectorKind::kRc: d.model_ = rc_from(m, d.params_.rc); break;
      case DetectorKind::kAdf: d.model_ = adf_from(m, d.params_.adf); break;
      case DetectorKind::kAe: d.model_ = ae_from(m, d.params_.ae); break;
    }
    if (!j.at("threshold").is_null()) d.set_threshold(num(j.at("threshold")));
    return d;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

void Detector::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << to_json();
  if (!out) throw ConfigError("failed writing " + path);
}

Detector Detector::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("model file " + path + " does not exist");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace fbs
