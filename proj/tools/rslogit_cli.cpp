// rslogit-cli: fit | cv | ddc | label | simulate | network | replay

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rslogit/rslogit.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rslogit;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// Child seed streams split off the single --seed.
constexpr std::uint64_t kSeedLts = 1;
constexpr std::uint64_t kSeedFolds = 2;

std::string sha256File(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string utcNow() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void writeText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

template <class F>
void writeWith(const fs::path& path, F&& fn) {
  std::ostringstream os;
  fn(os);
  writeText(path, os.str());
}

void writeJson(const fs::path& path, const json& j) { writeText(path, j.dump(2) + "\n"); }

std::vector<double> parseList(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto v = parseNumber(tok);
    if (!v) throw ConfigError(std::string("invalid value in ") + what + ": '" + tok + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw ConfigError(std::string(what) + " is empty");
  return out;
}

std::vector<std::string> splitNames(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

/// Options shared by every command.
struct Common {
  std::string out;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::vector<std::string> inputs;
};

struct DataOpts {
  std::string path;
  std::string response = "y";
  std::string format = "auto";

  TableFormat tableFormat() const {
    if (format == "csv") return TableFormat::Csv;
    if (format == "tsv") return TableFormat::Tsv;
    return TableFormat::Auto;
  }
  Dataset load(bool withResponse = true) const {
    return loadDataset(path, LoadOptions{tableFormat(), withResponse ? response : ""});
  }
  json toJson() const { return {{"path", path}, {"response", response}, {"format", format}}; }
};

struct ModelOpts {
  std::string estimator = "robust";
  double alpha = 0.5;
  double lambda = -1.0;
  bool cv = false;
  std::vector<std::string> penaltyFactors;
  double hFraction = 0.85;
  int nStarts = 500;
  int nKeep = 10;
  std::string residual = "as-printed";
  int folds = 5;
  int repeats = 10;
  std::string alphaGrid = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
  int nLambda = 40;
  double lambdaRatio = 0.01;
  std::string lambdas;

  Estimator est() const {
    if (estimator == "classical") return Estimator::Classical;
    if (estimator == "robust") return Estimator::Robust;
    throw ConfigError("estimator must be 'classical' or 'robust'");
  }
  ResidualVariant variant() const {
    if (residual == "as-printed") return ResidualVariant::AsPrinted;
    if (residual == "sqrt") return ResidualVariant::Sqrt;
    throw ConfigError("residual must be 'as-printed' or 'sqrt'");
  }
  Eigen::VectorXd factors(const Dataset& d) const {
    Eigen::VectorXd pf = Eigen::VectorXd::Ones(d.cols());
    for (const auto& item : penaltyFactors) {
      const auto eq = item.rfind('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--penalty-factor expects NAME=VALUE, got '" + item + "'");
      auto v = parseNumber(item.substr(eq + 1));
      if (!v || *v < 0.0) throw ConfigError("invalid penalty factor in '" + item + "'");
      pf(d.columnIndex(item.substr(0, eq))) = *v;
    }
    return pf;
  }
  LtsConfig lts(const Common& c) const {
    LtsConfig l;
    l.hFraction = hFraction;
    l.nInitialSubsets = nStarts;
    l.nBestKeep = nKeep;
    l.residualVariant = variant();
    l.rngSeed = deriveSeed(c.seed, kSeedLts);
    l.threads = c.threads;
    return l;
  }
  CvConfig cvConfig(const Common& c, const Eigen::VectorXd& pf) const {
    CvConfig cfg;
    cfg.kFolds = folds;
    cfg.nRepeats = repeats;
    cfg.alphaGrid = parseList(alphaGrid, "alpha grid");
    cfg.nLambda = nLambda;
    cfg.lambdaRatio = lambdaRatio;
    if (!lambdas.empty()) cfg.lambdaValues = parseList(lambdas, "lambda list");
    cfg.penaltyFactors = pf;
    cfg.rngSeed = deriveSeed(c.seed, kSeedFolds);
    cfg.estimator = est();
    cfg.threads = c.threads;
    return cfg;
  }
  json toJson() const {
    json j{{"estimator", estimator}, {"alpha", alpha}, {"lambda", lambda}, {"cv", cv},
           {"penalty_factors", penaltyFactors}, {"h_fraction", hFraction}, {"n_starts", nStarts},
           {"n_keep", nKeep}, {"residual", residual}};
    if (cv) {
      j["folds"] = folds;
      j["repeats"] = repeats;
      j["alpha_grid"] = alphaGrid;
      j["n_lambda"] = nLambda;
      j["lambda_ratio"] = lambdaRatio;
      j["lambdas"] = lambdas;
    }
    return j;
  }
};

void addCommon(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Output directory")->required();
  app->add_option("--seed", c.seed, "Master seed; child seeds are derived from it")->capture_default_str();
  app->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->capture_default_str();
}

void addData(CLI::App* app, DataOpts& d, bool response = true) {
  app->add_option("--data", d.path, "Input CSV/TSV (header row; first column = row id)")->required();
  if (response) app->add_option("--response", d.response, "Name of the 0/1 response column")->capture_default_str();
  app->add_option("--format", d.format, "auto | csv | tsv")->check(CLI::IsMember({"auto", "csv", "tsv"}))->capture_default_str();
}

void addModel(CLI::App* app, ModelOpts& m, bool fitCmd) {
  app->add_option("--estimator", m.estimator, "classical | robust")
      ->check(CLI::IsMember({"classical", "robust"}))
      ->capture_default_str();
  if (fitCmd) {
    app->add_option("--alpha", m.alpha, "Elastic-net mixing in [0, 1]")->capture_default_str();
    app->add_option("--lambda", m.lambda, "Penalty level (>= 0); required unless --cv");
    app->add_flag("--cv", m.cv, "Choose alpha and lambda by repeated k-fold CV");
  }
  app->add_option("--penalty-factor", m.penaltyFactors, "NAME=VALUE penalty factor (repeatable)");
  app->add_option("--h-fraction", m.hFraction, "Robust: fraction of rows kept in the h-subset")->capture_default_str();
  app->add_option("--n-starts", m.nStarts, "Robust: elemental starting subsets")->capture_default_str();
  app->add_option("--n-keep", m.nKeep, "Robust: candidates concentrated to convergence")->capture_default_str();
  app->add_option("--residual", m.residual, "Robust: as-printed | sqrt residual")
      ->check(CLI::IsMember({"as-printed", "sqrt"}))
      ->capture_default_str();
  app->add_option("--folds", m.folds, "CV folds")->capture_default_str();
  app->add_option("--repeats", m.repeats, "CV repeats")->capture_default_str();
  app->add_option("--alpha-grid", m.alphaGrid, "CV alpha values, comma separated")->capture_default_str();
  app->add_option("--n-lambda", m.nLambda, "CV lambda grid size per alpha")->capture_default_str();
  app->add_option("--lambda-ratio", m.lambdaRatio, "CV smallest/largest lambda")->capture_default_str();
  app->add_option("--lambdas", m.lambdas, "CV explicit lambda values, comma separated");
}

json manifestJson(const std::string& command, const std::vector<std::string>& argv, const Common& c,
                  const json& config, const std::string& started) {
  json inputs = json::array();
  for (const auto& p : c.inputs) inputs.push_back({{"path", p}, {"sha256", sha256File(p)}});
  return json{{"command", command},
              {"argv", argv},
              {"config", config},
              {"seed", c.seed},
              {"seed_rule", "child = splitmix64(seed ^ splitmix64(stream)); lts stream 1, folds stream 2"},
              {"threads", c.threads},
              {"inputs", inputs},
              {"version", kVersion},
              {"started_at", started},
              {"finished_at", utcNow()}};
}

void writeCoefficients(const fs::path& path, const Dataset& d, const Coefficients& coefs) {
  std::vector<std::pair<std::string, double>> rows;
  for (Index j = 0; j < d.cols(); ++j)
    if (coefs.beta(j) != 0.0) rows.emplace_back(d.colNames[static_cast<std::size_t>(j)], coefs.beta(j));
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  writeWith(path, [&](std::ostream& os) {
    os << "name,coefficient\n(intercept)," << formatDouble(coefs.intercept) << '\n';
    for (const auto& [name, v] : rows) os << csvField(name) << ',' << formatDouble(v) << '\n';
  });
}

json cvSelectionJson(const CvResult& res) {
  const auto& b = res.best();
  return {{"alpha", b.alpha},
          {"lambda", b.lambda},
          {"mean_deviance", b.meanDeviance},
          {"sd_deviance", b.sdDeviance},
          {"n_nonzero", b.nNonzero},
          {"excluded_points", res.excluded.size()}};
}

int cmdFit(const Common& c, const DataOpts& dopt, const ModelOpts& m, json& config) {
  const Dataset data = dopt.load();
  const Eigen::VectorXd pf = m.factors(data);
  const Estimator est = m.est();
  const LtsConfig lts = m.lts(c);
  const fs::path out(c.out);
  double alpha = m.alpha, lambda = m.lambda;
  json summary;
  if (m.cv) {
    const CvResult res = crossValidate(data, m.cvConfig(c, pf), lts);
    writeWith(out / "cv.csv", [&](std::ostream& os) { writeCvTable(os, res); });
    alpha = res.best().alpha;
    lambda = res.best().lambda;
    summary["cv"] = cvSelectionJson(res);
  } else if (lambda < 0.0) {
    throw ConfigError("--lambda is required unless --cv is given");
  }
  const PenaltySpec spec{alpha, lambda, pf};
  spec.validate(data.cols());

  Coefficients coefs;
  std::vector<int> flags;
  Eigen::VectorXd resid, prob;
  bool converged = true;
  summary["estimator"] = m.estimator;
  if (est == Estimator::Classical) {
    const FitResult fit = fitEnetLogistic(data, spec);
    coefs = fit.coefs;
    prob = fit.fittedProb;
    flags = flagOutliersClassical(fit, data, defaultCutoff(), m.variant());
    resid.resize(data.rows());
    for (Index i = 0; i < data.rows(); ++i) resid(i) = pearsonResidual(data.y()(i), prob(i), m.variant());
    converged = fit.converged;
    summary["deviance"] = fit.devianceTotal;
  } else {
    const RobustFitResult fit = fitEnetLts(data, spec, lts);
    coefs = fit.reweightedCoefs;
    prob = predictProb(fit.rawCoefs, data);
    flags = fit.outlierFlags;
    resid = fit.pearsonResiduals;
    converged = fit.reweightedFit.converged;
    summary["h"] = fit.hSize.h;
    summary["raw_objective"] = fit.rawObjective;
    summary["raw_nonzero"] = fit.rawCoefs.nonzeroCount();
    summary["deviance"] = fit.reweightedFit.devianceTotal;
    summary["failed_starts"] = fit.failedStarts;
  }
  const auto nOut = std::count(flags.begin(), flags.end(), 1);
  summary["alpha"] = alpha;
  summary["lambda"] = lambda;
  summary["nonzero"] = coefs.nonzeroCount();
  summary["outliers"] = nOut;
  summary["cutoff"] = defaultCutoff();
  summary["n"] = data.rows();
  summary["p"] = data.cols();
  summary["converged"] = converged;

  writeCoefficients(out / "coefficients.csv", data, coefs);
  writeWith(out / "outliers.csv", [&](std::ostream& os) {
    os << "row_id,residual,fitted_prob\n";
    for (Index i = 0; i < data.rows(); ++i)
      if (flags[static_cast<std::size_t>(i)])
        os << csvField(data.rowIds[static_cast<std::size_t>(i)]) << ',' << formatDouble(resid(i)) << ','
           << formatDouble(prob(i)) << '\n';
  });
  writeJson(out / "summary.json", summary);
  config["model"] = m.toJson();
  return kOk;
}

int cmdCv(const Common& c, const DataOpts& dopt, const ModelOpts& m, json& config) {
  const Dataset data = dopt.load();
  const Eigen::VectorXd pf = m.factors(data);
  const CvResult res = crossValidate(data, m.cvConfig(c, pf), m.lts(c));
  const fs::path out(c.out);
  writeWith(out / "cv.csv", [&](std::ostream& os) { writeCvTable(os, res); });
  json sel = cvSelectionJson(res);
  json perRepeat = json::array();
  for (const auto& r : res.perRepeatScores) {
    json row = json::array();
    for (double v : r) row.push_back(std::isnan(v) ? json(nullptr) : json(v));
    perRepeat.push_back(row);
  }
  sel["per_repeat_scores"] = perRepeat;
  writeJson(out / "selection.json", sel);
  ModelOpts mm = m;
  mm.cv = true;
  config["model"] = mm.toJson();
  return kOk;
}

struct DdcOpts {
  std::vector<std::string> genes;
  std::string rowGroups;
  std::string render = "both";
  bool excludeResponse = true;
  DdcConfig cfg;
};

int cmdDdc(const Common& c, const DataOpts& dopt, DdcOpts& o, json& config) {
  Dataset data = dopt.load(false);
  if (o.excludeResponse) {
    auto it = std::find(data.colNames.begin(), data.colNames.end(), dopt.response);
    if (it != data.colNames.end()) {
      std::vector<Index> keep;
      for (Index j = 0; j < data.cols(); ++j)
        if (data.colNames[static_cast<std::size_t>(j)] != dopt.response) keep.push_back(j);
      data = data.selectCols(keep);
    }
  }
  const auto genes = splitNames(o.genes);
  if (!genes.empty()) {
    std::vector<Index> cols;
    for (const auto& g : genes) cols.push_back(data.columnIndex(g));
    data = data.selectCols(cols);
  }
  o.cfg.threads = c.threads;
  const CellMap map = detectDeviatingCells(data, o.cfg);

  std::vector<Index> rows;
  std::vector<std::string> groups;
  if (!o.rowGroups.empty()) {
    const Table t = readTable(o.rowGroups);
    if (t.header.size() < 2) throw DataError(o.rowGroups + ": expected columns id,group");
    std::map<std::string, Index> pos;
    for (Index i = 0; i < data.rows(); ++i) pos[data.rowIds[static_cast<std::size_t>(i)]] = i;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      auto it = pos.find(t.rows[r][0]);
      if (it == pos.end()) throw DataError(t.where(r, 0) + ": unknown row id '" + t.rows[r][0] + "'");
      rows.push_back(it->second);
      groups.push_back(t.rows[r][1]);
    }
  } else {
    rows = detail::iota(data.rows());
  }
  const auto cols = detail::iota(data.cols());
  const fs::path out(c.out);
  writeWith(out / "cellmap.csv", [&](std::ostream& os) { writeCellMapCsv(os, map); });
  if (o.render == "svg" || o.render == "both")
    writeText(out / "cellmap.svg", renderCellMap(map, rows, cols, RenderFormat::Svg, groups));
  if (o.render == "txt" || o.render == "both")
    writeText(out / "cellmap.txt", renderCellMap(map, rows, cols, RenderFormat::Txt, groups));
  writeWith(out / "rowscores.csv", [&](std::ostream& os) {
    os << "row,row_score\n";
    for (Index i = 0; i < map.rows(); ++i)
      os << csvField(map.rowIds[static_cast<std::size_t>(i)]) << ',' << formatDouble(map.rowScores(i)) << '\n';
  });
  writeJson(out / "summary.json", json{{"n", map.rows()},
                                       {"p", map.cols()},
                                       {"cutoff", map.cutoff},
                                       {"high", map.count(CellFlag::High)},
                                       {"low", map.count(CellFlag::Low)},
                                       {"missing", map.count(CellFlag::Missing)}});
  config["ddc"] = json{{"genes", genes},
                       {"row_groups", o.rowGroups},
                       {"render", o.render},
                       {"corr_threshold", o.cfg.corrThreshold},
                       {"flag_quantile", o.cfg.flagQuantile},
                       {"max_predictors", o.cfg.maxPredictors},
                       {"min_mad", o.cfg.minMad}};
  return kOk;
}

int cmdLabel(const Common& c, const std::string& clinical, const ClinicalColumns& cols, json& config) {
  const auto recs = clinicalFromTable(readTable(clinical), cols);
  std::vector<LabelResult> labels;
  for (const auto& r : recs) labels.push_back(deriveLabel(r));
  const fs::path out(c.out);
  writeWith(out / "labels.csv", [&](std::ostream& os) { writeLabels(os, recs, labels); });
  std::size_t nT = 0, nN = 0, nU = 0, nS = 0;
  writeWith(out / "suspects.csv", [&](std::ostream& os) {
    os << "id,label,rule\n";
    for (std::size_t k = 0; k < recs.size(); ++k) {
      const auto& l = labels[k];
      (l.label == LabelClass::Tnbc ? nT : l.label == LabelClass::NonTnbc ? nN : nU)++;
      if (!l.suspect) continue;
      ++nS;
      std::stringstream ss(l.suspectReason);
      std::string rule;
      while (std::getline(ss, rule, ';')) {
        os << csvField(recs[k].individualId) << ',' << labelText(l.label) << ','
           << csvField(std::string(detail::trim(rule))) << '\n';
      }
    }
  });
  writeJson(out / "summary.json",
            json{{"records", recs.size()}, {"tnbc", nT}, {"non_tnbc", nN}, {"unlabelable", nU}, {"suspect", nS}});
  config["label"] = json{{"id_column", cols.id},
                         {"er_column", cols.er},
                         {"pr_column", cols.pr},
                         {"her2_ihc_level_column", cols.her2IhcLevel},
                         {"her2_ihc_status_column", cols.her2IhcStatus},
                         {"her2_fish_column", cols.her2Fish}};
  return kOk;
}

int cmdSimulate(const Common& c, SyntheticConfig cfg, double class1Rho, json& config) {
  cfg.seed = c.seed;
  if (class1Rho >= 0.0) cfg.class1BlockRho = class1Rho;
  const SyntheticData sd = generateSynthetic(cfg);
  const fs::path out(c.out);
  writeWith(out / "data.csv", [&](std::ostream& os) { writeDataset(os, sd.data, "y"); });
  writeJson(out / "ground_truth.json", groundTruthJson(sd));
  config["simulate"] = json{{"n", cfg.n},
                            {"p", cfg.p},
                            {"sparsity", cfg.sparsity},
                            {"signal", cfg.signal},
                            {"class_balance", cfg.classBalance},
                            {"label_flip_rate", cfg.labelFlipRate},
                            {"leverage_rate", cfg.leverageRate},
                            {"leverage_size", cfg.leverageSize},
                            {"cell_outlier_rate", cfg.cellOutlierRate},
                            {"cell_outlier_size", cfg.cellOutlierSize},
                            {"block_size", cfg.blockSize},
                            {"block_rho", cfg.blockRho},
                            {"class1_block_rho", class1Rho >= 0.0 ? json(class1Rho) : json(nullptr)}};
  return kOk;
}

int cmdNetwork(const Common& c, const DataOpts& dopt, const std::vector<std::string>& genesRaw, double threshold,
               const std::vector<std::string>& classes, json& config) {
  const Dataset data = dopt.load();
  const auto genes = splitNames(genesRaw);
  const fs::path out(c.out);
  for (const auto& cls : classes) {
    const ClassFilter f = cls == "0" ? ClassFilter::Class0 : cls == "1" ? ClassFilter::Class1 : ClassFilter::All;
    const GeneNetwork net = correlationNetwork(data, genes, f, threshold);
    writeWith(out / ("network_" + cls + ".dot"), [&](std::ostream& os) { writeNetworkDot(os, net); });
    writeJson(out / ("network_" + cls + ".json"), networkJson(net));
  }
  config["network"] = json{{"genes", genes}, {"threshold", threshold}, {"classes", classes}};
  return kOk;
}

int run(const std::vector<std::string>& args);

int cmdReplay(const std::string& manifestPath, const std::string& outDir) {
  std::ifstream in(manifestPath);
  if (!in) throw DataError("cannot open '" + manifestPath + "'");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(manifestPath + ": invalid manifest: " + e.what());
  }
  if (!m.contains("argv") || !m["argv"].is_array()) throw DataError(manifestPath + ": manifest has no argv");
  for (const auto& inp : m.value("inputs", json::array())) {
    const std::string path = inp.at("path");
    if (sha256File(path) != inp.at("sha256").get<std::string>())
      throw DataError("input '" + path + "' changed since the manifest was written");
  }
  std::vector<std::string> args = m["argv"].get<std::vector<std::string>>();
  bool replaced = false;
  for (std::size_t k = 0; k + 1 < args.size(); ++k) {
    if (args[k] == "--out") {
      args[k + 1] = outDir;
      replaced = true;
    }
  }
  for (auto& a : args) {
    if (a.rfind("--out=", 0) == 0) {
      a = "--out=" + outDir;
      replaced = true;
    }
  }
  if (!replaced) throw DataError(manifestPath + ": manifest argv has no --out");
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Robust sparse logistic regression, cellwise outlier detection and data pipeline tools", "rslogit-cli"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  DataOpts dopt;
  ModelOpts model;

  auto* fit = app.add_subcommand("fit", "Fit a classical or robust elastic-net logistic model");
  addCommon(fit, common);
  addData(fit, dopt);
  addModel(fit, model, true);

  auto* cv = app.add_subcommand("cv", "Repeated k-fold cross-validation over an (alpha, lambda) grid");
  addCommon(cv, common);
  addData(cv, dopt);
  addModel(cv, model, false);

  DdcOpts ddc;
  auto* ddcCmd = app.add_subcommand("ddc", "Cellwise outlier detection and cell map");
  addCommon(ddcCmd, common);
  addData(ddcCmd, dopt);
  ddcCmd->add_option("--genes", ddc.genes, "Columns to analyse (comma separated or repeated)");
  ddcCmd->add_option("--row-groups", ddc.rowGroups, "CSV id,group: rows to render, in order, with band labels");
  ddcCmd->add_option("--render", ddc.render, "svg | txt | both")
      ->check(CLI::IsMember({"svg", "txt", "both"}))
      ->capture_default_str();
  ddcCmd->add_option("--flag-quantile", ddc.cfg.flagQuantile, "Cutoff quantile")->capture_default_str();
  ddcCmd->add_option("--corr-threshold", ddc.cfg.corrThreshold, "Minimum |correlation| of a predictor column")
      ->capture_default_str();
  ddcCmd->add_option("--max-predictors", ddc.cfg.maxPredictors, "Predictor columns per column")->capture_default_str();

  std::string clinical;
  ClinicalColumns ccols;
  auto* label = app.add_subcommand("label", "Derive TNBC labels and a discordance report from clinical fields");
  addCommon(label, common);
  label->add_option("--clinical", clinical, "Clinical CSV/TSV")->required();
  label->add_option("--id-column", ccols.id)->capture_default_str();
  label->add_option("--er-column", ccols.er)->capture_default_str();
  label->add_option("--pr-column", ccols.pr)->capture_default_str();
  label->add_option("--her2-ihc-level-column", ccols.her2IhcLevel)->capture_default_str();
  label->add_option("--her2-ihc-status-column", ccols.her2IhcStatus)->capture_default_str();
  label->add_option("--her2-fish-column", ccols.her2Fish)->capture_default_str();

  SyntheticConfig sim;
  double class1Rho = -1.0;
  auto* simulate = app.add_subcommand("simulate", "Generate a seeded synthetic instance with recorded contamination");
  addCommon(simulate, common);
  simulate->add_option("--n", sim.n)->capture_default_str();
  simulate->add_option("--p", sim.p)->capture_default_str();
  simulate->add_option("--sparsity", sim.sparsity)->capture_default_str();
  simulate->add_option("--signal", sim.signal)->capture_default_str();
  simulate->add_option("--class-balance", sim.classBalance)->capture_default_str();
  simulate->add_option("--label-flip-rate", sim.labelFlipRate)->capture_default_str();
  simulate->add_option("--leverage-rate", sim.leverageRate)->capture_default_str();
  simulate->add_option("--leverage-size", sim.leverageSize)->capture_default_str();
  simulate->add_option("--cell-outlier-rate", sim.cellOutlierRate)->capture_default_str();
  simulate->add_option("--cell-outlier-size", sim.cellOutlierSize)->capture_default_str();
  simulate->add_option("--block-size", sim.blockSize)->capture_default_str();
  simulate->add_option("--block-rho", sim.blockRho)->capture_default_str();
  simulate->add_option("--class1-block-rho", class1Rho, "Two-regime design: block correlation of class 1");

  std::vector<std::string> netGenes;
  std::vector<std::string> netClasses = {"0", "1", "all"};
  double netThreshold = 0.6;
  auto* network = app.add_subcommand("network", "Correlation network among selected columns (DOT and JSON)");
  addCommon(network, common);
  addData(network, dopt);
  network->add_option("--genes", netGenes, "Columns (comma separated or repeated); default all");
  network->add_option("--threshold", netThreshold, "Edges need |rho| above this")->capture_default_str();
  network->add_option("--class", netClasses, "0 | 1 | all (repeatable)")
      ->check(CLI::IsMember({"0", "1", "all"}))
      ->capture_default_str();

  std::string manifestPath, replayOut;
  auto* replay = app.add_subcommand("replay", "Rerun the command recorded in a manifest into a new directory");
  replay->add_option("--manifest", manifestPath, "manifest.json written by an earlier run")->required();
  replay->add_option("--out", replayOut, "Output directory")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (replay->parsed()) return cmdReplay(manifestPath, replayOut);

  const std::string started = utcNow();
  fs::create_directories(common.out);
  json config;
  std::string command;
  int rc = kOk;
  if (fit->parsed()) {
    command = "fit";
    common.inputs = {dopt.path};
    config["data"] = dopt.toJson();
    rc = cmdFit(common, dopt, model, config);
  } else if (cv->parsed()) {
    command = "cv";
    common.inputs = {dopt.path};
    config["data"] = dopt.toJson();
    rc = cmdCv(common, dopt, model, config);
  } else if (ddcCmd->parsed()) {
    command = "ddc";
    common.inputs = {dopt.path};
    if (!ddc.rowGroups.empty()) common.inputs.push_back(ddc.rowGroups);
    config["data"] = dopt.toJson();
    rc = cmdDdc(common, dopt, ddc, config);
  } else if (label->parsed()) {
    command = "label";
    common.inputs = {clinical};
    rc = cmdLabel(common, clinical, ccols, config);
  } else if (simulate->parsed()) {
    command = "simulate";
    rc = cmdSimulate(common, sim, class1Rho, config);
  } else if (network->parsed()) {
    command = "network";
    common.inputs = {dopt.path};
    config["data"] = dopt.toJson();
    rc = cmdNetwork(common, dopt, netGenes, netThreshold, netClasses, config);
  }
  writeJson(fs::path(common.out) / "manifest.json", manifestJson(command, args, common, config, started));
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
