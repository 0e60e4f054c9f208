#include "cli.hpp"

#include "medsel/error.hpp"
#include "medsel/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

namespace medsel::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << text;
}

fs::path prepare_out(const RunConfig& cfg) {
  fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw InvalidInput("cannot create output directory '" + cfg.out + "'");
  return dir;
}

CvRule parse_rule(const std::string& s) {
  if (s == "min") return CvRule::Minimum;
  if (s == "1se") return CvRule::OneSe;
  throw InvalidInput("unknown CV rule '" + s + "' (expected min or 1se)");
}

bool is_data_command(const std::string& c) { return c == "fit" || c == "select" || c == "check-id"; }

template <class T>
void take(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  if (is_data_command(command)) {
    if (data.empty()) throw InvalidInput("--data is required");
    if (!fs::exists(data)) throw InvalidInput("data file '" + data + "' does not exist");
    if (!roles.empty() && !fs::exists(roles)) throw InvalidInput("roles file '" + roles + "' does not exist");
    if (basis != "linear" && basis != "simulation" && !fs::exists(basis))
      throw InvalidInput("basis must be linear, simulation or an existing JSON file");
    if (t != "auto") {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(t, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != t.size() || v < 1) throw InvalidInput("--t must be a positive integer or 'auto'");
    }
    if (t_max < 1) throw InvalidInput("--t-max must be at least 1");
    if (!std::isfinite(z) || !std::isfinite(z_prime)) throw InvalidInput("contrast levels must be finite");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("--alpha must lie in (0, 1)");
    if (corrections.empty()) throw InvalidInput("at least one correction is required");
    for (const auto& c : corrections) parse_correction(c);
  }
  if (folds < 2) throw InvalidInput("--folds must be at least 2");
  if (n_lambda < 1) throw InvalidInput("--n-lambda must be at least 1");
  if (!(lambda_ratio > 0.0 && lambda_ratio <= 1.0)) throw InvalidInput("--lambda-ratio must lie in (0, 1]");
  if (delta.empty()) throw InvalidInput("--delta needs at least one value");
  for (double v : delta)
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("--delta values must be positive");
  parse_rule(rule);
  if (path_fdev < 0.0 || adaptive_path_fdev < 0.0) throw InvalidInput("path thresholds must be >= 0");
  if (threads < 1) throw InvalidInput("--threads must be at least 1");
  if (command == "simulate") simulation_config(*this).validate();
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  if (is_data_command(c.command)) {
    j["data"] = c.data;
    j["roles"] = c.roles;
    j["outcome_column"] = c.outcome_column;
    j["treatment_column"] = c.treatment_column;
    j["covariate_columns"] = c.covariate_columns;
    j["id_column"] = c.id_column;
    j["basis"] = c.basis;
    j["t"] = c.t;
    j["t_max"] = c.t_max;
    j["z"] = c.z;
    j["z_prime"] = c.z_prime;
    j["corrections"] = c.corrections;
    j["alpha"] = c.alpha;
    j["sandwich"] = c.sandwich;
  } else {
    j["scenario"] = c.scenario;
    j["n"] = c.n;
    j["p"] = c.p;
    j["phi"] = c.phi;
    j["phi1"] = c.phi1;
    j["reps"] = c.reps;
    j["methods"] = c.methods;
    j["null_treatment"] = c.null_treatment;
    j["dataset_out"] = c.dataset_out;
    j["dataset_rep"] = c.dataset_rep;
  }
  j["folds"] = c.folds;
  j["n_lambda"] = c.n_lambda;
  j["lambda_ratio"] = c.lambda_ratio;
  j["delta"] = c.delta;
  j["rule"] = c.rule;
  j["path_fdev"] = c.path_fdev;
  j["adaptive_path_fdev"] = c.adaptive_path_fdev;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out"] = c.out;
  return j.dump(2) + "\n";
}

void apply_config_json(RunConfig& c, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw InvalidInput("config: top level must be an object");
  static const std::vector<std::string> known{
      "command", "data", "roles", "outcome_column", "treatment_column", "covariate_columns",
      "id_column", "basis", "t", "t_max", "z", "z_prime", "corrections", "alpha", "sandwich",
      "folds", "n_lambda", "lambda_ratio", "delta", "rule", "path_fdev", "adaptive_path_fdev",
      "scenario", "n", "p", "phi", "phi1", "reps", "methods", "null_treatment", "dataset_out",
      "dataset_rep", "seed", "threads", "out"};
  for (const auto& item : j.items())
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw InvalidInput("config: unknown key '" + item.key() + "'");
  try {
    take(j, "data", c.data);
    take(j, "roles", c.roles);
    take(j, "outcome_column", c.outcome_column);
    take(j, "treatment_column", c.treatment_column);
    take(j, "covariate_columns", c.covariate_columns);
    take(j, "id_column", c.id_column);
    take(j, "basis", c.basis);
    if (j.contains("t")) c.t = j["t"].is_number() ? std::to_string(j["t"].get<int>()) : j["t"].get<std::string>();
    take(j, "t_max", c.t_max);
    take(j, "z", c.z);
    take(j, "z_prime", c.z_prime);
    if (j.contains("corrections") && j["corrections"].is_string())
      c.corrections = {j["corrections"].get<std::string>()};
    else
      take(j, "corrections", c.corrections);
    take(j, "alpha", c.alpha);
    take(j, "sandwich", c.sandwich);
    take(j, "folds", c.folds);
    take(j, "n_lambda", c.n_lambda);
    take(j, "lambda_ratio", c.lambda_ratio);
    if (j.contains("delta") && j["delta"].is_number())
      c.delta = {j["delta"].get<double>()};
    else
      take(j, "delta", c.delta);
    take(j, "rule", c.rule);
    take(j, "path_fdev", c.path_fdev);
    take(j, "adaptive_path_fdev", c.adaptive_path_fdev);
    take(j, "scenario", c.scenario);
    take(j, "n", c.n);
    take(j, "p", c.p);
    take(j, "phi", c.phi);
    take(j, "phi1", c.phi1);
    take(j, "reps", c.reps);
    take(j, "methods", c.methods);
    take(j, "null_treatment", c.null_treatment);
    take(j, "dataset_out", c.dataset_out);
    take(j, "dataset_rep", c.dataset_rep);
    take(j, "seed", c.seed);
    take(j, "threads", c.threads);
    take(j, "out", c.out);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
}

Dataset load_dataset(const RunConfig& cfg) {
  const CsvTable table = read_csv_file(cfg.data);
  RoleMap roles;
  if (!cfg.roles.empty()) {
    roles = parse_roles_json(read_text(cfg.roles));
  } else {
    static const std::regex covariate_name("x[0-9]*");
    for (const auto& h : table.header) {
      if (h == cfg.outcome_column) roles[h] = ColumnRole::Outcome;
      else if (h == cfg.treatment_column) roles[h] = ColumnRole::Treatment;
      else if (!cfg.id_column.empty() && h == cfg.id_column) roles[h] = ColumnRole::Id;
      else if (cfg.covariate_columns.empty() ? std::regex_match(h, covariate_name)
                                             : std::find(cfg.covariate_columns.begin(),
                                                         cfg.covariate_columns.end(),
                                                         h) != cfg.covariate_columns.end())
        roles[h] = ColumnRole::Covariate;
      else roles[h] = ColumnRole::Mediator;
    }
    for (const auto& name : cfg.covariate_columns)
      if (!roles.count(name)) throw InvalidInput("covariate column '" + name + "' not found");
  }
  Dataset d = dataset_from_table(table, roles);
  require_valid(d);
  return d;
}

PipelineOptions pipeline_options(const RunConfig& cfg, const Dataset& d) {
  PipelineOptions po;
  if (cfg.basis == "linear") po.basis = BasisSpec::linear(d.q());
  else if (cfg.basis == "simulation") po.basis = BasisSpec::simulation_default();
  else po.basis = basis_from_json(read_text(cfg.basis));
  po.basis->validate(d.q());
  if (cfg.t != "auto") po.t = std::stoi(cfg.t);
  po.t_max = cfg.t_max;
  po.outcome.folds = cfg.folds;
  po.outcome.seed = cfg.seed;
  po.outcome.n_lambda = cfg.n_lambda;
  po.outcome.lambda_ratio = cfg.lambda_ratio;
  po.outcome.delta_grid = cfg.delta;
  po.outcome.threads = cfg.threads;
  po.outcome.rule = parse_rule(cfg.rule);
  po.outcome.path_fdev = cfg.path_fdev;
  po.outcome.adaptive_path_fdev = cfg.adaptive_path_fdev;
  po.sandwich = cfg.sandwich;
  po.sandwich_options.threads = cfg.threads;
  po.correction = parse_correction(cfg.corrections.front());
  po.alpha = cfg.alpha;
  po.z = cfg.z;
  po.z_prime = cfg.z_prime;
  return po;
}

SimConfig simulation_config(const RunConfig& cfg) {
  SimConfig sc;
  sc.n = cfg.n;
  sc.p = cfg.p;
  sc.scenario = cfg.scenario;
  sc.phi = cfg.phi;
  sc.phi1 = cfg.phi1;
  sc.n_reps = cfg.reps;
  sc.seed = cfg.seed;
  sc.methods.clear();
  for (const auto& m : cfg.methods) sc.methods.push_back(parse_method(m));
  for (long j : cfg.null_treatment) {
    if (j < 1 || j > cfg.p) throw InvalidInput("--null-treatment indices are 1-based and must be <= p");
    sc.null_treatment.push_back(static_cast<Index>(j - 1));
  }
  sc.threads = cfg.threads;
  sc.outcome.folds = cfg.folds;
  sc.outcome.n_lambda = cfg.n_lambda;
  sc.outcome.lambda_ratio = cfg.lambda_ratio;
  sc.outcome.delta_grid = cfg.delta;
  sc.outcome.rule = parse_rule(cfg.rule);
  sc.outcome.path_fdev = cfg.path_fdev;
  sc.outcome.adaptive_path_fdev = cfg.adaptive_path_fdev;
  return sc;
}

namespace {

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const SimConfig sc = simulation_config(cfg);
  const fs::path dir = prepare_out(cfg);
  write_text(dir / "config.json", config_to_json(cfg));
  if (!cfg.dataset_out.empty()) {
    const auto [d, truth] = generate(sc, cfg.dataset_rep);
    std::ofstream csv(cfg.dataset_out, std::ios::binary);
    if (!csv) throw InvalidInput("cannot write '" + cfg.dataset_out + "'");
    const RoleMap roles = write_dataset_csv(csv, d);
    write_text(cfg.dataset_out + ".roles.json", roles_to_json(roles));
    err << "wrote replication " << cfg.dataset_rep << " to " << cfg.dataset_out << "\n";
    return kOk;
  }
  err << "running " << sc.n_reps << " replications (scenario " << sc.scenario << ", n = " << sc.n
      << ", p = " << sc.p << ", phi = " << sc.phi << ", phi1 = " << sc.phi1 << ")\n";
  const auto rows = run_replications(sc);
  std::ostringstream csv;
  write_metrics_csv(csv, rows);
  write_text(dir / "metrics.csv", csv.str());
  out << csv.str();
  return kOk;
}

void log_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

int cmd_fit(const RunConfig& cfg, bool select_only, std::ostream& out, std::ostream& err) {
  const Dataset d = load_dataset(cfg);
  const PipelineOptions po = pipeline_options(cfg, d);
  const fs::path dir = prepare_out(cfg);
  write_text(dir / "config.json", config_to_json(cfg));
  err << "n = " << d.n() << ", p = " << d.p() << ", q = " << d.q() << "\n";
  const PipelineResult res = analyze(d, po);
  const std::string id_text = identification_text(res.id);
  write_text(dir / "identification.txt", id_text);
  if (res.id.factor_count) err << id_text;
  log_warnings(res.warnings, err);

  std::ostringstream sel;
  write_selection_csv(sel, res.selection);
  write_text(dir / "selection.csv", sel.str());
  const SandwichResult* sw = res.sandwich ? &*res.sandwich : nullptr;
  if (cfg.corrections.size() > 1) {
    for (const auto& name : cfg.corrections) {
      const Correction c = parse_correction(name);
      const SelectionReport r = select_active_pathways(d, res.outcome.adaptive, res.id.mediators, c,
                                                       cfg.alpha, cfg.z, cfg.z_prime, sw);
      std::ostringstream s;
      write_selection_csv(s, r);
      write_text(dir / ("selection_" + to_string(c) + ".csv"), s.str());
    }
  }

  if (!select_only) {
    write_text(dir / "fit.json", fit_report_json(d, res));
    std::ostringstream coef, cv;
    write_coefficients_csv(coef, d, res);
    write_cv_csv(cv, res.outcome);
    write_text(dir / "coefficients.csv", coef.str());
    write_text(dir / "cv.csv", cv.str());
  }

  const auto& nde = res.selection.nde;
  out << "NDE estimate " << nde.estimate << " se " << nde.se << " p " << nde.p_value << "\n";
  out << "selected mediators " << res.outcome.adaptive.active_set.size() << ", active pathways "
      << res.selection.active_pathways.size() << " (" << to_string(res.selection.method) << ", alpha "
      << res.selection.alpha << ")\n";
  for (const auto& row : res.selection.pathways)
    out << "  " << row.name << "  nie " << row.nie_hat << "  se " << row.nie_se << "  p " << row.raw_p
        << "  adjusted " << row.adjusted_p << (row.active ? "  active" : "") << "\n";
  return kOk;
}

int cmd_check_id(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Dataset d = load_dataset(cfg);
  const PipelineOptions po = pipeline_options(cfg, d);
  const fs::path dir = prepare_out(cfg);
  write_text(dir / "config.json", config_to_json(cfg));
  const IdentificationReport id = identify(d, po);
  const std::string text = identification_text(id);
  write_text(dir / "identification.txt", text);
  out << text;
  if (!id.proxy.condition_ii.holds) err << "warning: condition (ii) fails; fit would stop here\n";
  return kOk;
}

std::string scan_config_path(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

void add_tuning(CLI::App* sub, RunConfig& c) {
  sub->add_option("--folds", c.folds, "cross-validation folds");
  sub->add_option("--n-lambda", c.n_lambda, "lambda grid size");
  sub->add_option("--lambda-ratio", c.lambda_ratio, "smallest lambda as a fraction of lambda_max");
  sub->add_option("--delta", c.delta, "adaptive weight exponent(s); several are tuned by CV");
  sub->add_option("--rule", c.rule, "CV rule: min or 1se");
  sub->add_option("--path-fdev", c.path_fdev, "path truncation threshold, initial lasso (0 disables)");
  sub->add_option("--adaptive-path-fdev", c.adaptive_path_fdev, "path truncation threshold, adaptive lasso");
  sub->add_option("--seed", c.seed, "root random seed");
  sub->add_option("--threads", c.threads, "worker threads");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--config", "JSON config file; flags override its entries");
}

void add_data(CLI::App* sub, RunConfig& c) {
  sub->add_option("--data", c.data, "input CSV");
  sub->add_option("--roles", c.roles, "JSON sidecar mapping column name to role");
  sub->add_option("--outcome", c.outcome_column, "outcome column when no roles file is given");
  sub->add_option("--treatment", c.treatment_column, "treatment column when no roles file is given");
  sub->add_option("--covariates", c.covariate_columns, "covariate columns (default x, x1, x2, ...)");
  sub->add_option("--id", c.id_column, "row id column");
  sub->add_option("--basis", c.basis, "mediator basis: linear, simulation, or a JSON file");
  sub->add_option("--t", c.t, "factor count or 'auto'");
  sub->add_option("--t-max", c.t_max, "largest factor count considered by 'auto'");
  sub->add_option("--z", c.z, "treatment level z");
  sub->add_option("--z-prime", c.z_prime, "reference treatment level z'");
  sub->add_option("--correction", c.corrections, "bonferroni, holm, hochberg, hommel, bh (one or more)");
  sub->add_option("--alpha", c.alpha, "significance level");
  sub->add_flag("!--no-sandwich", c.sandwich, "skip the sandwich covariance");
  add_tuning(sub, c);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Mediation pathway selection with latent confounding"};
  app.require_subcommand(1);
  auto* sim = app.add_subcommand("simulate", "Monte Carlo study of the simulation designs");
  sim->add_option("--scenario", cfg.scenario, "1 (five active) or 2 (twenty active)");
  sim->add_option("--n", cfg.n, "sample size");
  sim->add_option("--p", cfg.p, "number of mediators");
  sim->add_option("--phi", cfg.phi, "confounder coefficient");
  sim->add_option("--phi1", cfg.phi1, "coefficient of U^2 in the outcome");
  sim->add_option("--reps", cfg.reps, "replications");
  sim->add_option("--methods", cfg.methods, "proposed, naive_lasso, naive_adaptive_lasso");
  sim->add_option("--null-treatment", cfg.null_treatment,
                  "1-based mediators given beta2 = 1 and no treatment effect");
  sim->add_option("--dataset-out", cfg.dataset_out, "write one replication as CSV and stop");
  sim->add_option("--dataset-rep", cfg.dataset_rep, "replication written by --dataset-out");
  add_tuning(sim, cfg);
  auto* fit = app.add_subcommand("fit", "full pipeline with sandwich inference");
  add_data(fit, cfg);
  auto* sel = app.add_subcommand("select", "active pathway selection report");
  add_data(sel, cfg);
  auto* chk = app.add_subcommand("check-id", "identification conditions only");
  add_data(chk, cfg);

  try {
    const std::string config_path = scan_config_path(argc, argv);
    if (!config_path.empty()) apply_config_json(cfg, read_text(config_path));
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      app.exit(e, out, err);
      return kOk;
    } catch (const CLI::CallForAllHelp& e) {
      app.exit(e, out, err);
      return kOk;
    } catch (const CLI::ParseError& e) {
      app.exit(e, out, err);
      return kUsage;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    cfg.validate();
    if (cfg.command == "simulate") return cmd_simulate(cfg, out, err);
    if (cfg.command == "fit") return cmd_fit(cfg, false, out, err);
    if (cfg.command == "select") return cmd_fit(cfg, true, out, err);
    return cmd_check_id(cfg, out, err);
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return kNumerical;
  }
}

}  // namespace medsel::cli
