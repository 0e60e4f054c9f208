#pragma once

#include "medsel/csv.hpp"
#include "medsel/pipeline.hpp"
#include "medsel/simulation.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace medsel::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kNumerical = 1;
inline constexpr int kUsage = 2;

struct RunConfig {
  std::string command;

  // data commands
  std::string data;
  std::string roles;  // JSON sidecar; empty infers roles from column names
  std::string outcome_column = "y";
  std::string treatment_column = "z";
  std::vector<std::string> covariate_columns;  // empty: columns named x, x1, x2, ...
  std::string id_column;
  std::string basis = "linear";  // linear, simulation, or a JSON file
  std::string t = "auto";
  int t_max = 5;
  double z = 1.0;
  double z_prime = 0.0;
  std::vector<std::string> corrections{"bonferroni"};
  double alpha = 0.05;
  bool sandwich = true;

  // tuning
  int folds = 5;
  int n_lambda = 100;
  double lambda_ratio = 1e-4;
  std::vector<double> delta{2.0};
  std::string rule = "min";
  double path_fdev = 1e-5;
  double adaptive_path_fdev = 1e-6;

  // simulation
  int scenario = 1;
  long n = 1000;
  long p = 100;
  double phi = 1.0;
  double phi1 = 0.0;
  int reps = 200;
  std::vector<std::string> methods{"proposed", "naive_lasso", "naive_adaptive_lasso"};
  std::vector<long> null_treatment;  // 1-based mediator indices
  std::string dataset_out;
  int dataset_rep = 0;

  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out = ".";

  // Throws InvalidInput.
  void validate() const;
};

std::string config_to_json(const RunConfig& cfg);
// Overwrites the fields present in `text`; unknown keys are rejected.
void apply_config_json(RunConfig& cfg, const std::string& text);

Dataset load_dataset(const RunConfig& cfg);
PipelineOptions pipeline_options(const RunConfig& cfg, const Dataset& d);
SimConfig simulation_config(const RunConfig& cfg);

// Full command line, argv[0] included. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace medsel::cli
