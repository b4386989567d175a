#pragma once

#include <string>
#include <vector>

#include "dampopt/bench.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

// Fully resolved run description: the parsed configuration file with every
// default filled in, plus command-line overrides.
struct RunConfig {
  // system: either the builtin oscillator family or matrices from files
  bool use_files = false;
  std::string m_path, k_path, cint_path, b2_path, e2_path, h1_path;
  bool reference_family = false;  // n = 700 configuration
  Index n = 50;
  Index j = 5;
  Index k = 25;

  // problem: preset tag, optionally overridden
  char problem = 'b';
  bool custom_problem = false;
  double alpha_c = 1e-2;
  std::vector<Vec> init_gains;  // empty: preset gains for the problem tag

  std::string mode = "iii";
  bool sweep = false;
  std::vector<Index> j_set;
  std::vector<Index> k_set;

  bool oracle = false;
  bool record_timings = false;
  unsigned seed = 1234;
  int jobs = 1;

  double tol_gains = 1e-6;
  double tol_value = 1e-6;
  double greedy_tol = 1e-8;
  double dense_tol = 1e-8;
  double stationarity_tol = 1e-12;
  int max_outer_iter = 30;
  int max_inner_iter = 400;
  int heuristic_count = 30;
  int init_sample_count = 30;
  int screen_top = 3;
  std::string init_directions = "tangential";
  std::string update_directions = "tangential";

  std::string out_dir = "out";
  bool long_run = false;
  bool verbose = false;
};

// Throws ValidationError with a line describing the offending key.
RunConfig parse_run_config(const std::string& json_text);

// The resolved configuration serialized back to JSON; embedded verbatim in
// summary.json so a run can be reproduced from its outputs alone.
std::string resolved_config_json(const RunConfig& rc);

// Execute the run and write results.csv, summary.json and (verbose only)
// trace.jsonl into rc.out_dir.  Returns a process exit code.
int run(const RunConfig& rc);

// Full command-line entry: flags --config --out --long --jobs --verbose
// --seed.  Returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace dampopt
