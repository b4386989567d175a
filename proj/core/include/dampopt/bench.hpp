#pragma once

#include <string>
#include <vector>

#include "dampopt/model.hpp"
#include "dampopt/optim.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

// Mass-spring chain anchored at both walls: unit-stencil stiffness 10, a
// piecewise-linear mass profile descending then ascending across the chain,
// two grounded-pair dampers, disturbances entering near both walls, and
// displacement outputs at the chain center.  Internal damping is a fraction
// alpha_c of the critical damping matrix.
struct OscillatorSpec {
  Index n = 50;
  Index damper_j = 5;   // damper between masses damper_j and damper_j + 1
  Index damper_k = 25;
  double alpha_c = 1e-2;
};

// size-scaled family: 4 disturbance channels, 4 outputs
VibrationalSystem build_oscillator(const OscillatorSpec& spec);

// full-size configuration: n = 700, 10 disturbance channels (five per wall,
// weights 5..1), 20 displacement outputs at masses 290..309
VibrationalSystem reference_oscillator(Index damper_j, Index damper_k,
                                       double alpha_c);

// Benchmark problem presets: internal damping level and the initial gain grid.
double problem_alpha(char problem);                 // 'a' or 'b'
std::vector<Vec> problem_init_gains(char problem);  // four corners of the grid

struct NaiveOptions {
  OptimizerConfig inner;
  double linf_tol = 1e-8;
  bool allow_large = false;  // dense eigensolves scale cubically; opt in
};

struct NaiveResult {
  Vec g_star;
  double value = 0.0;
  double omega_star = 0.0;
  int iterations = 0;
  int evals = 0;
  long norm_evals = 0;       // dense full-order norm computations
  long factorizations = 0;   // full-order shifted factorizations (gradients)
};

// Reference optimizer: the same inner method driven by dense full-order norm
// computations and full-order gradients, no reduced surrogate.  Guarded to
// n <= 200 unless allow_large is set.
NaiveResult naive_optimize(const VibrationalSystem& sys, const Vec& g0,
                           const NaiveOptions& opts = {});

struct SweepConfig {
  OscillatorSpec base;             // damper positions overridden per cell
  bool reference_family = false;   // build the n = 700 configuration instead
  std::vector<Index> j_set{5, 25};
  std::vector<Index> k_set{10, 30};
  char problem = 'b';
  bool use_preset = true;          // alpha and initial gains from the problem tag
  std::vector<Vec> custom_gains;   // used when use_preset is false
  AlgorithmConfig algo;
  bool with_oracle = false;        // also run the dense reference optimizer
  NaiveOptions oracle;
  int jobs = 1;
  unsigned seed = 1234;
};

struct SweepRow {
  std::string config_id;
  Index n = 0;
  Index j = 0;
  Index k = 0;
  char problem = 'b';
  InitMode mode = InitMode::maximizers;
  DampingOptResult result;
  bool has_oracle = false;
  NaiveResult oracle;
  double rel_gain_err = 0.0;   // vs oracle, NaN without one
  double rel_hinf_err = 0.0;
  double wall_seconds = 0.0;
  double oracle_wall_seconds = 0.0;
};

// Cartesian damper-position sweep.  Rows are independent; with jobs > 1 they
// run concurrently and the output is identical to the serial order.
std::vector<SweepRow> run_sweep(const SweepConfig& cfg);

}  // namespace dampopt
