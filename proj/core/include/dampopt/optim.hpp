#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dampopt/grad.hpp"
#include "dampopt/linf.hpp"
#include "dampopt/model.hpp"
#include "dampopt/rom.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

// Inner (smooth-whenever-possible) bound-constrained minimizer configuration.
struct OptimizerConfig {
  double stationarity_tol = 1e-12;
  int max_inner_iter = 400;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.5;
  int lbfgs_memory = 10;
  int max_ls_evals = 30;
  int gs_batch = 0;            // 0: 2p + 4
  int max_gs_rounds = 40;
  double gs_radius0 = 1e-1;    // times (1 + |g|)
  double gs_shrink = 0.1;
  double gs_radius_floor = 1e-10;
  Vec lower_bounds;            // empty: zeros
  Vec upper_bounds;            // empty: unbounded above
  double dense_tol = 1e-8;     // reduced L-inf tolerance inside objectives
  unsigned seed = 1234;
};

struct InnerResult {
  Vec g;
  double value = 0.0;
  double stationarity = 0.0;
  int iterations = 0;
  int evals = 0;
  bool hit_max_iter = false;
};

// value = f(g); when grad is non-null it must be filled with the gradient at
// g.  Return +inf to mark g infeasible (e.g. unstable closed loop).
using Objective = std::function<double(const Vec&, Vec*)>;

// Projected limited-memory BFGS with a weak Wolfe line search, falling back
// to gradient sampling when the smooth model stops making progress.  Suited
// to locally Lipschitz minimax objectives: nonsmooth kinks are handled by the
// line search's bisection and, near a kink-constrained minimizer, by the
// sampled descent direction.  Deterministic for a fixed seed.
InnerResult minimize_nonsmooth(const Objective& f, const Vec& g0,
                               const OptimizerConfig& cfg = {});

// Minimize the L-infinity norm of a reduced parametric model over the gains.
InnerResult minimize_reduced(const ReducedParametricModel& rom, const Vec& g0,
                             const OptimizerConfig& cfg = {});

enum class InitMode {
  equidistant,  // fixed frequency grid per initial gain
  maximizers,   // one norm computation per initial gain, interpolate at peaks
};

enum class TerminationReason { gains_tol, value_tol, max_outer };

struct AlgorithmConfig {
  InitMode init_mode = InitMode::maximizers;
  int init_sample_count = 30;   // equidistant grid size on [0, omega_max]
  int heuristic_count = 30;     // dominant-mode frequencies per norm call
  int screen_top = 3;           // candidate frequencies probed at full order
  double tol_gains = 1e-6;
  double tol_value = 1e-6;
  int max_outer_iter = 30;
  DirectionMode init_direction_mode = DirectionMode::tangential;
  DirectionMode update_direction_mode = DirectionMode::tangential;
  double greedy_tol = 1e-8;
  int greedy_max_iter = 30;
  bool hermite_check = true;
  int max_repairs = -1;         // -1: min(m, l) - 1 extra singular pairs
  bool keep_bases = false;      // retain the final bases and interpolation log
  OptimizerConfig inner;
};

struct OuterIterate {
  int iter = 0;
  Vec g;
  double reduced_value = 0.0;
  double full_value = 0.0;
  double omega = 0.0;
  int rom_dim = 0;
  int inner_iterations = 0;
  int inner_evals = 0;
  bool restarted = false;
  int repairs = 0;
  double hermite_value_residual = 0.0;
  double hermite_stationarity_residual = 0.0;
};

struct DampingOptResult {
  Vec g_star;
  double hinf_value = 0.0;
  double omega_star = 0.0;
  int outer_iterations = 0;
  int rom_dimension = 0;
  TerminationReason termination = TerminationReason::max_outer;
  std::vector<OuterIterate> trace;
  long full_factorizations = 0;  // full-order shifted factorizations consumed
  // final bases with the complete interpolation log; only with keep_bases
  std::shared_ptr<const ProjectionBasisPair> bases;
};

// Damping optimization: alternate between minimizing the gains on a reduced
// parametric surrogate and re-anchoring the surrogate with one full-order
// norm computation plus a single interpolation step at its maximizer.  The
// surrogate dimension grows by one per outer iteration under tangential
// updates (plus any interpolation repairs).
DampingOptResult optimize_damping(const VibrationalSystem& sys,
                                  const std::vector<Vec>& init_gains,
                                  const AlgorithmConfig& cfg = {});

}  // namespace dampopt
