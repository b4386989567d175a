#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "dampopt/model.hpp"
#include "dampopt/rom.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

struct NormResult {
  double value = 0.0;
  double omega_star = 0.0;    // |maximizer|
  double omega_signed = 0.0;  // maximizer with sign (complex-data models)
  FrequencyResponseSample sample;
  int iterations = 0;
  bool converged = false;
  // (omega, running best value) after each accepted evaluation round
  std::vector<std::pair<double, double>> history;
  // every (omega, sigma) actually evaluated, in order
  std::vector<std::pair<double, double>> probes;
  // factorization of the full pencil at (g, i omega_star); only set by
  // hinf_greedy, kept alive so callers can expand bases without refactorizing
  std::shared_ptr<ShiftedFactorization> final_fac;
};

struct LinfOptions {
  double tol = 1e-8;
  std::vector<double> init_freqs;
  bool refine_maximizer = true;
  int max_level_iter = 60;
};

// Level-set L-infinity norm of C (s E - A)^{-1} B on the imaginary axis for a
// dense descriptor realization.  E must be well conditioned (the pencil is
// reduced to standard form internally).  Purely imaginary eigenvalues of the
// pencil raise UnboundedModelError with the offending frequency as hint.
NormResult linf_dense(const CMat& E, const CMat& A, const CMat& B, const CMat& C,
                      const LinfOptions& opts = {});

// Real-data overload: exploits sigma(-w) = sigma(w) and real Hamiltonian
// eigenvalue computations.
NormResult linf_dense(const Mat& E, const Mat& A, const Mat& B, const Mat& C,
                      const LinfOptions& opts = {});

// Reduced parametric model at a fixed gain.
NormResult linf_dense(const ReducedParametricModel& rom, const Vec& g,
                      const LinfOptions& opts = {});

// Ascend sigma_max(F(g, i omega)) from omega0 using the analytic frequency
// derivative (secant on sigma', golden-section fallback inside the bracket
// [lo, hi]).  Returns the refined (omega, sigma).
std::pair<double, double> sigma_max_local_refine(const AffineClosedLoop& acl,
                                                 const Vec& g, double omega0,
                                                 double lo, double hi);

struct GreedyOptions {
  double tol = 1e-8;
  int max_iter = 30;
  DirectionMode mode = DirectionMode::tangential;
  bool polish = true;     // terminal secant refinement of the maximizer
  int screen_top = 0;     // >0 and seeded scratch: probe only the top-k
                          // candidate frequencies on the reduced model first
  double dense_tol = 1e-8;
};

// Greedy interpolatory lower-bound iteration for the H-infinity norm of the
// closed loop at fixed gains: build a reduced model from samples, locate its
// L-infinity maximizer with the dense solver, evaluate the full model there,
// interpolate at the maximizer, repeat until the lower bound stagnates within
// tol.  Every reported value is a genuine full-model evaluation.
//
// scratch, if given, seeds the search and accumulates every interpolation
// point evaluated here (useful for warm-starting subsequent calls); otherwise
// a private basis pair is used.
NormResult hinf_greedy(const AffineClosedLoop& acl, const Vec& g,
                       const std::vector<double>& init_freqs,
                       const GreedyOptions& opts = {},
                       ProjectionBasisPair* scratch = nullptr);

}  // namespace dampopt
