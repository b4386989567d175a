#pragma once

#include <vector>

#include "dampopt/model.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

// How interpolation directions are chosen at a sample of F(g, i omega).
//   full:       all m right / all l left unit directions (block interpolation)
//   padded:     unequal channel counts balanced through F itself; the side with
//               fewer channels gets F-weighted directions so both sides carry
//               max(m, l) columns into the rank filter
//   tangential: only the dominant singular pair, one column per side
enum class DirectionMode { full, padded, tangential };

struct DirectionSet {
  CMat right;  // m x k
  CMat left;   // l x k, same k
};

DirectionSet interpolation_directions(const FrequencyResponseSample& sample,
                                      DirectionMode mode);

struct InterpolationRecord {
  Vec g;
  double omega = 0.0;
  DirectionMode mode = DirectionMode::tangential;
  DirectionSet directions;
  double sigma = 0.0;     // largest singular value of F at the sample
  CVec u, v;              // dominant singular pair at the sample
  Index kept = 0;         // direction pairs surviving the rank filter
  bool stagnated = false; // no pair survived: point already interpolated
  bool skipped = false;   // factorization failed (pole proximity)
};

// Orthonormal complex bases of equal column count plus the point log.
// Column pairs are appended together and dropped together, so V and W always
// stay the same width.  The log holds the certified interpolation nodes:
// probes that contributed at least one column pair, plus pole-skip markers.
// A re-probe of an already interpolated point keeps nothing and is returned
// to the caller without being logged.
struct ProjectionBasisPair {
  CMat V;  // 2n x k
  CMat W;  // 2n x k
  std::vector<InterpolationRecord> log;

  Index dim() const { return V.cols(); }
};

// Append basis columns for one sample, reusing an existing factorization.
// The returned record describes the probe whether or not it was logged.
InterpolationRecord expand_from_factorization(ProjectionBasisPair& bases,
                                              const AffineClosedLoop& acl,
                                              const ShiftedFactorization& fac,
                                              const FrequencyResponseSample& sample,
                                              DirectionMode mode);

// Append explicitly chosen direction pairs at an existing factorization (used
// for interpolation repair with additional singular pairs).
InterpolationRecord expand_with_directions(ProjectionBasisPair& bases,
                                           const AffineClosedLoop& acl,
                                           const ShiftedFactorization& fac,
                                           const FrequencyResponseSample& sample,
                                           const DirectionSet& dirs,
                                           DirectionMode mode_tag);

// Factorize at (g, i omega) and append.  Pole proximity is not fatal: the
// sample is logged with skipped=true and the bases stay unchanged.
InterpolationRecord expand(ProjectionBasisPair& bases, const AffineClosedLoop& acl,
                           const Vec& g, double omega, DirectionMode mode);

ProjectionBasisPair initial_bases(const AffineClosedLoop& acl,
                                  const std::vector<Vec>& init_gains,
                                  const std::vector<std::vector<double>>& init_freqs,
                                  DirectionMode mode);

// Projected pencil blocks.  With V = [V1; V2], W = [W1; W2] the blocks are
//   Et  = W1^H V1 + W2^H M V2
//   At0 = W1^H V2 - W2^H K V1 - W2^H C_int V2
//   A(g) = At0 - sum_j g_j Wfac_j Vfac_j^T
//   Bt  = W2^H E2,  Ct = H1 V1
// so that Ct (s Et - A(g))^{-1} Bt is the W,V projection of F(g,s).
struct ReducedParametricModel {
  CMat Et;
  CMat At0;
  CMat Wfac;  // k x p, column j = W2^H b_j
  CMat Vfac;  // k x p, column j = V2^T b_j (plain transpose)
  CMat Bt;    // k x m
  CMat Ct;    // l x k

  Index dim() const { return Et.rows(); }
  Index p() const { return Wfac.cols(); }
  CMat A_of(const Vec& g) const;
};

ReducedParametricModel reduce(const AffineClosedLoop& acl,
                              const ProjectionBasisPair& bases);

CMat eval_reduced_transfer(const ReducedParametricModel& rom, const Vec& g,
                           double omega);
double eval_reduced_sigma_max(const ReducedParametricModel& rom, const Vec& g,
                              double omega);
FrequencyResponseSample eval_reduced_sample(const ReducedParametricModel& rom,
                                            const Vec& g, double omega);

struct HermiteReport {
  double value_residual = 0.0;       // right tangential or matrix value mismatch
  double left_value_residual = 0.0;  // left tangential mismatch
  double sigma_residual = 0.0;       // |sigma_red - sigma_full| / sigma_full
  double deriv_residual = 0.0;       // frequency-derivative mismatch (FD)
  double stationarity_residual = 0.0;  // directional derivative mismatch
  bool value_ok = false;
  bool deriv_ok = true;
  bool stationarity_ok = true;
  bool checked_derivative = false;
};

struct HermiteCheckOptions {
  double value_tol = 1e-8;
  double deriv_tol = 1e-4;          // FD-limited
  double stationarity_tol = 1e-6;   // scaled by sigma
  bool with_full_fd = true;         // evaluate full-model FD derivative (4 solves)
  bool with_stationarity = true;    // tangential records only
};

// Verify the interpolation conditions of one logged record against the
// reduced model: value matching along the recorded directions, the
// frequency-derivative condition via fourth-order central differences, and
// (tangential records) the Hermite condition on v^H F'(s) u.
HermiteReport check_hermite(const AffineClosedLoop& acl,
                            const ReducedParametricModel& rom,
                            const InterpolationRecord& record,
                            const HermiteCheckOptions& opts = {});

}  // namespace dampopt
